//! Block-structure estimation by Ward's agglomerative clustering, applied
//! independently to the rows and to the columns of the data matrix.
//!
//! Merge costs follow the Lance-Williams recurrence for Ward linkage on squared
//! Euclidean distances. Among pairs of equal cost the pair whose
//! (smaller representative, larger representative) is lexicographically
//! smallest merges first, where a cluster's representative is its smallest
//! original member. This makes the output a deterministic function of the
//! input.

use std::cmp::Ordering;
use std::sync::Arc;

use itertools::Itertools;
use ndarray::{s, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BlockStructure, ObservedMatrix};

/// Input to a co-clustering algorithm.
#[derive(Debug, Clone, Copy)]
pub struct ClusteringRequest<'a> {
    pub matrix: &'a ObservedMatrix,
    pub k0: usize,
    pub h0: usize,
}

impl ClusteringRequest<'_> {
    pub fn validate(&self) -> Result<()> {
        let (n, p) = (self.matrix.n(), self.matrix.p());
        if self.k0 == 0 || self.h0 == 0 || self.k0 > n || self.h0 > p {
            return Err(Error::TooManyClusters {
                k0: self.k0,
                h0: self.h0,
                n,
                p,
            });
        }
        Ok(())
    }
}

/// Any consistent co-clustering algorithm can be plugged into the test.
pub type Clusterer = Arc<dyn Fn(&ClusteringRequest<'_>) -> Result<BlockStructure> + Send + Sync>;

pub fn ward_clusterer() -> Clusterer {
    Arc::new(ward_cocluster)
}

pub fn ward_cocluster(req: &ClusteringRequest<'_>) -> Result<BlockStructure> {
    req.validate()?;
    let a = req.matrix.view();
    let (rows, cols) = rayon::join(|| ward_labels(a, req.k0), || ward_labels(a.t(), req.h0));
    BlockStructure::new(rows, cols, req.k0, req.h0)
}

/// Total order on candidate merges: cost, then representatives.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    cost: f64,
    lo: usize,
    hi: usize,
}

impl Candidate {
    const NONE: Candidate = Candidate {
        cost: f64::INFINITY,
        lo: usize::MAX,
        hi: usize::MAX,
    };

    fn new(cost: f64, a: usize, b: usize) -> Self {
        Self {
            cost,
            lo: a.min(b),
            hi: a.max(b),
        }
    }

    fn cmp(&self, other: &Self) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then(self.lo.cmp(&other.lo))
            .then(self.hi.cmp(&other.hi))
    }

    fn partner_of(&self, x: usize) -> usize {
        if self.lo == x {
            self.hi
        } else {
            self.lo
        }
    }
}

/// Pairwise squared Euclidean distances between the rows of `points`, in a
/// dense row-major `n*n` buffer.
fn squared_distances(points: ArrayView2<'_, f64>) -> Vec<f64> {
    const TILE: usize = 256;
    let n = points.nrows();
    // The Gram matrix is symmetric, so only tiles on or above the diagonal
    // are multiplied; they land in the upper triangle of `d` for now.
    let mut d = vec![0.0; n * n];
    for r0 in (0..n).step_by(TILE) {
        let r1 = (r0 + TILE).min(n);
        let left = points.slice(s![r0..r1, ..]);
        for c0 in (r0..n).step_by(TILE) {
            let c1 = (c0 + TILE).min(n);
            let tile = left.dot(&points.slice(s![c0..c1, ..]).t());
            for (di, row) in tile.rows().into_iter().enumerate() {
                let i = r0 + di;
                for (dj, &g) in row.iter().enumerate() {
                    let j = c0 + dj;
                    if j >= i {
                        d[i * n + j] = g;
                    }
                }
            }
        }
    }
    let norms: Vec<f64> = (0..n).map(|i| d[i * n + i]).collect();
    for i in 0..n {
        d[i * n + i] = 0.0;
        for j in (i + 1)..n {
            let v = (norms[i] + norms[j] - 2.0 * d[i * n + j]).max(0.0);
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Labels for the rows of `points` after cutting the Ward dendrogram at `k`
/// clusters. Labels are numbered by first appearance.
pub fn ward_labels(points: ArrayView2<'_, f64>, k: usize) -> Vec<usize> {
    let n = points.nrows();
    assert!(k >= 1 && k <= n, "cluster count {k} out of range for {n} points");
    if k == 1 {
        return vec![0; n];
    }
    if k == n {
        return (0..n).collect();
    }

    let mut d = squared_distances(points);
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    // parent[x] is the slot x was merged into; slots are cluster representatives.
    let mut parent: Vec<usize> = (0..n).collect();

    let scan = |x: usize, d: &[f64], active: &[bool]| -> Candidate {
        let row = &d[x * n..(x + 1) * n];
        let mut best = Candidate::NONE;
        for (y, &cost) in row.iter().enumerate() {
            if y != x && active[y] {
                let c = Candidate::new(cost, x, y);
                if c.cmp(&best) == Ordering::Less {
                    best = c;
                }
            }
        }
        best
    };

    let mut best: Vec<Candidate> = (0..n).map(|x| scan(x, &d, &active)).collect();

    for _ in 0..(n - k) {
        let merge = (0..n)
            .filter(|&x| active[x])
            .map(|x| best[x])
            .min_by(|a, b| a.cmp(b))
            .expect("at least two active clusters");
        let (a, b) = (merge.lo, merge.hi);
        let (na, nb) = (size[a] as f64, size[b] as f64);
        let dab = merge.cost;

        active[b] = false;
        parent[b] = a;
        for x in 0..n {
            if !active[x] || x == a {
                continue;
            }
            let nx = size[x] as f64;
            let updated =
                ((na + nx) * d[a * n + x] + (nb + nx) * d[b * n + x] - nx * dab) / (na + nb + nx);
            d[a * n + x] = updated;
            d[x * n + a] = updated;
        }
        size[a] += size[b];

        best[a] = scan(a, &d, &active);
        for x in 0..n {
            if !active[x] || x == a {
                continue;
            }
            let partner = best[x].partner_of(x);
            if partner == a || partner == b {
                best[x] = scan(x, &d, &active);
            } else {
                let c = Candidate::new(d[x * n + a], x, a);
                if c.cmp(&best[x]) == Ordering::Less {
                    best[x] = c;
                }
            }
        }
    }

    // Resolve each point to its surviving representative and relabel by first appearance.
    let root = |mut x: usize| {
        while parent[x] != x {
            x = parent[x];
        }
        x
    };
    let mut label_of_root = vec![usize::MAX; n];
    let mut next = 0;
    (0..n)
        .map(|i| {
            let r = root(i);
            if label_of_root[r] == usize::MAX {
                label_of_root[r] = next;
                next += 1;
            }
            label_of_root[r]
        })
        .collect()
}

/// Best label correspondence between an estimated structure and the truth.
///
/// `row_perm[g]` is the truth label matched to estimated row label `g`
/// (0-based); likewise `col_perm`. `agreement` pools rows and columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub row_perm: Vec<usize>,
    pub col_perm: Vec<usize>,
    pub row_agreement: f64,
    pub col_agreement: f64,
    pub agreement: f64,
}

impl Alignment {
    /// True when the estimate equals the truth up to relabeling.
    pub fn exact(&self) -> bool {
        self.row_agreement == 1.0 && self.col_agreement == 1.0
    }
}

const MAX_ALIGN_CLUSTERS: usize = 8;

fn best_permutation(est: &[usize], truth: &[usize], k: usize) -> (Vec<usize>, usize) {
    let mut confusion = vec![vec![0usize; k]; k];
    for (&e, &t) in est.iter().zip(truth) {
        confusion[e][t] += 1;
    }
    let mut best = ((0..k).collect::<Vec<_>>(), 0usize);
    let mut first = true;
    for perm in (0..k).permutations(k) {
        let hits: usize = perm.iter().enumerate().map(|(e, &t)| confusion[e][t]).sum();
        if first || hits > best.1 {
            best = (perm, hits);
            first = false;
        }
    }
    best
}

pub fn align_labels(estimated: &BlockStructure, truth: &BlockStructure) -> Result<Alignment> {
    if estimated.n() != truth.n() || estimated.p() != truth.p() {
        return Err(Error::DimensionMismatch(format!(
            "estimated structure is {}x{}, truth is {}x{}",
            estimated.n(),
            estimated.p(),
            truth.n(),
            truth.p()
        )));
    }
    if estimated.k() != truth.k() || estimated.h() != truth.h() {
        return Err(Error::DimensionMismatch(format!(
            "estimated structure has {}x{} clusters, truth has {}x{}",
            estimated.k(),
            estimated.h(),
            truth.k(),
            truth.h()
        )));
    }
    let (k, h) = (truth.k(), truth.h());
    if k > MAX_ALIGN_CLUSTERS || h > MAX_ALIGN_CLUSTERS {
        return Err(Error::TooManyClustersForExhaustiveAlignment { k, h });
    }
    let (row_perm, row_hits) = best_permutation(estimated.row_assign(), truth.row_assign(), k);
    let (col_perm, col_hits) = best_permutation(estimated.col_assign(), truth.col_assign(), h);
    let (n, p) = (truth.n() as f64, truth.p() as f64);
    Ok(Alignment {
        row_perm,
        col_perm,
        row_agreement: row_hits as f64 / n,
        col_agreement: col_hits as f64 / p,
        agreement: (row_hits + col_hits) as f64 / (n + p),
    })
}
