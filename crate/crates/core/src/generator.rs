//! Synthetic latent block model data.
//!
//! Row labels are drawn i.i.d. uniform on the K row clusters and column labels
//! i.i.d. uniform on the H column clusters; every entry is then drawn
//! independently from its block's distribution.

use std::fmt;
use std::str::FromStr;

use ndarray::{array, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BlockParams, BlockStructure, ObservedMatrix};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Bernoulli,
    Poisson,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Gaussian, Family::Bernoulli, Family::Poisson];

    /// Fixed point of the mean interpolation used by the accuracy study.
    pub fn interpolation_center(self) -> f64 {
        match self {
            Family::Gaussian | Family::Bernoulli => 0.5,
            Family::Poisson => 5.0,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Gaussian => "gaussian",
            Family::Bernoulli => "bernoulli",
            Family::Poisson => "poisson",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Family::Gaussian),
            "bernoulli" => Ok(Family::Bernoulli),
            "poisson" => Ok(Family::Poisson),
            other => Err(Error::InvalidParams(format!("unknown family '{other}'"))),
        }
    }
}

/// The 4×3 block parameters used by all synthetic studies.
pub mod presets {
    use super::*;

    pub fn paper_4x3_means(family: Family) -> Array2<f64> {
        let base = array![
            [0.9, 0.1, 0.4],
            [0.2, 0.7, 0.3],
            [0.3, 0.2, 0.8],
            [0.6, 0.9, 0.1],
        ];
        match family {
            Family::Gaussian | Family::Bernoulli => base,
            Family::Poisson => array![
                [9.0, 1.0, 4.0],
                [2.0, 7.0, 3.0],
                [3.0, 2.0, 8.0],
                [6.0, 9.0, 1.0],
            ],
        }
    }

    pub fn paper_4x3_stds() -> Array2<f64> {
        array![
            [0.08, 0.06, 0.15],
            [0.14, 0.12, 0.07],
            [0.09, 0.1, 0.11],
            [0.16, 0.13, 0.05],
        ]
    }

    /// Block parameters of the 4×3 model. Bernoulli and Poisson carry zero stds.
    pub fn paper_4x3(family: Family) -> BlockParams {
        let means = paper_4x3_means(family);
        match family {
            Family::Gaussian => BlockParams::new(means, paper_4x3_stds()),
            Family::Bernoulli | Family::Poisson => BlockParams::from_means(means),
        }
        .expect("preset parameters are valid")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub family: Family,
    pub params: BlockParams,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        let (k, h) = (self.params.k(), self.params.h());
        if k == 0 || h == 0 {
            return Err(Error::InvalidParams("empty parameter matrix".into()));
        }
        if self.n < k.max(2) || self.p < h.max(2) {
            return Err(Error::InvalidParams(format!(
                "a {}x{} matrix cannot hold {k}x{h} nonempty clusters with at least two rows and columns",
                self.n, self.p
            )));
        }
        let means = &self.params.means;
        match self.family {
            Family::Gaussian => {
                if self.params.stds.iter().any(|&s| !(s > 0.0)) {
                    return Err(Error::InvalidParams(
                        "Gaussian block stds must be strictly positive".into(),
                    ));
                }
            }
            Family::Bernoulli => {
                if means.iter().any(|&b| !(0.0..=1.0).contains(&b)) {
                    return Err(Error::InvalidParams(
                        "Bernoulli block means must lie in [0, 1]".into(),
                    ));
                }
            }
            Family::Poisson => {
                if means.iter().any(|&b| b < 0.0) {
                    return Err(Error::InvalidParams(
                        "Poisson block means must be nonnegative".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

// Stream 0 feeds the entries; stream 1 + attempt feeds the labels.
const ENTRY_STREAM: u64 = 0;
const LABEL_STREAM_BASE: u64 = 1;
const MAX_LABEL_ATTEMPTS: u64 = 100_000;

fn draw_labels(rng: &mut ChaCha8Rng, len: usize, count: usize) -> Vec<usize> {
    (0..len).map(|_| rng.random_range(0..count)).collect()
}

fn all_present(labels: &[usize], count: usize) -> bool {
    let mut seen = vec![false; count];
    labels.iter().for_each(|&g| seen[g] = true);
    seen.into_iter().all(|s| s)
}

/// Draws uniform labels, redrawing the whole vector from the next stream until
/// no cluster is empty.
fn draw_structure(spec: &GeneratorSpec) -> Result<BlockStructure> {
    let (k, h) = (spec.params.k(), spec.params.h());
    for attempt in 0..MAX_LABEL_ATTEMPTS {
        let mut rng = stream_rng(spec.seed, LABEL_STREAM_BASE + attempt);
        let rows = draw_labels(&mut rng, spec.n, k);
        let cols = draw_labels(&mut rng, spec.p, h);
        if all_present(&rows, k) && all_present(&cols, h) {
            return BlockStructure::new(rows, cols, k, h);
        }
    }
    Err(Error::InvalidParams(format!(
        "no assignment without empty clusters after {MAX_LABEL_ATTEMPTS} draws"
    )))
}

/// Samples a data matrix and its ground-truth structure. Pure in `spec`.
pub fn generate(spec: &GeneratorSpec) -> Result<(ObservedMatrix, BlockStructure)> {
    spec.validate()?;
    let truth = draw_structure(spec)?;
    let mut rng = stream_rng(spec.seed, ENTRY_STREAM);
    let (rows, cols) = (truth.row_assign(), truth.col_assign());
    let params = &spec.params;
    let mut data = Array2::<f64>::zeros((spec.n, spec.p));

    match spec.family {
        Family::Gaussian => {
            for (i, mut row) in data.rows_mut().into_iter().enumerate() {
                for (j, x) in row.iter_mut().enumerate() {
                    let (k, h) = (rows[i], cols[j]);
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *x = params.means[[k, h]] + params.stds[[k, h]] * z;
                }
            }
        }
        Family::Bernoulli => {
            for (i, mut row) in data.rows_mut().into_iter().enumerate() {
                for (j, x) in row.iter_mut().enumerate() {
                    let prob = params.means[[rows[i], cols[j]]];
                    *x = if rng.random::<f64>() < prob { 1.0 } else { 0.0 };
                }
            }
        }
        Family::Poisson => {
            let dists: Array2<Option<Poisson<f64>>> = params.means.mapv(|lambda| {
                (lambda > 0.0).then(|| Poisson::new(lambda).expect("positive rate"))
            });
            for (i, mut row) in data.rows_mut().into_iter().enumerate() {
                for (j, x) in row.iter_mut().enumerate() {
                    *x = match &dists[[rows[i], cols[j]]] {
                        Some(d) => d.sample(&mut rng),
                        None => 0.0,
                    };
                }
            }
        }
    }
    Ok((ObservedMatrix::new(data)?, truth))
}

/// Shrinks block means toward `center`: `(1 - t/10) (mean - center) + center`.
///
/// `t` must be in `0..=9`; stds are passed through.
pub fn interpolate_means(base: &BlockParams, t: u32, center: f64) -> BlockParams {
    assert!(t <= 9, "interpolation step must be in 0..=9, got {t}");
    if t == 0 {
        return base.clone();
    }
    let weight = 1.0 - f64::from(t) / 10.0;
    BlockParams {
        means: base.means.mapv(|b| weight * (b - center) + center),
        stds: base.stds.clone(),
    }
}
