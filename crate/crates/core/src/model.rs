//! Domain types shared by every stage of the test.
//!
//! Cluster labels are stored 0-based in memory and converted to 1-based
//! labels at every serialization boundary.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Checks that a matrix has at least two rows and columns and no NaN/Inf entry.
pub fn validate(data: ArrayView2<'_, f64>) -> Result<()> {
    let (n, p) = data.dim();
    if n < 2 || p < 2 {
        return Err(Error::DegenerateShape { n, p });
    }
    for ((i, j), v) in data.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFiniteEntry { row: i + 1, col: j + 1 });
        }
    }
    Ok(())
}

/// A dense, validated n×p data matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedMatrix {
    data: Array2<f64>,
}

impl ObservedMatrix {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        validate(data.view())?;
        // Standard layout keeps row access contiguous for the kernels downstream.
        let data = if data.is_standard_layout() {
            data
        } else {
            data.as_standard_layout().into_owned()
        };
        Ok(Self { data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::DimensionMismatch(format!(
                "row {} has {} entries, expected {}",
                bad + 1,
                rows[bad].len(),
                p
            )));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let data = Array2::from_shape_vec((n, p), flat)
            .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
        Self::new(data)
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn p(&self) -> usize {
        self.data.ncols()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.data.dim()
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.data
    }

    /// Applies `x -> scale * x + shift` entrywise.
    pub fn affine(&self, scale: f64, shift: f64) -> Result<Self> {
        Self::new(self.data.mapv(|x| scale * x + shift))
    }
}

/// Row and column cluster assignments with their cluster counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BlockStructureRecord", into = "BlockStructureRecord")]
pub struct BlockStructure {
    row_assign: Vec<usize>,
    col_assign: Vec<usize>,
    k: usize,
    h: usize,
}

#[derive(Serialize, Deserialize)]
struct BlockStructureRecord {
    row_assign: Vec<usize>,
    col_assign: Vec<usize>,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "H")]
    h: usize,
}

impl From<BlockStructure> for BlockStructureRecord {
    fn from(s: BlockStructure) -> Self {
        Self {
            row_assign: s.row_assign.iter().map(|&g| g + 1).collect(),
            col_assign: s.col_assign.iter().map(|&g| g + 1).collect(),
            k: s.k,
            h: s.h,
        }
    }
}

impl TryFrom<BlockStructureRecord> for BlockStructure {
    type Error = Error;

    fn try_from(r: BlockStructureRecord) -> Result<Self> {
        BlockStructure::from_one_based(&r.row_assign, &r.col_assign, r.k, r.h)
    }
}

fn check_labels(axis: &str, labels: &[usize], count: usize) -> Result<()> {
    if count == 0 {
        return Err(Error::InvalidStructure(format!("{axis} cluster count is zero")));
    }
    let mut seen = vec![false; count];
    for (i, &g) in labels.iter().enumerate() {
        if g >= count {
            return Err(Error::InvalidStructure(format!(
                "{axis} {} has label {} outside 1..={count}",
                i + 1,
                g + 1
            )));
        }
        seen[g] = true;
    }
    if let Some(gap) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidStructure(format!(
            "{axis} cluster {} is empty",
            gap + 1
        )));
    }
    Ok(())
}

impl BlockStructure {
    /// Builds a structure from 0-based labels.
    pub fn new(row_assign: Vec<usize>, col_assign: Vec<usize>, k: usize, h: usize) -> Result<Self> {
        check_labels("row", &row_assign, k)?;
        check_labels("column", &col_assign, h)?;
        Ok(Self {
            row_assign,
            col_assign,
            k,
            h,
        })
    }

    /// Builds a structure from 1-based labels, as found in external files.
    pub fn from_one_based(rows: &[usize], cols: &[usize], k: usize, h: usize) -> Result<Self> {
        let shift = |axis: &str, v: &[usize]| -> Result<Vec<usize>> {
            v.iter()
                .enumerate()
                .map(|(i, &g)| {
                    g.checked_sub(1).ok_or_else(|| {
                        Error::InvalidStructure(format!("{axis} {} has label 0", i + 1))
                    })
                })
                .collect()
        };
        Self::new(shift("row", rows)?, shift("column", cols)?, k, h)
    }

    /// Single-block structure.
    pub fn trivial(n: usize, p: usize) -> Self {
        Self {
            row_assign: vec![0; n],
            col_assign: vec![0; p],
            k: 1,
            h: 1,
        }
    }

    pub fn n(&self) -> usize {
        self.row_assign.len()
    }

    pub fn p(&self) -> usize {
        self.col_assign.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn h(&self) -> usize {
        self.h
    }

    /// 0-based row labels.
    pub fn row_assign(&self) -> &[usize] {
        &self.row_assign
    }

    /// 0-based column labels.
    pub fn col_assign(&self) -> &[usize] {
        &self.col_assign
    }

    pub fn row_sizes(&self) -> Vec<usize> {
        cluster_sizes(&self.row_assign, self.k)
    }

    pub fn col_sizes(&self) -> Vec<usize> {
        cluster_sizes(&self.col_assign, self.h)
    }

    pub fn check_dims(&self, n: usize, p: usize) -> Result<()> {
        if self.n() != n || self.p() != p {
            return Err(Error::DimensionMismatch(format!(
                "structure covers {}x{}, matrix is {n}x{p}",
                self.n(),
                self.p()
            )));
        }
        Ok(())
    }

    /// Structure of the matrix whose row `i` is row `row_perm[i]` of the original
    /// (and likewise for columns).
    pub fn permuted(&self, row_perm: &[usize], col_perm: &[usize]) -> Self {
        Self {
            row_assign: row_perm.iter().map(|&i| self.row_assign[i]).collect(),
            col_assign: col_perm.iter().map(|&j| self.col_assign[j]).collect(),
            k: self.k,
            h: self.h,
        }
    }

    /// Structure of the transposed matrix.
    pub fn transposed(&self) -> Self {
        Self {
            row_assign: self.col_assign.clone(),
            col_assign: self.row_assign.clone(),
            k: self.h,
            h: self.k,
        }
    }
}

fn cluster_sizes(labels: &[usize], count: usize) -> Vec<usize> {
    let mut sizes = vec![0; count];
    for &g in labels {
        sizes[g] += 1;
    }
    sizes
}

/// Block-wise means and standard deviations, both K×H.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockParams {
    #[serde(with = "rows_serde")]
    pub means: Array2<f64>,
    #[serde(with = "rows_serde")]
    pub stds: Array2<f64>,
}

impl BlockParams {
    pub fn new(means: Array2<f64>, stds: Array2<f64>) -> Result<Self> {
        if means.dim() != stds.dim() {
            return Err(Error::DimensionMismatch(format!(
                "means are {:?}, stds are {:?}",
                means.dim(),
                stds.dim()
            )));
        }
        if means.iter().chain(stds.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite block parameter".into()));
        }
        if stds.iter().any(|&s| s < 0.0) {
            return Err(Error::InvalidParams("negative block standard deviation".into()));
        }
        Ok(Self { means, stds })
    }

    /// Means only; the stds are set to zero (Bernoulli and Poisson models).
    pub fn from_means(means: Array2<f64>) -> Result<Self> {
        let stds = Array2::zeros(means.dim());
        Self::new(means, stds)
    }

    pub fn k(&self) -> usize {
        self.means.nrows()
    }

    pub fn h(&self) -> usize {
        self.means.ncols()
    }
}

/// Serializes a matrix as a list of rows.
pub(crate) mod rows_serde {
    use ndarray::Array2;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Array2<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.rows().into_iter().map(|r| r.to_vec()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Array2<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(D::Error::custom("ragged matrix"));
        }
        Array2::from_shape_vec((n, p), rows.into_iter().flatten().collect())
            .map_err(D::Error::custom)
    }
}

/// The residual matrix standardized block by block, together with the
/// structure that defined the blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedMatrix {
    pub data: Array2<f64>,
    pub structure: BlockStructure,
}

/// Centering `a` and scale `b` that map the largest Gram eigenvalue onto the
/// Tracy-Widom scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingConstants {
    pub a: f64,
    pub b: f64,
}

/// Outcome of one goodness-of-fit test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub lambda1_hat: f64,
    pub scaling: ScalingConstants,
    #[serde(rename = "statistic_T")]
    pub statistic_t: f64,
    pub alpha: f64,
    pub quantile: f64,
    pub reject: bool,
}

impl TestResult {
    /// Derives the statistic and the decision from their inputs so the stored
    /// fields are always mutually consistent.
    pub fn new(lambda1_hat: f64, scaling: ScalingConstants, alpha: f64, quantile: f64) -> Self {
        let statistic_t = (lambda1_hat - scaling.a) / scaling.b;
        Self {
            lambda1_hat,
            scaling,
            statistic_t,
            alpha,
            quantile,
            reject: statistic_t >= quantile,
        }
    }
}

/// Error captured inside a selection trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepError {
    pub kind: String,
    pub message: String,
}

impl From<&Error> for StepError {
    fn from(e: &Error) -> Self {
        Self {
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStep {
    #[serde(rename = "K0")]
    pub k0: usize,
    #[serde(rename = "H0")]
    pub h0: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub result: Option<TestResult>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<StepError>,
}

impl SelectionStep {
    /// A step is accepted only when the test ran and did not reject.
    pub fn accepted(&self) -> bool {
        matches!(&self.result, Some(r) if !r.reject)
    }
}

/// Ordered record of every hypothesis visited by the sequential selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub steps: Vec<SelectionStep>,
    pub selected: Option<(usize, usize)>,
    pub exhausted: bool,
}
