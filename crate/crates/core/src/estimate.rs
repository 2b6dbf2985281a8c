//! Block-wise means and standard deviations and the standardized residual
//! matrix built from them.
//!
//! The standard deviation uses the population divisor `|I_k| |J_h|`, so within
//! every block the normalized matrix has mean 0 and mean square 1 exactly, up
//! to rounding. Block sums use Neumaier-compensated accumulation in a fixed
//! row-major order.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::{BlockParams, BlockStructure, NormalizedMatrix, ObservedMatrix};

/// Standard deviations below this are treated as a constant block.
pub const DEGENERATE_STD: f64 = 1e-12;

/// Neumaier's compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn total(&self) -> f64 {
        self.sum + self.carry
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub params: BlockParams,
    pub fitted_mean: Array2<f64>,
    pub fitted_std: Array2<f64>,
    pub normalized: NormalizedMatrix,
}

fn block_reduce(
    matrix: &ObservedMatrix,
    structure: &BlockStructure,
    f: impl Fn(usize, usize, f64) -> f64,
) -> Array2<f64> {
    let (rows, cols) = (structure.row_assign(), structure.col_assign());
    let mut acc = vec![CompensatedSum::default(); structure.k() * structure.h()];
    let h = structure.h();
    for (i, row) in matrix.data().rows().into_iter().enumerate() {
        let base = rows[i] * h;
        for (j, &x) in row.iter().enumerate() {
            acc[base + cols[j]].add(f(rows[i], cols[j], x));
        }
    }
    Array2::from_shape_fn((structure.k(), h), |(k, hh)| acc[k * h + hh].total())
}

/// Block means and population standard deviations. Does not reject constant blocks.
pub fn block_params(matrix: &ObservedMatrix, structure: &BlockStructure) -> Result<BlockParams> {
    structure.check_dims(matrix.n(), matrix.p())?;
    let (rs, cs) = (structure.row_sizes(), structure.col_sizes());
    let count = Array2::from_shape_fn((structure.k(), structure.h()), |(k, h)| {
        (rs[k] * cs[h]) as f64
    });
    let means = block_reduce(matrix, structure, |_, _, x| x) / &count;
    let sq = block_reduce(matrix, structure, |k, h, x| {
        let dev = x - means[[k, h]];
        dev * dev
    });
    let stds = (sq / &count).mapv(f64::sqrt);
    BlockParams::new(means, stds)
}

fn check_degenerate(params: &BlockParams) -> Result<()> {
    for ((k, h), &s) in params.stds.indexed_iter() {
        if s < DEGENERATE_STD {
            return Err(Error::DegenerateBlock {
                k: k + 1,
                h: h + 1,
                std: s,
            });
        }
    }
    Ok(())
}

/// Standardizes every entry by its block's estimated mean and std.
pub fn normalize(
    matrix: &ObservedMatrix,
    structure: &BlockStructure,
    params: &BlockParams,
) -> Result<NormalizedMatrix> {
    structure.check_dims(matrix.n(), matrix.p())?;
    check_degenerate(params)?;
    let (rows, cols) = (structure.row_assign(), structure.col_assign());
    let data = Array2::from_shape_fn((matrix.n(), matrix.p()), |(i, j)| {
        let (k, h) = (rows[i], cols[j]);
        (matrix.data()[[i, j]] - params.means[[k, h]]) / params.stds[[k, h]]
    });
    Ok(NormalizedMatrix {
        data,
        structure: structure.clone(),
    })
}

pub fn estimate(matrix: &ObservedMatrix, structure: &BlockStructure) -> Result<EstimationResult> {
    let params = block_params(matrix, structure)?;
    let normalized = normalize(matrix, structure, &params)?;
    let (rows, cols) = (structure.row_assign(), structure.col_assign());
    let dim = (matrix.n(), matrix.p());
    let fitted_mean = Array2::from_shape_fn(dim, |(i, j)| params.means[[rows[i], cols[j]]]);
    let fitted_std = Array2::from_shape_fn(dim, |(i, j)| params.stds[[rows[i], cols[j]]]);
    Ok(EstimationResult {
        params,
        fitted_mean,
        fitted_std,
        normalized,
    })
}
