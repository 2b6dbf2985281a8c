//! Largest eigenvalue of `ZᵀZ` without forming the Gram matrix.
//!
//! Symmetric Lanczos with full reorthogonalization runs on the implicit
//! operator `v -> Zᵀ(Z v)`, applied in one pass over the rows of Z. The Ritz value of the
//! tridiagonal projection is found by Sturm bisection and its Ritz vector by
//! inverse iteration. Two seeded starts guard against a start vector that is
//! nearly orthogonal to the leading eigenvector.

use ndarray::{Array1, ArrayView2};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{NormalizedMatrix, ScalingConstants};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    pub rel_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            rel_tolerance: 1e-10,
            max_iterations: 10_000,
        }
    }
}

impl SpectralConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tolerance > 0.0 && self.rel_tolerance < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "rel_tolerance must be in (0, 1), got {}",
                self.rel_tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

/// Centering and scale that put the largest Gram eigenvalue of an n×p noise
/// matrix on the Tracy-Widom scale.
pub fn scaling_constants(n: usize, p: usize) -> ScalingConstants {
    let (sn, sp) = ((n as f64).sqrt(), (p as f64).sqrt());
    ScalingConstants {
        a: (sn + sp).powi(2),
        b: (sn + sp) * (1.0 / sn + 1.0 / sp).cbrt(),
    }
}

pub fn max_eigenvalue(z: &NormalizedMatrix, cfg: &SpectralConfig) -> Result<f64> {
    largest_gram_eigenvalue(z.data.view(), cfg)
}

const START_SEED: u64 = 0x5eed_1a2c_0b5e_55ed;

/// Largest eigenvalue of `zᵀz`, i.e. the squared largest singular value of `z`.
pub fn largest_gram_eigenvalue(z: ArrayView2<'_, f64>, cfg: &SpectralConfig) -> Result<f64> {
    cfg.validate()?;
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("matrix has non-finite entries".into()));
    }
    if z.is_empty() {
        return Ok(0.0);
    }
    let op = GramOperator::new(z);
    let first = lanczos(&op, cfg, 0)?;
    let second = lanczos(&op, cfg, 1)?;
    let scale = first.max(second);
    if (first - second).abs() > cfg.rel_tolerance * scale {
        Ok(scale)
    } else {
        Ok(first)
    }
}

/// `x -> ZᵀZ x`, computed row by row in a single pass over Z.
struct GramOperator<'a> {
    z: ArrayView2<'a, f64>,
}

impl<'a> GramOperator<'a> {
    fn new(z: ArrayView2<'a, f64>) -> Self {
        Self { z }
    }

    fn dim(&self) -> usize {
        self.z.ncols()
    }

    /// Each row contributes `(row . x) row`; the row stays in cache between
    /// the dot product and the update.
    fn apply(&self, x: &Array1<f64>) -> Array1<f64> {
        let mut out = Array1::zeros(self.z.ncols());
        for row in self.z.rows() {
            let c = row.dot(x);
            if c != 0.0 {
                out.scaled_add(c, &row);
            }
        }
        out
    }
}

fn lanczos(op: &GramOperator<'_>, cfg: &SpectralConfig, start: u64) -> Result<f64> {
    let dim = op.dim();
    let tol = cfg.rel_tolerance;
    let residual_tol = tol.sqrt();

    let mut rng = stream_rng(START_SEED, start);
    let mut q: Array1<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    q /= q.dot(&q).sqrt();

    let mut basis: Vec<Array1<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut prev_theta = f64::NAN;
    let mut small_changes = 0usize;
    let mut last = (f64::NAN, f64::INFINITY);

    for iter in 0..cfg.max_iterations {
        let mut w = op.apply(&q);
        let a = q.dot(&w);
        w.scaled_add(-a, &q);
        if let (Some(prev), Some(&b)) = (basis.last(), beta.last()) {
            w.scaled_add(-b, prev);
        }
        basis.push(q);
        alpha.push(a);
        // Two passes of classical Gram-Schmidt against the whole basis.
        for _ in 0..2 {
            for v in &basis {
                let c = v.dot(&w);
                w.scaled_add(-c, v);
            }
        }
        let b_next = w.dot(&w).sqrt();

        let theta = tridiag_max_eigenvalue(&alpha, &beta);
        let y = tridiag_eigenvector(&alpha, &beta, theta);
        let scale = theta.abs().max(f64::MIN_POSITIVE);
        let residual = b_next * y.last().copied().unwrap_or(0.0).abs() / scale;
        last = (theta, residual);

        // Krylov space exhausted: the projection is exact.
        let norm_t = alpha.iter().chain(beta.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
        if b_next <= 64.0 * f64::EPSILON * norm_t.max(f64::MIN_POSITIVE) || basis.len() == dim {
            return Ok(theta);
        }

        if (theta - prev_theta).abs() <= tol * scale {
            small_changes += 1;
        } else {
            small_changes = 0;
        }
        prev_theta = theta;

        if small_changes >= 2 && residual < residual_tol {
            let ritz = basis
                .iter()
                .zip(&y)
                .fold(Array1::<f64>::zeros(dim), |mut acc, (v, &c)| {
                    acc.scaled_add(c, v);
                    acc
                });
            let norm = ritz.dot(&ritz).sqrt();
            let mut r = op.apply(&ritz);
            r.scaled_add(-theta, &ritz);
            let explicit = r.dot(&r).sqrt() / (norm * scale);
            last.1 = explicit;
            if explicit < residual_tol {
                tracing::trace!(iter, theta, explicit, "lanczos converged");
                return Ok(theta);
            }
        }

        beta.push(b_next);
        q = w / b_next;
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_iterations,
        last: last.0,
        residual: last.1,
    })
}

/// Number of eigenvalues of the symmetric tridiagonal matrix below `x`.
fn sturm_count(alpha: &[f64], beta: &[f64], x: f64, pivmin: f64) -> usize {
    let mut count = 0;
    let mut d = 1.0;
    for (i, &a) in alpha.iter().enumerate() {
        let off = if i == 0 { 0.0 } else { beta[i - 1] * beta[i - 1] / d };
        d = a - x - off;
        if d.abs() < pivmin {
            d = -pivmin;
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Largest eigenvalue of the tridiagonal matrix with diagonal `alpha` and
/// off-diagonal `beta`, to full working precision.
fn tridiag_max_eigenvalue(alpha: &[f64], beta: &[f64]) -> f64 {
    let m = alpha.len();
    if m == 1 {
        return alpha[0];
    }
    let off = |i: usize| {
        let left = if i > 0 { beta[i - 1].abs() } else { 0.0 };
        let right = if i + 1 < m { beta[i].abs() } else { 0.0 };
        left + right
    };
    let mut lo = (0..m).map(|i| alpha[i] - off(i)).fold(f64::INFINITY, f64::min);
    let mut hi = (0..m).map(|i| alpha[i] + off(i)).fold(f64::NEG_INFINITY, f64::max);
    let bmax = beta.iter().fold(0.0f64, |acc, b| acc.max(b * b));
    let pivmin = f64::MIN_POSITIVE * bmax.max(1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(alpha, &beta[..m - 1], mid, pivmin) == m {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Unit eigenvector for an eigenvalue `theta` of the tridiagonal matrix, by
/// inverse iteration with a pivoted tridiagonal LU.
fn tridiag_eigenvector(alpha: &[f64], beta: &[f64], theta: f64) -> Vec<f64> {
    let m = alpha.len();
    if m == 1 {
        return vec![1.0];
    }
    let scale = alpha
        .iter()
        .chain(beta.iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let shift = theta + scale * 1e-14;
    let tiny = scale * f64::EPSILON * 1e-3;

    // Factor T - shift I (LAPACK gttrf layout).
    let mut dl: Vec<f64> = beta[..m - 1].to_vec();
    let mut d: Vec<f64> = alpha.iter().map(|a| a - shift).collect();
    let mut du: Vec<f64> = beta[..m - 1].to_vec();
    let mut du2 = vec![0.0; m.saturating_sub(2)];
    let mut swapped = vec![false; m - 1];
    for i in 0..m - 1 {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                d[i] = tiny;
            }
            let fact = dl[i] / d[i];
            dl[i] = fact;
            d[i + 1] -= fact * du[i];
        } else {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            dl[i] = fact;
            let temp = du[i];
            du[i] = d[i + 1];
            d[i + 1] = temp - fact * d[i + 1];
            if i + 2 < m {
                du2[i] = du[i + 1];
                du[i + 1] *= -fact;
            }
            swapped[i] = true;
        }
    }
    if d[m - 1] == 0.0 {
        d[m - 1] = tiny;
    }

    let solve = |b: &mut [f64]| {
        for i in 0..m - 1 {
            if swapped[i] {
                let temp = b[i] - dl[i] * b[i + 1];
                b[i] = b[i + 1];
                b[i + 1] = temp;
            } else {
                b[i + 1] -= dl[i] * b[i];
            }
        }
        b[m - 1] /= d[m - 1];
        b[m - 2] = (b[m - 2] - du[m - 2] * b[m - 1]) / d[m - 2];
        for i in (0..m.saturating_sub(2)).rev() {
            b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
        }
    };

    let mut y = vec![1.0 / (m as f64).sqrt(); m];
    for _ in 0..3 {
        solve(&mut y);
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            break;
        }
        y.iter_mut().for_each(|v| *v /= norm);
    }
    y
}
