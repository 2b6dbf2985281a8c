//! The goodness-of-fit test for a hypothesized number of row and column
//! clusters, and the sequential selection built on it.
//!
//! For a hypothesis (K0, H0) the matrix is co-clustered, every entry is
//! standardized by its estimated block mean and std, and the largest
//! eigenvalue of the Gram matrix of the result is centered and scaled:
//! `T = (lambda1 - a) / b`. Under a correct hypothesis T is asymptotically
//! Tracy-Widom (index 1); when clusters are missing T grows like `m^(5/3)`.
//! The hypothesis is rejected when `T >= t(alpha)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cocluster::{ward_clusterer, ClusteringRequest, Clusterer};
use crate::error::{Error, Result};
use crate::estimate::{block_params, normalize};
use crate::model::{
    BlockStructure, ObservedMatrix, ScalingConstants, SelectionStep, SelectionTrace, StepError,
    TestResult,
};
use crate::spectral::{largest_gram_eigenvalue, scaling_constants, SpectralConfig};
use crate::tracy_widom::tw1_upper_quantile;

pub const DEFAULT_ALPHA: f64 = 0.01;
pub const DEFAULT_L_MAX: usize = 12;

#[derive(Clone)]
pub struct TestConfig {
    pub alpha: f64,
    /// Largest K0 + H0 visited by the sequential selection.
    pub l_max: usize,
    pub clustering: Clusterer,
    pub spectral: SpectralConfig,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            l_max: DEFAULT_L_MAX,
            clustering: ward_clusterer(),
            spectral: SpectralConfig::default(),
        }
    }
}

impl fmt::Debug for TestConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestConfig")
            .field("alpha", &self.alpha)
            .field("l_max", &self.l_max)
            .field("spectral", &self.spectral)
            .finish_non_exhaustive()
    }
}

impl TestConfig {
    pub fn with_alpha(alpha: f64) -> Self {
        Self {
            alpha,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 1e-4 && self.alpha <= 0.5) {
            return Err(Error::AlphaOutOfRange(self.alpha));
        }
        if self.l_max < 2 {
            return Err(Error::InvalidConfig(format!(
                "l_max must be at least 2, got {}",
                self.l_max
            )));
        }
        self.spectral.validate()
    }
}

/// The centered and scaled largest eigenvalue, with its ingredients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Statistic {
    #[serde(rename = "statistic_T")]
    pub t: f64,
    pub lambda1_hat: f64,
    pub scaling: ScalingConstants,
}

pub fn test_statistic(
    matrix: &ObservedMatrix,
    structure: &BlockStructure,
    spectral: &SpectralConfig,
) -> Result<Statistic> {
    let params = block_params(matrix, structure)?;
    let z = normalize(matrix, structure, &params)?;
    let lambda1_hat = largest_gram_eigenvalue(z.data.view(), spectral)?;
    let scaling = scaling_constants(matrix.n(), matrix.p());
    Ok(Statistic {
        t: (lambda1_hat - scaling.a) / scaling.b,
        lambda1_hat,
        scaling,
    })
}

fn inapplicable(e: Error) -> Error {
    match e {
        Error::DegenerateBlock { k, h, .. } => Error::Inapplicable { k, h },
        other => other,
    }
}

/// Runs the test with a block structure supplied by the caller.
pub fn gof_test_with_structure(
    matrix: &ObservedMatrix,
    structure: &BlockStructure,
    alpha: f64,
    spectral: &SpectralConfig,
) -> Result<TestResult> {
    let quantile = tw1_upper_quantile(alpha)?;
    let stat = test_statistic(matrix, structure, spectral).map_err(inapplicable)?;
    Ok(TestResult::new(stat.lambda1_hat, stat.scaling, alpha, quantile))
}

/// Tests the hypothesis that the matrix has `k0` row and `h0` column clusters.
pub fn gof_test(matrix: &ObservedMatrix, k0: usize, h0: usize, cfg: &TestConfig) -> Result<TestResult> {
    cfg.validate()?;
    let structure = (cfg.clustering)(&ClusteringRequest { matrix, k0, h0 })?;
    structure.check_dims(matrix.n(), matrix.p())?;
    if structure.k() != k0 || structure.h() != h0 {
        return Err(Error::InvalidStructure(format!(
            "clustering returned {}x{} clusters for hypothesis ({k0},{h0})",
            structure.k(),
            structure.h()
        )));
    }
    gof_test_with_structure(matrix, &structure, cfg.alpha, &cfg.spectral)
}

/// Hypotheses in test order: K0 + H0 = 2, 3, ..., `l_max`, and within each
/// level K0 ascending.
pub fn scan_order(l_max: usize) -> impl Iterator<Item = (usize, usize)> {
    (2..=l_max).flat_map(|level| (1..level).map(move |k0| (k0, level - k0)))
}

/// Tests hypotheses in [`scan_order`] and selects the first one not rejected.
///
/// Steps whose test is inapplicable or fails count as rejections; their
/// error is kept in the trace.
pub fn sequential_select(matrix: &ObservedMatrix, cfg: &TestConfig) -> Result<SelectionTrace> {
    cfg.validate()?;
    let limit = matrix.n().min(matrix.p()) + 1;
    if cfg.l_max > limit {
        return Err(Error::InvalidConfig(format!(
            "l_max {} exceeds min(n, p) + 1 = {limit}",
            cfg.l_max
        )));
    }
    let mut steps = Vec::new();
    for (k0, h0) in scan_order(cfg.l_max) {
        let step = match gof_test(matrix, k0, h0, cfg) {
            Ok(result) => SelectionStep {
                k0,
                h0,
                result: Some(result),
                error: None,
            },
            Err(e) => {
                tracing::debug!(k0, h0, error = %e, "hypothesis could not be tested");
                SelectionStep {
                    k0,
                    h0,
                    result: None,
                    error: Some(StepError::from(&e)),
                }
            }
        };
        let accepted = step.accepted();
        steps.push(step);
        if accepted {
            return Ok(SelectionTrace {
                steps,
                selected: Some((k0, h0)),
                exhausted: false,
            });
        }
    }
    Ok(SelectionTrace {
        steps,
        selected: None,
        exhausted: true,
    })
}
