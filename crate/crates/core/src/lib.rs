//! Goodness-of-fit testing for latent block models.
//!
//! Given an observed matrix and a hypothesized number of row and column
//! clusters, the matrix is co-clustered, standardized block by block, and the
//! largest eigenvalue of the resulting Gram matrix is compared with the
//! Tracy-Widom (index 1) distribution. Testing hypotheses in increasing order
//! of total cluster count yields a selection procedure for the block structure.
//!
//! ```
//! use lbm_gof::{generate, gof_test, presets, Family, GeneratorSpec, TestConfig};
//!
//! let spec = GeneratorSpec {
//!     family: Family::Gaussian,
//!     params: presets::paper_4x3(Family::Gaussian),
//!     n: 120,
//!     p: 90,
//!     seed: 1,
//! };
//! let (matrix, _truth) = generate(&spec).unwrap();
//! let result = gof_test(&matrix, 1, 1, &TestConfig::default()).unwrap();
//! assert!(result.reject);
//! ```

pub mod cocluster;
pub mod error;
pub mod estimate;
pub mod experiments;
pub mod generator;
pub mod gof;
pub mod io;
pub mod model;
pub mod rng;
pub mod spectral;
pub mod tracy_widom;

pub use cocluster::{align_labels, ward_clusterer, ward_cocluster, Alignment, Clusterer, ClusteringRequest};
pub use error::{Error, Result};
pub use estimate::{block_params, estimate, normalize, EstimationResult};
pub use generator::{generate, interpolate_means, presets, Family, GeneratorSpec};
pub use gof::{gof_test, gof_test_with_structure, scan_order, sequential_select, test_statistic, TestConfig};
pub use model::{
    BlockParams, BlockStructure, NormalizedMatrix, ObservedMatrix, ScalingConstants, SelectionStep,
    SelectionTrace, StepError, TestResult,
};
pub use spectral::{max_eigenvalue, scaling_constants, SpectralConfig};
pub use tracy_widom::{tw1_cdf, tw1_upper_quantile, Tw1Table};
