use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the library.
///
/// Row, column and cluster positions carried by the variants are 1-based,
/// matching the external file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite entry at row {row}, column {col}")]
    NonFiniteEntry { row: usize, col: usize },

    #[error("degenerate shape {n}x{p}: at least 2 rows and 2 columns are required")]
    DegenerateShape { n: usize, p: usize },

    #[error("invalid block structure: {0}")]
    InvalidStructure(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),

    #[error("cannot form {k0}x{h0} clusters from a {n}x{p} matrix")]
    TooManyClusters {
        k0: usize,
        h0: usize,
        n: usize,
        p: usize,
    },

    #[error("exhaustive label alignment supports at most 8 clusters per axis, got K={k}, H={h}")]
    TooManyClustersForExhaustiveAlignment { k: usize, h: usize },

    #[error("block ({k},{h}) has standard deviation {std:e}; the normalized matrix is undefined")]
    DegenerateBlock { k: usize, h: usize, std: f64 },

    #[error("test inapplicable: estimated block ({k},{h}) is constant")]
    Inapplicable { k: usize, h: usize },

    #[error(
        "eigenvalue iteration did not converge after {iterations} steps \
         (last estimate {last}, relative residual {residual:e})"
    )]
    NoConvergence {
        iterations: usize,
        last: f64,
        residual: f64,
    },

    #[error("significance level {0} is outside the supported range")]
    AlphaOutOfRange(f64),

    #[error("invalid Tracy-Widom table: {0}")]
    InvalidTable(String),

    #[error("empty sample")]
    EmptySample,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable name of the variant, used in JSON records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonFiniteEntry { .. } => "NonFiniteEntry",
            Error::DegenerateShape { .. } => "DegenerateShape",
            Error::InvalidStructure(_) => "InvalidStructure",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::InvalidParams(_) => "InvalidParams",
            Error::TooManyClusters { .. } => "TooManyClusters",
            Error::TooManyClustersForExhaustiveAlignment { .. } => {
                "TooManyClustersForExhaustiveAlignment"
            }
            Error::DegenerateBlock { .. } => "DegenerateBlock",
            Error::Inapplicable { .. } => "Inapplicable",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::AlphaOutOfRange(_) => "AlphaOutOfRange",
            Error::InvalidTable(_) => "InvalidTable",
            Error::EmptySample => "EmptySample",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Parse(_) => "Parse",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}
