use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid partition: {0}")]
    Partition(String),

    #[error("unsupported query: {0}")]
    UnsupportedQuery(String),

    #[error("reconstruction failed: {0}")]
    Reconstruction(String),

    #[error("inconsistent oracle: {reason} (residual {residual:e}, threshold {threshold:e})")]
    InconsistentOracle {
        reason: String,
        residual: f64,
        threshold: f64,
    },

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("map is not completely positive: minimal Choi eigenvalue {min_eigenvalue}")]
    NotCompletelyPositive { min_eigenvalue: f64 },

    #[error("invalid setting: {0}")]
    InvalidSetting(String),

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
