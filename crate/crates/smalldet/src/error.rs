//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A scalar argument is outside its admissible range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Matrix or ordering dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A covariance failed the positive-semidefiniteness check.
    #[error("covariance is not positive semidefinite: {0}")]
    NotPositiveSemidefinite(String),

    /// A matrix that must be positive definite is not.
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// A query fell outside a table's grid; rebuild with a wider grid.
    #[error("out of table range: {0}")]
    OutOfRange(String),

    /// Some conditional residual variance d_k is zero, so the epsilon
    /// rescaling is undefined (Corollary hypothesis violated).
    #[error("Corollary hypothesis violated: d_{index} = 0")]
    ZeroDValue { index: usize },

    /// A covariance spec string or file failed to parse.
    #[error("spec parse error: {0}")]
    SpecParse(String),

    /// Two Monte Carlo estimates describe different experiments.
    #[error("incompatible estimates: {0}")]
    IncompatibleEstimates(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
