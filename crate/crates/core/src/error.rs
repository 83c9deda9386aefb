use std::path::PathBuf;

/// Errors produced by the hashing library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("linearization bound c = {0} is outside (0, {max})", max = crate::mean_field::MAX_BOUND)]
    InvalidBound(f64),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("matrix is not symmetric (entry ({row}, {col}))")]
    NotSymmetric { row: usize, col: usize },

    #[error("index {index} out of range for {context} of size {len}")]
    IndexOutOfRange {
        context: &'static str,
        index: usize,
        len: usize,
    },

    #[error("linear solve residual {residual:e} exceeds tolerance {tolerance:e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },

    #[error("system is not positive definite: lambda - 2*c1*mu = {0:e} <= 0")]
    NotPositiveDefinite(f64),

    #[error("degenerate system: {0}")]
    Degenerate(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("factorization failed: {0}")]
    Factorization(&'static str),

    #[error("instance too large for exhaustive search: 2^{bits} code matrices")]
    TooLarge { bits: usize },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("no query has a relevant database item")]
    NoValidQueries,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
