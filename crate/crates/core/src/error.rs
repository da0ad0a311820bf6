//! Error type shared by all modules.

use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A matrix expected to be positive semi-definite has an eigenvalue
    /// below `-tol * lambda_max`.
    #[error("matrix is not PSD: eigenvalue {min_eig} below tolerance (max eigenvalue {max_eig})")]
    NotPsd { min_eig: f64, max_eig: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    BadDimension { expected: usize, got: usize },

    /// The reference matrix of a Stein loss is not positive definite.
    #[error("reference matrix is not positive definite")]
    InvalidReference,

    #[error("bad argument: {0}")]
    BadArgument(String),

    /// A statistic (or a derived quantity) is undefined at the given input,
    /// e.g. an LRT with singular sample covariance.
    #[error("degenerate statistic: {0}")]
    Degenerate(String),

    #[error("insufficient samples: need at least {need}, got {got}")]
    InsufficientSamples { need: usize, got: usize },

    /// Trace-normalized statistics are undefined when `tr(S) = 0`.
    #[error("zero trace")]
    ZeroTrace,

    /// Guard against accidental huge dense allocations.
    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("index out of range")]
    BadIndex,

    #[error("unknown moment name: {0}")]
    UnknownMoment(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// `p/N` exceeds the admissible range of an inverse-moment computation.
    #[error("p/N ratio too large: {0}")]
    RatioTooLarge(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn bad_arg(msg: &str) -> Self {
        Error::BadArgument(String::from(msg))
    }

    pub(crate) fn degenerate(msg: &str) -> Self {
        Error::Degenerate(String::from(msg))
    }
}
