use thiserror::Error;

/// Failures raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("hypothesis violated: {0}")]
    Hypothesis(&'static str),
    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("non-finite value produced")]
    NonFinite,
}

pub type Result<T> = core::result::Result<T, Error>;
