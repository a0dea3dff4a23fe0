use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid measurement direction: {0}")]
    InvalidDirection(String),
    #[error("invalid POVM: {0}")]
    InvalidPovm(String),
    #[error("invalid operator: {0}")]
    InvalidOperator(String),
    #[error("zero-probability branch (p = {0:e}); post-measurement state undefined")]
    ZeroProbabilityBranch(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(String),
    #[error("basis error: {0}")]
    Basis(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numerical cross-check failed: {0}")]
    Inconsistent(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
