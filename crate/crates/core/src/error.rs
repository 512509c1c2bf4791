use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("row {0} has no observed entries")]
    EmptyRow(usize),

    #[error("column {0} has no observed entries")]
    EmptyColumn(usize),

    #[error("{what} is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { what: &'static str, min_eigenvalue: f64 },

    #[error("n*p = {size} exceeds the dense Kronecker cap of {cap}")]
    KroneckerCap { size: usize, cap: usize },

    #[error("{missing} missing cells exceed the conditional-covariance cap of {cap}; use the one-step imputer")]
    CrossCap { missing: usize, cap: usize },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { what: &'static str, iterations: usize, residual: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("could not draw a valid missingness mask after {0} attempts")]
    MaskRetries(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
