//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by copula evaluation, fitting, sampling, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or argument lies outside its admissible domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A correlation matrix failed its positive-definiteness check.
    #[error("matrix is not positive definite: {0}")]
    SingularMatrix(String),

    /// An iterative routine exhausted its budget without converging.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// An optimizer was handed a starting point that violates constraints.
    #[error("infeasible start: {0}")]
    InfeasibleStart(String),

    /// A likelihood or density evaluation produced a non-finite value.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// Malformed or inconsistent input data.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Convenient alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
