use thiserror::Error;

/// Errors produced by pulse construction, spin dynamics, and optimization.
#[derive(Debug, Error)]
pub enum Error {
    #[error("spin quantum number {0} is not a positive half-integer")]
    InvalidSpin(f64),

    #[error("spin {0} is not supported here: {1}")]
    UnsupportedSpin(f64, &'static str),

    #[error("invalid parameter `{field}`: {message}")]
    InvalidParameter { field: &'static str, message: String },

    #[error("dimension mismatch: {context} ({left} vs {right})")]
    DimensionMismatch { context: &'static str, left: usize, right: usize },

    #[error("matrix is not Hermitian (deviation {deviation:.3e} exceeds tolerance {tolerance:.3e})")]
    NotHermitian { deviation: f64, tolerance: f64 },

    #[error("ensemble is empty")]
    EmptyEnsemble,

    #[error("ensemble weights sum to {0}, expected 1")]
    UnnormalizedWeights(f64),

    #[error("non-finite {what} encountered at iteration {iteration}: {detail}")]
    NonFinite { what: &'static str, iteration: usize, detail: String },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
