use thiserror::Error;

/// Errors raised by model construction, estimation and certificate assembly.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("non-finite gradient at draw {index} (point {point:?})")]
    NonFiniteGradient { index: usize, point: Vec<f64> },

    #[error("Newton solver did not converge in {iterations} iterations (gradient norm {grad_norm:e})")]
    NotConverged { iterations: usize, grad_norm: f64 },

    #[error("Hessian of the log density is not negative definite at {point:?}")]
    NotNegativeDefinite { point: Vec<f64> },

    #[error("bound is vacuous: {0}")]
    VacuousBound(String),

    #[error("no certificate: {0}")]
    NoCertificate(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("inverse CDF is not monotone near u = {u:e}")]
    NonMonotoneQuantile { u: f64 },

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
