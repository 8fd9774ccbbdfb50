use thiserror::Error;

/// Errors raised by constructors and operations of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("dimension must be at least {min}, got {dim}")]
    DimensionTooSmall { dim: usize, min: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix of shape {rows}x{cols} is not {expected}")]
    Shape {
        rows: usize,
        cols: usize,
        expected: String,
    },

    #[error("{what} violated: residual {residual:.3e} exceeds tolerance {tol:.1e}")]
    Invariant {
        what: &'static str,
        residual: f64,
        tol: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("malformed circuit: {0}")]
    MalformedCircuit(String),

    #[error("json: {0}")]
    Json(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}
