use thiserror::Error;

/// Errors produced by the determinant and trace computations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value at {index}")]
    Evaluation { index: String },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("Fourier index {index} aliases on a grid of {grid} samples (need |l| < {grid}/2)")]
    Aliasing { index: i64, grid: usize },

    #[error("feasibility guard: {what} needs {count} entries, limit is {limit}")]
    Feasibility { what: String, count: u128, limit: u128 },

    #[error("unknown identifier: {0}")]
    Lookup(String),

    #[error("invalid model: {0}")]
    Model(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("invalid field `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation { field: field.into(), message: message.into() }
    }
}
