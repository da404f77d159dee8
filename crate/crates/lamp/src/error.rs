//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of its documented range.
    #[error("invalid configuration: field `{field}`: {message}")]
    Config { field: String, message: String },

    /// Tensor shapes do not conform.
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    /// A linear solve has no unique solution.
    #[error("singular system: {0}")]
    Singular(String),

    /// A guard against accidentally materializing a huge dense matrix.
    #[error("dense oracle refused: input dimension {dim} exceeds limit {limit}")]
    DenseGuard { dim: usize, limit: usize },

    /// A sampler produced a non-finite value.
    #[error("non-finite value at reverse step {step} (t = {t})")]
    NonFinite { step: usize, t: usize },

    /// Verification suite failure (used by the front-end for exit codes).
    #[error("verification failed: {0}")]
    Verification(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// Malformed tensor file.
    #[error("tensor format error: {0}")]
    TensorFormat(String),
}

impl Error {
    pub fn config(field: &str, message: impl Into<String>) -> Self {
        Error::Config { field: field.to_string(), message: message.into() }
    }

    pub fn shape(expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::Shape { expected: expected.into(), got: got.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
