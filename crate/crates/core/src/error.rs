use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in `{op}`: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("tape already consumed by a backward pass")]
    TapeConsumed,

    #[error("backward requires a scalar loss, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },

    #[error("out of bounds: {context}")]
    OutOfBounds { context: String },

    #[error("invalid argument: {context}")]
    InvalidArg { context: String },

    #[error("validation error: {detail}")]
    Validation { detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: bad format: {detail}")]
    Format { path: PathBuf, detail: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Format { path: path.into(), detail: detail.into() }
    }

    pub fn invalid(context: impl Into<String>) -> Self {
        Error::InvalidArg { context: context.into() }
    }

    pub fn validation(detail: impl Into<String>) -> Self {
        Error::Validation { detail: detail.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
