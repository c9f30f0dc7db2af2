use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the estimators, solvers and data loaders.
#[derive(Debug, Error)]
pub enum SwdError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("size mismatch: {left} vs {right} points")]
    SizeMismatch { left: usize, right: usize },

    #[error("invalid distribution spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },

    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("solver failure: {0}")]
    Solver(String),
}

impl SwdError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        SwdError::InvalidInput(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        SwdError::InvalidConfig {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, SwdError>;
