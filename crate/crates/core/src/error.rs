use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the extraction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: expected {expected} samples, got {actual}")]
    Length { expected: usize, actual: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid value: {0}")]
    Validation(String),

    #[error("undefined reference: {0}")]
    UndefinedReference(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("wav error in {path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
