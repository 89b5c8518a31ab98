//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by parsing, validation, numerics, and the harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input record or stream.
    #[error("parse error: {0}")]
    Parse(String),

    /// A domain invariant was violated.
    #[error("validation error: {0}")]
    Validation(String),

    /// Matrix or vector shapes disagree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A required translation, score, dataset, or fixture is missing.
    #[error("missing input: {0}")]
    Missing(String),

    /// Numerical failure (degenerate embedding, non-finite loss, ...).
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Attach a file path to a raw I/O error.
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for errors caused by bad user input (flags, config, malformed
    /// data) as opposed to failures while executing.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Parse(_) | Error::Validation(_) | Error::Dimension(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
