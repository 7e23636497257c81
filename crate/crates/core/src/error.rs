//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

use crate::schema::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The document is not well-formed JSON.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// The document is well-formed but does not match the parameter schema.
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    /// Parameters failed validation and cannot be used.
    #[error("parameters failed validation: {0}")]
    Validation(ValidationReport),

    #[error("constraint error: {0}")]
    Constraint(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("provider error ({provider}): {message}")]
    Provider { provider: String, message: String },

    /// Provider output could not be turned into a transcript, even after repair.
    #[error("could not parse provider output: {message}")]
    OutputParse { message: String, raw: String },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("cosine similarity is undefined for a zero vector")]
    UndefinedSimilarity,

    #[error("integrity check failed: {0}")]
    Integrity(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn provider(provider: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Provider {
            provider: provider.into(),
            message: message.into(),
        }
    }
}
