use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the core library.
#[derive(Debug, Error)]
pub enum IgpoError {
    /// A configuration value is out of range or inconsistent with another.
    #[error("invalid configuration `{key}`: {reason}")]
    Config { key: String, reason: String },

    /// No relation chain of the requested length resolves in the knowledge base.
    #[error("no chain of length {hops} exists in the knowledge base")]
    NoChain { hops: usize },

    /// Advantage or rollout containers disagree in shape.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A serialized artifact could not be decoded.
    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl IgpoError {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        IgpoError::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IgpoError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(what: &'static str, reason: impl Into<String>) -> Self {
        IgpoError::Format {
            what,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = IgpoError> = std::result::Result<T, E>;
