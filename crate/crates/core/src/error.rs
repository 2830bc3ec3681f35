use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by rankforge.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation's precondition (length mismatch, empty query, bad index, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Malformed input text, with the 1-based line number where it was detected.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Model file written by an incompatible format version.
    #[error("unsupported model format version {found} (this build reads version {expected})")]
    Version { found: String, expected: String },

    /// Incompatible or out-of-range configuration.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn contract(message: impl Into<String>) -> Self {
        Error::Contract(message.into())
    }

    pub(crate) fn config(message: impl Into<String>) -> Self {
        Error::Config(message.into())
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
