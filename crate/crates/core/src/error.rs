use std::path::PathBuf;

use crate::scenario::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A model was evaluated outside the region where it is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{path}: line {line}, column {column}: {message}")]
    Syntax {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: unknown key `{key}`")]
    UnknownKey { path: String, key: String },

    #[error("invalid scenario:\n{0}")]
    Invalid(ValidationReport),

    #[error("trace line {line}: {message}")]
    Trace { line: u64, message: String },

    #[error("non-finite value in `{0}` output")]
    NonFinite(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
