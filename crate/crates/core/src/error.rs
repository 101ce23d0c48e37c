use std::path::PathBuf;

use crate::outcome::SubspaceId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("action sequence of length {len} exceeds the maximum of {max}")]
    SequenceTooLong { len: usize, max: usize },

    #[error("empty action sequence")]
    EmptySequence,

    #[error("outcome subspace mismatch: {left} vs {right}")]
    SubspaceMismatch { left: SubspaceId, right: SubspaceId },

    #[error("no memory available to resolve a goal in {0}")]
    ColdStart(SubspaceId),

    #[error("teacher `{0}` has an empty repertoire")]
    EmptyRepertoire(String),

    #[error("teacher `{teacher}` has no rule for goals in {space}")]
    NotApplicable { teacher: String, space: SubspaceId },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
