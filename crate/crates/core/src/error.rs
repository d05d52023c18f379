use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("I/O error on {path}: {source}")]
    IoAt { path: PathBuf, source: io::Error },

    #[error("line {line}: malformed record: {message}")]
    MalformedRecord { line: usize, message: String },

    #[error("duplicate document id {0:?}")]
    DuplicateId(String),

    /// Arguments outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Input artifacts disagree with each other (counts, nesting, membership).
    #[error("data inconsistency: {0}")]
    Inconsistent(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("incompatible artifact {what}: {message}")]
    Incompatible { what: String, message: String },

    #[error("{what}, line {line}: {message}")]
    Parse {
        what: String,
        line: usize,
        message: String,
    },

    #[error("splitting did not terminate: factor {factor} fell below floor {floor} at level {level} (largest cluster {largest})")]
    NonTermination {
        factor: f64,
        floor: f64,
        level: usize,
        largest: usize,
    },
}

impl Error {
    pub(crate) fn at(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Error {
        let path = path.into();
        move |source| Error::IoAt { path, source }
    }

    pub(crate) fn parse(what: &str, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            what: what.to_string(),
            line,
            message: message.into(),
        }
    }
}
