use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("line count mismatch: {src_path} has {src_lines} lines, {tgt_path} has {tgt_lines}")]
    LineCountMismatch {
        src_path: PathBuf,
        tgt_path: PathBuf,
        src_lines: usize,
        tgt_lines: usize,
    },

    #[error("cannot hold out {requested} pairs from a corpus of {available}")]
    InsufficientData { requested: usize, available: usize },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("sentence pair has an empty side")]
    EmptyPair,

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("count mismatch: {0}")]
    CountMismatch(String),

    #[error("sentence at line {line_no} has zero probability under the model")]
    ZeroProbability { line_no: usize },

    #[error("http error: {0}")]
    Http(String),

    #[error("malformed response: {0}")]
    MalformedResponse(String),

    #[error("{method} requires a {component}")]
    MissingComponent {
        method: &'static str,
        component: &'static str,
    },

    #[error("reserved tag token {token:?} occurs in corpus text at line {line_no}")]
    TagTokenCollision { token: String, line_no: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
