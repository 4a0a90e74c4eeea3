use thiserror::Error;

/// Errors produced by structure construction and the analyses built on it.
#[derive(Debug, Error)]
pub enum Error {
    #[error("time index {time} outside schedule range 0..={max}")]
    Range { time: usize, max: usize },

    #[error("unknown cell label `{0}`")]
    UnknownCell(String),

    #[error("invalid input: {0}")]
    Validation(String),

    /// A computation guard (path-space, dimension or enumeration size) was hit.
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Parse {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}
