use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("no solution")]
    NoSolution,
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("unsupported field: {0}")]
    Field(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("parse error at {path}: {msg}")]
    Parse { path: String, msg: String },
    #[error("descent check failed: {0}")]
    Descent(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}
