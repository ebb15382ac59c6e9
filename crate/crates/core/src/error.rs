use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RsnetError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("scene spec produces no primitives")]
    EmptyScene,
    #[error("cannot sample from an empty cube")]
    EmptyCube,
    #[error("point {0} received no prediction")]
    Coverage(usize),
    #[error("unsupported format version: {0}")]
    Version(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, RsnetError>;

pub(crate) fn shape_err(what: impl Into<String>) -> RsnetError {
    RsnetError::Shape(what.into())
}
