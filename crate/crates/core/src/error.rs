//! Error types shared by the whole crate.

use thiserror::Error;

/// Crate-wide error type. The variants map onto the CLI exit-code
/// categories: validation (2), I/O and corrupt files (3), numeric (4).
#[derive(Debug, Error)]
pub enum Error {
    /// Inputs violate a documented precondition or invariant.
    #[error("validation: {0}")]
    Validation(String),

    /// Filesystem or serialization failure while persisting artifacts.
    #[error("persistence: {0}")]
    Persistence(String),

    /// A stored artifact exists but its contents are inconsistent.
    #[error("corrupt file: {0}")]
    CorruptFile(String),

    /// A computation produced non-finite or otherwise unusable values.
    #[error("numeric: {0}")]
    Numeric(String),
}

impl Error {
    /// Exit code for the CLI: 2 validation, 3 I/O, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) => 2,
            Error::Persistence(_) | Error::CorruptFile(_) => 3,
            Error::Numeric(_) => 4,
        }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn corrupt(msg: impl Into<String>) -> Self {
        Error::CorruptFile(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Persistence(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Persistence(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
