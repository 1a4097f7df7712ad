use thiserror::Error;

/// Errors produced by the library and surfaced by the CLI.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A numeric argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inputs that are individually valid but cannot be combined.
    #[error("usage error: {0}")]
    Usage(String),

    /// Malformed text input. Line numbers are 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A request beyond what the exhaustive or dense routines support.
    #[error("capability error: {0}")]
    Capability(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}
