use thiserror::Error;

/// Errors produced by the design, simulation and file-handling routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid polarization parameters: {0}")]
    InvalidParams(String),

    #[error("numerical degeneracy: {0}")]
    Degenerate(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("malformed codebook file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
