use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed or inconsistent input (dimension mismatch, non-finite values, bad parameters).
    #[error("invalid input: {0}")]
    Input(String),

    /// The requested operation is not defined for the given loss or kernel.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// A numerical post-check failed.
    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
