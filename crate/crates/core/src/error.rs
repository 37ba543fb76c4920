use alloc::string::String;
use core::fmt;

/// Errors raised by the engine.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Input violates a documented precondition.
    Invalid(String),
    /// A numeric routine failed to converge or produced a non-finite value.
    Numeric(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Invalid(m) => write!(f, "invalid input: {m}"),
            Error::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
