use alloc::string::String;

/// Errors raised by the algorithmic core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A topology or rule set references something that does not exist.
    #[error("integrity error: {0}")]
    Integrity(String),
    /// An argument violates an operation's precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// A scenario or engine configuration is unusable.
    #[error("configuration error: {0}")]
    Config(String),
    /// A wire message could not be decoded.
    #[error("codec error: {0}")]
    Codec(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
