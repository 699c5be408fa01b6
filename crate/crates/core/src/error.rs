use thiserror::Error;

/// Errors raised by the consensus toolkit.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// An argument violated the operation's precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A vertex references ancestry that has not been delivered yet.
    #[error("missing dependency: {0}")]
    Dependency(String),

    /// An identifier is not known to the structure being queried.
    #[error("unknown identifier: {0}")]
    Lookup(String),

    /// The operation is not permitted in the current protocol state.
    #[error("protocol violation: {0}")]
    Protocol(String),

    /// A transaction failed ledger validation.
    #[error("validation failed: {0}")]
    Validation(String),

    /// A configuration is malformed or inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// A numerical quantity is undefined for the given input.
    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! ensure {
    ($cond:expr, $variant:ident, $($fmt:tt)+) => {
        if !($cond) {
            return Err($crate::error::Error::$variant(format!($($fmt)+)));
        }
    };
}
pub(crate) use ensure;
