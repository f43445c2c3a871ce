use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed model or configuration.
    #[error("validation error: {0}")]
    Validation(String),
    /// Argument outside the mathematical domain of a function.
    #[error("domain error: {0}")]
    Domain(String),
    /// A computation would exceed its configured resource cap.
    #[error("capacity error: {what} needs {required}, cap is {cap}")]
    Capacity {
        what: &'static str,
        required: u64,
        cap: u64,
    },
    /// The requested asymptotic regime does not apply to the inputs.
    #[error("regime error: {0}")]
    Regime(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn regime(msg: impl Into<String>) -> Self {
        Error::Regime(msg.into())
    }
}
