use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("undefined result: {0}")]
    Undefined(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("support violation: {0}")]
    SupportViolation(String),
}

pub type CoreResult<T> = Result<T, CoreError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> CoreResult<T> {
    Err(CoreError::InvalidInput(msg.into()))
}
