use otto_core::CoreError;
use thiserror::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_OTHER: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_VALIDATION: u8 = 3;
pub const EXIT_SUPPORT_VIOLATION: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("support violation: {0}")]
    SupportViolation(String),
}

pub fn usage<T>(msg: impl Into<String>) -> anyhow::Result<T> {
    Err(CliError::Usage(msg.into()).into())
}

/// Exit status for an error chain: the first typed cause decides.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CliError>() {
            return match e {
                CliError::Usage(_) => EXIT_USAGE,
                CliError::Validation(_) => EXIT_VALIDATION,
                CliError::SupportViolation(_) => EXIT_SUPPORT_VIOLATION,
            };
        }
        if let Some(e) = cause.downcast_ref::<CoreError>() {
            return match e {
                CoreError::InvalidInput(_) => EXIT_USAGE,
                CoreError::SupportViolation(_) => EXIT_SUPPORT_VIOLATION,
                CoreError::Undefined(_) | CoreError::Precondition(_) => EXIT_OTHER,
            };
        }
        if cause.downcast_ref::<toml::de::Error>().is_some() {
            return EXIT_USAGE;
        }
    }
    EXIT_OTHER
}
