//! Harness errors, mapped onto process exit codes.

use thiserror::Error;

/// Exit codes: 0 success, 1 check failure, 2 config error, 3 runtime
/// failure.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(String),
    #[error("check failure: {0}")]
    CheckFailed(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("runtime failure: {0}")]
    Runtime(String),
}

impl LabError {
    pub fn exit_code(&self) -> u8 {
        match self {
            LabError::Config(_) => 2,
            LabError::CheckFailed(_) => 1,
            LabError::Io(_) | LabError::Runtime(_) => 3,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        LabError::Config(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        LabError::Runtime(msg.into())
    }
}

impl From<ofmu_core::CoreError> for LabError {
    fn from(e: ofmu_core::CoreError) -> Self {
        LabError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for LabError {
    fn from(e: serde_json::Error) -> Self {
        LabError::Runtime(format!("json: {e}"))
    }
}

impl From<csv::Error> for LabError {
    fn from(e: csv::Error) -> Self {
        LabError::Runtime(format!("csv: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
