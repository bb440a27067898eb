use std::fmt;

use rsgrowth_core::bellman::BellmanError;
use rsgrowth_core::model::ModelError;
use serde::Serialize;

/// Exit status for configuration problems.
pub const EXIT_CONFIG: u8 = 2;
/// Exit status for failed checks and runtime failures.
pub const EXIT_FAILED: u8 = 1;

/// An error with a machine-readable code and the process exit status it maps to.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub code: String,
    pub message: String,
    pub exit_code: u8,
}

impl Failure {
    pub fn config(code: &str, message: impl Into<String>) -> Self {
        Self {
            code: code.to_string(),
            message: message.into(),
            exit_code: EXIT_CONFIG,
        }
    }

    pub fn failed(code: &str, message: impl Into<String>) -> Self {
        Self {
            code: code.to_string(),
            message: message.into(),
            exit_code: EXIT_FAILED,
        }
    }

    pub fn model(e: ModelError) -> Self {
        Self::config(e.code(), e.to_string())
    }

    pub fn solver(e: BellmanError) -> Self {
        match e {
            BellmanError::Model(m) => Self::model(m),
            other => Self::failed(other.code(), other.to_string()),
        }
    }

    /// `{"error": {...}}` as printed on stderr.
    pub fn document(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for Failure {}
