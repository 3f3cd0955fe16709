use std::fmt;

use liouville_core::Error;
use serde::Serialize;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_MISMATCH: i32 = 4;

/// Failure with a stable machine-readable code and process exit status.
#[derive(Debug, Clone, Serialize)]
pub struct CliError {
    #[serde(rename = "error")]
    pub code: String,
    pub message: String,
    #[serde(skip)]
    pub exit: i32,
}

impl CliError {
    pub fn config(code: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            code: code.into(),
            message: message.into(),
            exit: EXIT_CONFIG,
        }
    }

    pub fn mismatch(code: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            code: code.into(),
            message: message.into(),
            exit: EXIT_MISMATCH,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).unwrap_or_else(|_| format!("{{\"error\":\"{}\"}}", self.code))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        let (code, exit) = match &e {
            Error::InvalidParameter { name, .. } => {
                (format!("bad_{}", name.to_lowercase()), EXIT_CONFIG)
            }
            Error::InvalidGrid(_) => ("bad_grid".into(), EXIT_CONFIG),
            Error::InvalidAxes(_) => ("bad_axes".into(), EXIT_CONFIG),
            Error::LengthMismatch { .. } => ("bad_length".into(), EXIT_CONFIG),
            Error::DegeneratePerturbation(_) => ("degenerate_perturbation".into(), EXIT_CONFIG),
            Error::Overflow(_) => ("overflow".into(), EXIT_CONFIG),
            Error::EmptyDistribution => ("empty_distribution".into(), EXIT_NUMERIC),
            Error::PositivityViolation { .. } => ("positivity_violation".into(), EXIT_NUMERIC),
            Error::IntegrationFailure { .. } => ("integration_failure".into(), EXIT_NUMERIC),
            Error::NonFiniteSpeed { .. } => ("non_finite_speed".into(), EXIT_NUMERIC),
            Error::NonFiniteSlice { .. } => ("non_finite".into(), EXIT_NUMERIC),
            Error::DimensionMismatch(_) => ("grid_mismatch".into(), EXIT_MISMATCH),
            Error::InvalidField(_) | Error::Format(_) => ("bad_artifact".into(), EXIT_MISMATCH),
            Error::Io(_) => ("io_error".into(), EXIT_CONFIG),
        };
        Self {
            code,
            message,
            exit,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::config("io_error", e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
