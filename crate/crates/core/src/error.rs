use thiserror::Error;

/// Errors raised by the phase-space, dynamics and estimator modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid phase grid: {0}")]
    InvalidGrid(String),

    #[error("invalid density field: {0}")]
    InvalidField(String),

    #[error("invalid axes selection: {0}")]
    InvalidAxes(String),

    #[error("empty distribution")]
    EmptyDistribution,

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate perturbation: {0}")]
    DegeneratePerturbation(String),

    #[error("integration failure at site {site}{}", realization.map(|r| format!(" (realization {r})")).unwrap_or_default())]
    IntegrationFailure {
        site: usize,
        realization: Option<usize>,
    },

    #[error("non-finite speed on axis {axis} at cell {cell}")]
    NonFiniteSpeed { axis: usize, cell: usize },

    #[error("positivity violation at step {step}: min value {min_value:e} in cell {cell}")]
    PositivityViolation {
        step: usize,
        cell: usize,
        min_value: f64,
    },

    #[error("non-finite value in slice {slice}")]
    NonFiniteSlice { slice: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("arithmetic overflow in {0}")]
    Overflow(&'static str),

    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
