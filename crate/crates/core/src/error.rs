use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{name} = {value} is outside its domain: {expected}")]
    Domain {
        name: &'static str,
        value: f64,
        expected: String,
    },

    #[error("invalid block policy: {0}")]
    Policy(String),

    #[error("exact enumeration supports block lengths up to {max}, got {got}; use the Monte-Carlo simulator instead")]
    EnumerationTooLarge { got: usize, max: usize },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("frontier is empty")]
    EmptyFrontier,
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

pub(crate) fn domain(name: &'static str, value: f64, expected: impl Into<String>) -> ModelError {
    ModelError::Domain {
        name,
        value,
        expected: expected.into(),
    }
}
