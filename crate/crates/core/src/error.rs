use std::fmt;

use thiserror::Error;

/// One offending field of a configuration document.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Issue {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or inconsistent configuration (shot-noise domain too small,
    /// too few inner samples, unknown tags, ...).
    #[error("configuration error: {0}")]
    Config(String),
    /// A structured validation failure listing every offending field.
    #[error("validation failed: {}", .0.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; "))]
    Validation(Vec<Issue>),
    /// A level or point outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// Degenerate model (e.g. zero variance).
    #[error("model error: {0}")]
    Model(String),
    /// The model does not support the requested operation.
    #[error("capability error: {0}")]
    Capability(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Whether the error stems from the user's configuration rather than a
    /// failure while running.
    pub fn is_configuration(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Validation(_)
                | Error::Domain(_)
                | Error::Model(_)
                | Error::Capability(_)
                | Error::Json(_)
        )
    }
}

/// Failure while evaluating a field realization at a point.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum FieldError {
    #[error("field is singular at {0:?}")]
    Singular(Vec<f64>),
    #[error("point {point:?} lies outside the evaluation domain ({reason})")]
    OutOfDomain { point: Vec<f64>, reason: String },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
