use thiserror::Error;

use crate::models::VerificationError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("budget {budget} outside of [0, {max}]")]
    BudgetOutOfRange { budget: usize, max: usize },

    #[error("invalid model: {0}")]
    Model(String),

    #[error("no solver backend available: {0}")]
    BackendMissing(String),

    #[error("solver backend failed: {0}")]
    BackendCrash(String),

    /// The backend returned an assignment that violates the model it was given.
    #[error("solver returned an infeasible assignment: `{constraint}` violated by {violation:e}")]
    SolutionCheck { constraint: String, violation: f64 },

    #[error("solver result carries no assignment (status {0})")]
    NoSolution(String),

    #[error("solution verification failed: {0}")]
    Verification(#[from] VerificationError),

    #[error("{what} has size {actual}, limit is {limit}")]
    SizeGuard {
        what: &'static str,
        limit: usize,
        actual: usize,
    },
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        match e.classify() {
            serde_json::error::Category::Io => Error::Io(e.into()),
            _ => Error::Parse(e.to_string()),
        }
    }
}
