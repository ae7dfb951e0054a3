use thiserror::Error;

use crate::privacy::SafetyViolation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Safety(#[from] SafetyViolation),

    #[error("value {value} is outside the domain of {what}")]
    Domain { what: &'static str, value: f64 },

    #[error("nothing to {0}")]
    Empty(&'static str),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("noisy max requires a dataset with stability 1, got {0}")]
    Stability(u64),

    #[error("continuation expected {expected}, got {found}")]
    TypeMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("plan requires epsilon = {required} but the budget cap is {cap}")]
    BudgetExceeded { required: f64, cap: f64 },

    #[error("execution failed: {0}")]
    Execution(String),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
