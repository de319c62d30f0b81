use thiserror::Error;

/// Errors raised by the p-adic kernel and the verification modules built on it.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precision exhausted: {what} (achieved {achieved}, required {required})")]
    Precision {
        what: String,
        achieved: i64,
        required: i64,
    },

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("series tail did not stabilize: {0}")]
    Convergence(String),

    #[error("property failure: {0}")]
    PropertyFailure(String),

    #[error("unsolvable: {0}")]
    Unsolvable(String),

    #[error("model failure: {0}")]
    ModelFailure(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl LabError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        LabError::InvalidInput(msg.into())
    }

    pub fn precision(what: impl Into<String>, achieved: i64, required: i64) -> Self {
        LabError::Precision {
            what: what.into(),
            achieved,
            required,
        }
    }

    pub fn property(msg: impl Into<String>) -> Self {
        LabError::PropertyFailure(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
