use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown operator `{op}` at {line}:{column}")]
    UnknownOperator {
        op: String,
        line: usize,
        column: usize,
    },

    #[error("formula `{formula}` is {found}, expected {expected}")]
    Classification {
        formula: String,
        found: String,
        expected: String,
    },

    #[error("invalid mission: {0}")]
    Mission(String),

    #[error("malformed model: {0}")]
    Model(String),

    #[error("value iteration did not converge within {iterations} iterations (last delta {delta:e})")]
    Divergence { iterations: usize, delta: f64 },

    #[error("unsupported model: {0}")]
    Unsupported(String),

    #[error("state space of {size} states exceeds the ceiling of {ceiling}")]
    CeilingExceeded { size: u128, ceiling: u128 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Divergence { .. } | Error::Unsupported(_) => 2,
            Error::CeilingExceeded { .. } => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
