use thiserror::Error;

use crate::oracle::OracleResult;

/// Errors raised across the crate. Each variant maps onto one CLI exit code.
#[derive(Debug, Error)]
pub enum FacError {
    #[error("dimension mismatch: expected {expected}-d point, got {got}-d")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty profile")]
    EmptyProfile,

    #[error("invalid input: {0}")]
    Input(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("solver did not converge: {message}")]
    Solver {
        message: String,
        best: Box<OracleResult>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl FacError {
    pub fn input(msg: impl Into<String>) -> Self {
        FacError::Input(msg.into())
    }

    /// Process exit code for this error: 3 for solver failures, 2 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            FacError::Solver { .. } => 3,
            _ => 2,
        }
    }

    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            FacError::DimensionMismatch { .. } => "dimension_mismatch",
            FacError::EmptyProfile => "empty_profile",
            FacError::Input(_) => "invalid_input",
            FacError::Unsupported(_) => "unsupported",
            FacError::Parse { .. } => "parse_error",
            FacError::Solver { .. } => "solver_error",
            FacError::Io(_) => "io_error",
        }
    }
}

impl From<serde_json::Error> for FacError {
    fn from(e: serde_json::Error) -> Self {
        FacError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, FacError>;
