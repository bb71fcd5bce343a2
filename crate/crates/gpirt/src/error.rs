//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by data validation, sampling, scoring, and I/O.
#[derive(Debug, Error)]
pub enum GpirtError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix not positive definite ({context}): Cholesky failed up to jitter {max_jitter:e}")]
    NotPositiveDefinite { context: String, max_jitter: f64 },

    #[error("respondent '{id}' has no observed responses")]
    EmptyRespondent { id: String },

    #[error("bad response code {value:?} at (row {row}, col {col})")]
    BadCode {
        row: usize,
        col: usize,
        value: String,
    },

    #[error("duplicate id '{id}'")]
    DuplicateId { id: String },

    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),

    #[error("degenerate posterior: all grid weights are zero")]
    DegeneratePosterior,

    #[error("invalid sampler state: {0}")]
    InvalidState(String),

    #[error("theta {theta} outside grid range [{lower}, {upper}]")]
    ThetaOutOfRange { theta: f64, lower: f64, upper: f64 },

    #[error("AUC undefined: both response classes must be present")]
    UndefinedAuc,

    #[error("degenerate paired test: differences have zero variance")]
    DegenerateTest,

    #[error("could not draw a feasible holdout mask in {attempts} attempts")]
    InfeasibleMask { attempts: usize },

    #[error("grid mismatch: expected {expected} points, got {got}")]
    GridMismatch { expected: usize, got: usize },

    #[error("chain is empty")]
    EmptyChain,

    #[error("no items available for selection")]
    EmptyItemSet,

    #[error("unknown id '{id}'")]
    UnknownId { id: String },

    #[error("response oracle failed on item '{item}': {message}")]
    OracleFailure { item: String, message: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("artifact format error: {0}")]
    Format(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl GpirtError {
    /// Process exit code the CLI maps this error to: 1 for user errors
    /// (bad input, bad flags, missing files), 2 for internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            GpirtError::NotPositiveDefinite { .. }
            | GpirtError::DegeneratePosterior
            | GpirtError::InvalidState(_)
            | GpirtError::GridMismatch { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, GpirtError>;
