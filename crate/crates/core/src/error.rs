use thiserror::Error;

/// Errors raised by the identification, certification and control routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("trajectory too short: {len} inputs, need at least {required}")]
    TrajectoryTooShort { len: usize, required: usize },

    #[error("inconsistent trajectory: {inputs} inputs but {outputs} outputs")]
    InconsistentTrajectory { inputs: usize, outputs: usize },

    #[error("cannot merge datasets with (order, delay) {left:?} and {right:?}")]
    IncompatibleDatasets {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("empty dataset")]
    EmptyDataset,

    #[error(
        "Gram matrix is not positive definite after jitter {max_jitter:e} \
         (N = {size}, min diagonal {min_diagonal:e}, max diagonal {max_diagonal:e})"
    )]
    Factorization {
        size: usize,
        max_jitter: f64,
        min_diagonal: f64,
        max_diagonal: f64,
    },

    #[error("RKHS norm estimate is only defined for pure interpolation (lambda = 0), got lambda = {0}")]
    RegularizedNorm(f64),

    #[error("empty hyperparameter grid")]
    EmptyGrid,

    #[error("negative argument {0} for a class-K function")]
    NegativeArgument(f64),

    #[error("gamma_y is only defined for relative degree one")]
    WrongDelay,

    #[error("bracket for gamma inverse at r = {0} did not close; gamma is not class K-infinity")]
    BracketGrowth(f64),

    #[error("infeasible input u = {input} at augmented state {state:?}: {reason}")]
    InfeasibleInput {
        input: f64,
        state: Vec<f64>,
        reason: String,
    },

    #[error("controller inconsistency: {0}")]
    Inconsistent(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
