use thiserror::Error;

use crate::spin::Axis;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("basis mismatch: operator in {op} basis, state in {state} basis")]
    BasisMismatch { op: Axis, state: Axis },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("numerical failure: {0}")]
    NonConvergence(String),

    #[error("steady state is not unique: null space has dimension {dim}")]
    DegenerateNullSpace { dim: usize },

    #[error("Fock cutoff {cutoff} inadequate: top-level population {population:.3e}")]
    CutoffInadequate { cutoff: usize, population: f64 },

    #[error("step size {dt} too large: dt * max|rhs| = {product:.3e} exceeds 0.1")]
    StepTooLarge { dt: f64, product: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
