use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension {0}: every mode needs at least 2 Fock levels")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("cannot embed operator of dim {op_dim} on mode {mode}: {reason}")]
    Embedding {
        mode: usize,
        op_dim: usize,
        reason: String,
    },

    #[error("Fock truncation too small: tail probability {tail:.3e} above dim {dim}, need at least dim {suggested}")]
    Truncation {
        dim: usize,
        tail: f64,
        suggested: usize,
    },

    #[error("state norm {norm} deviates from 1 by more than {tolerance:e}")]
    NotNormalized { norm: f64, tolerance: f64 },

    #[error("operator is not hermitian (max asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("model expects {expected} modes, space has {found}")]
    ModeCount { expected: usize, found: usize },

    #[error("propagation failed: {0}")]
    Propagation(String),

    #[error("length mismatch: {0} states for {1} times")]
    LengthMismatch(usize, usize),

    #[error("averaging window has {0} samples, need at least {1}")]
    WindowTooShort(usize, usize),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("finite-difference step {step:e} too small relative to action {scale:e}")]
    StepUnderflow { step: f64, scale: f64 },
}
