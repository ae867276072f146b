//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not positive definite (pivot {pivot:.3e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("state became non-finite at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("open-loop solver did not converge: {unconverged} of {total} trajectories above tolerance")]
    NotConverged { unconverged: usize, total: usize },

    #[error("training diverged: loss became non-finite at step {step}")]
    DivergedTraining { step: usize },

    #[error("unsupported task kind for operator inference: {0}")]
    UnsupportedTaskKind(String),

    #[error("operator network is bound to a different basis set")]
    BasisMismatch,

    #[error("file format/version mismatch: {0}")]
    FormatVersionMismatch(String),

    #[error("checksum verification failed for {0}")]
    ChecksumFailure(String),

    #[error("file is truncated: {0}")]
    TruncatedFile(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
