use thiserror::Error;

use crate::solver::SolveTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid cone: {0}")]
    InvalidCone(String),

    #[error("non-finite {what} at x = {x:?}")]
    NonFinite { what: &'static str, x: Vec<f64> },

    #[error("NaN entry in subproblem matrix")]
    NanInSubproblem,

    #[error("zero displacement: Barzilai-Borwein scalars need x_k != x_(k-1)")]
    ZeroDisplacement,

    #[error("line search failed after {trials} trials (last step {last_step:e})")]
    LineSearchFailed { trials: usize, last_step: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("non-finite iterate after {} iterations", .trace.iterations)]
    NonFiniteIterate { trace: Box<SolveTrace> },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("empty grid")]
    EmptyGrid,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors caused by the user's configuration rather than a run.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Unknown { .. } | Error::InvalidCone(_))
    }
}
