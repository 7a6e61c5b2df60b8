use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix has no entries ({rows}x{cols})")]
    EmptyMatrix { rows: usize, cols: usize },

    #[error("matrix is identically zero")]
    ZeroMatrix,

    #[error("entry ({row}, {col}) is zero")]
    ZeroEntry { row: usize, col: usize },

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("index ({row}, {col}) out of bounds for a {rows}x{cols} matrix")]
    IndexOutOfBounds {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("no convergence after {iterations} iterations (best estimate {estimate})")]
    NoConvergence { iterations: usize, estimate: f64 },

    #[error("dense SVD limited to min(m, n) <= {limit}, got {min_dim}")]
    TooLargeForDense { min_dim: usize, limit: usize },

    #[error("rank {k} outside 1..={max}")]
    RankTooLarge { k: usize, max: usize },

    #[error("alpha = {0} is outside (0, 1]")]
    AlphaOutOfRange(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("stream has no nonzero entries")]
    EmptyStream,

    #[error("column {col} is not centered (mean {mean:e}, std {std:e})")]
    NotCentered { col: usize, mean: f64, std: f64 },

    #[error("sigma_{k}(A) is zero to working precision")]
    DegenerateRank { k: usize },

    #[error("parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::AlphaOutOfRange(alpha))
    }
}
