use thiserror::Error;

/// Errors raised by the simulation engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index out of range: {what} = {index} (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("matrix is not unitary (deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical blow-up: {0}")]
    Blowup(String),

    #[error(
        "cached action drifted from recomputed value: relative drift {drift:.3e} at sweep {sweep}"
    )]
    Drift { drift: f64, sweep: u64 },

    #[error("copy {copy} action left the positive regime: S = {value:.6e} at sweep {sweep}")]
    NegativeAction { value: f64, sweep: u64, copy: usize },

    #[error("series too short: need at least {needed}, got {len}")]
    SeriesTooShort { needed: usize, len: usize },

    #[error("too few jackknife blocks: {blocks}")]
    TooFewBlocks { blocks: usize },

    #[error("empty series")]
    EmptySeries,

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
