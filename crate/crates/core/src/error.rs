use std::path::PathBuf;

use seaspring_qcqp::QcqpError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("time column is not strictly increasing at row {0}")]
    NonMonotoneTime(usize),
    #[error("time column is not uniform (row {row}: step {step} vs {expected})")]
    NonUniformTime { row: usize, step: f64, expected: f64 },
    #[error("NaN entries in column `{column}` at row {row}")]
    NanEntry { column: String, row: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("degenerate equilibrium, no oscillation")]
    DegenerateOscillation,
    #[error("period not detected within {0} steps")]
    PeriodNotFound(usize),
    #[error("energy drift {drift:e} above tolerance {tol:e}")]
    EnergyDrift { drift: f64, tol: f64 },
    #[error("incompatible sample intervals {0} and {1}; request resampling to a common dt")]
    IncompatibleDt(f64, f64),
    #[error("degenerate spring profile: {0}")]
    DegenerateProfile(String),
    #[error("spring profile not monotone near delta = {delta}: {detail}")]
    NonMonotoneProfile { delta: f64, detail: String },
    #[error("conflicting torques {tau_a} and {tau_b} at delta = {delta}")]
    ConflictingTorque { delta: f64, tau_a: f64, tau_b: f64 },
    #[error("malformed file {path}: {detail}")]
    Malformed { path: PathBuf, detail: String },
    #[error("non-finite state in integration at step {0}")]
    NonFiniteState(usize),
    #[error("degenerate planted instance after {0} attempts")]
    DegenerateDraw(usize),
    #[error(transparent)]
    Solver(#[from] QcqpError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
