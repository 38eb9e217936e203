use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("Fock index ({n0}, {n1}) outside cutoff {cutoff}")]
    IndexOutOfCutoff { n0: usize, n1: usize, cutoff: usize },

    #[error("cutoff {0} below the minimum of 12")]
    CutoffTooSmall(usize),

    #[error("photon number {0} not supported (expected 2..=5)")]
    UnsupportedPhotonNumber(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("objective is not finite at the evaluation point ({0})")]
    NonFiniteObjective(f64),

    #[error("gradient entry {index} is not finite ({value})")]
    NonFiniteGradient { index: usize, value: f64 },

    #[error("differentiable CFI for pattern ({n1}, {n2}) is {value} at initialization; cannot calibrate")]
    DegenerateCalibration { n1: usize, n2: usize, value: f64 },

    #[error("Wigner grid does not cover the state: boundary |W| = {max_boundary:e} exceeds {limit:e}")]
    GridBoundary { max_boundary: f64, limit: f64 },

    #[error("post-selection probability is zero")]
    ZeroSelectionProbability,

    #[error("trained parameters not found at {0}")]
    MissingTrainedParams(PathBuf),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config: {0}")]
    Config(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
