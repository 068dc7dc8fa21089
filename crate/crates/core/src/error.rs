// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid pair combination: {0}")]
    InvalidPair(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("state is not normalized (norm = {norm})")]
    NotNormalized { norm: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("exponential exchange model used outside its validity range: |kappa*dV| = {0:.3} > 3")]
    OutOfModel(f64),

    #[error("frequency undefined: both Jx and Jy are zero")]
    UndefinedFrequency,

    #[error("non-degenerate perturbation theory not applicable (guard = {0:.3})")]
    DegenerateRegime(f64),

    #[error("ramp discretization did not converge after {steps} steps (change {change:e})")]
    Convergence { steps: usize, change: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no oscillation found above the noise floor")]
    NoOscillation,

    #[error("no interior minimum in the sweep")]
    Bracket,

    #[error("no point-symmetric structure found in the map")]
    NoSymmetry,

    #[error("unknown figure '{0}'")]
    UnknownFigure(String),

    #[error("calibration did not converge within {0} iterations")]
    CalibrationDiverged(usize),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
