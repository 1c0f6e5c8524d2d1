//! Crate error type. Variants map onto the CLI exit classes: configuration
//! and shape problems are usage errors, numeric breakdowns are numeric
//! errors, file problems are I/O errors.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("B-spline order must be >= 1, got {order}")]
    InvalidOrder { order: usize },

    #[error("test-function support too short: need n0 >= {needed}, got {got}")]
    InvalidSupport { needed: usize, got: usize },

    #[error("not enough data: need {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("error reduction ratio undefined for a zero output vector")]
    UndefinedRatio,

    #[error("APRESS penalty undefined: g*v = {gv} must stay below N = {n}")]
    PenaltyOverflow { gv: f64, n: usize },

    #[error("no admissible regressor: every candidate is degenerate")]
    EmptyModel,

    #[error("update rate must lie strictly inside (0, 1), got {rate}")]
    InvalidRate { rate: f64 },

    #[error("residual variance not positive at sample {time}")]
    SingularVariance { time: usize },

    #[error("selected terms are rank deficient on the plain rows")]
    RankDeficient,

    #[error("nonpositive intrinsic power at t = {time}, f = {freq} Hz")]
    InvalidSpectrum { time: usize, freq: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("need at least {needed} trials, got {got}")]
    InsufficientTrials { needed: usize, got: usize },

    #[error("surrogate count {n_perm} too small for alpha = {alpha}: need >= 1/alpha - 1")]
    InvalidPermutationCount { n_perm: usize, alpha: f64 },

    #[error("unknown channel '{0}'")]
    UnknownChannel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// CLI exit class: 1 usage, 2 numeric, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            UndefinedRatio
            | PenaltyOverflow { .. }
            | EmptyModel
            | SingularVariance { .. }
            | RankDeficient
            | InvalidSpectrum { .. } => 2,
            Io(_) | Parse(_) => 3,
            _ => 1,
        }
    }
}
