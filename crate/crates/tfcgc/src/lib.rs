//! Time-frequency conditional Granger causality (TF-CGC) for short
//! multi-trial signals.
//!
//! The pipeline fits time-varying AR models whose coefficients are expanded
//! over a multiwavelet B-spline dictionary, identifies the expansion by
//! forward regression on a derivative-augmented least-squares problem, and
//! decomposes the fitted models into a conditional Granger causality map
//! over time and frequency. Surrogate permutation tests provide
//! significance thresholds, and two built-in benchmark systems reproduce
//! the published simulation study.
//!
//! Modules follow the processing order: [`basis`] (dictionary and test
//! functions), [`tvarx`] (regressor expansion and modulation), [`selection`]
//! (forward regression, parameter recovery, RLS baseline), [`cgc`]
//! (normalization, spectra, causality, significance), [`pipeline`]
//! (fit orchestration), [`simkit`] (benchmarks, oracles, metrics),
//! [`csvio`] (file formats shared with the CLI).

pub mod basis;
pub mod cgc;
pub mod csvio;
pub mod error;
pub mod pipeline;
pub mod seeding;
pub mod selection;
pub mod simkit;
pub mod tvarx;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
