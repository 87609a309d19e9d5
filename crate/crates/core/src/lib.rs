//! Simulator and analysis toolkit for periodic-averaging local-update SGD.
//!
//! `m` virtual workers each run `tau` local SGD steps between model-averaging
//! rounds. The crate models the wall-clock cost of those rounds (compute-time
//! distributions, straggler effects, communication delay), simulates training
//! on small differentiable objectives, evaluates closed-form error-runtime
//! bounds, and implements an adaptive controller that re-selects the
//! communication period from observed training loss.
//!
//! Everything is deterministic given explicit seeds: randomness flows through
//! counter-derived substreams (see [`rng`]), so results are reproducible
//! regardless of execution order.

pub mod adacomm;
pub mod bounds;
pub mod config;
pub mod delay;
pub mod engine;
pub mod objectives;
pub mod rng;
pub mod trace;

use thiserror::Error as ThisError;

/// Crate-wide error type.
#[derive(Debug, ThisError)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid `{name}`: {reason}")]
    Invalid { name: &'static str, reason: String },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("config error: {0}")]
    Config(String),

    #[error("every grid-search candidate diverged")]
    AllCandidatesDiverged,
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
