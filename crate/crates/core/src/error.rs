//! Error type shared by all core modules.

use thiserror::Error;

/// Errors produced by the numerical core.
#[derive(Debug, Clone, Error)]
pub enum CoreError {
    /// Rejected input (non-finite data, out-of-range parameter, bad index).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two fields or trajectories do not live on compatible grids/times.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A solver produced non-finite values; `time` is the last finite time.
    #[error("numerical blow-up, last finite time t = {time}")]
    BlowUp { time: f64 },

    /// The quadratic energy loses positive definiteness for eps >= mu/4.
    #[error("positivity threshold violated: eps = {eps} is not below mu/4 = {limit}")]
    PositivityThreshold { eps: f64, limit: f64 },

    /// A modulated-energy parameter bound was violated; names the bound.
    #[error("modulated-energy threshold violated: {0}")]
    ThresholdViolation(String),

    /// Requested time lies outside the stored history.
    #[error("time t = {t} outside stored history [{t0}, {t1}]")]
    OutsideHistory { t: f64, t0: f64, t1: f64 },
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, CoreError>;
