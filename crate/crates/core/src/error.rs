//! Error types shared across the crate.

use alloc::string::String;
use core::fmt;

/// Errors produced by state updates, schedules and oracle construction.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// Malformed input: dimension mismatch, non-finite entries, bad indices.
    Input(String),
    /// Parameter outside its domain: `r_eps <= 0`, `delta` not in (0,1), `t = 0`.
    Parameter(String),
    /// Problem oracle could not be constructed (degenerate data, empty dataset).
    Construction(String),
    /// The run diverged: non-finite state or a step size past the guard threshold.
    Divergence { step: u64, detail: String },
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::Input(msg) => write!(f, "input error: {msg}"),
            CoreError::Parameter(msg) => write!(f, "parameter error: {msg}"),
            CoreError::Construction(msg) => write!(f, "construction error: {msg}"),
            CoreError::Divergence { step, detail } => {
                write!(f, "divergence at step {step}: {detail}")
            }
        }
    }
}

impl core::error::Error for CoreError {}

impl CoreError {
    pub fn input(msg: impl Into<String>) -> Self {
        CoreError::Input(msg.into())
    }

    pub fn parameter(msg: impl Into<String>) -> Self {
        CoreError::Parameter(msg.into())
    }

    pub fn construction(msg: impl Into<String>) -> Self {
        CoreError::Construction(msg.into())
    }
}
