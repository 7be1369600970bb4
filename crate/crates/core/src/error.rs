//! Error type shared by the simulation and fitting routines.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A trajectory produced a non-finite state. Carries the step index at
    /// which the state first became non-finite and, where known, the
    /// trajectory (replica) index.
    #[error("numerical blowup at step {time_index} (trajectory {trajectory})")]
    Blowup { time_index: u64, trajectory: u64 },

    #[error("fit failure: {0}")]
    FitFailure(String),

    #[error("step budget exceeded: {steps} steps per trajectory, cap {cap}")]
    BudgetExceeded { steps: u64, cap: u64 },

    #[error("configuration error: {0}")]
    Configuration(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;

impl CoreError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CoreError::InvalidArgument(msg.into())
    }

    /// Attach a trajectory index to a blowup raised inside a per-path loop.
    pub fn with_trajectory(self, trajectory: u64) -> Self {
        match self {
            CoreError::Blowup { time_index, .. } => CoreError::Blowup { time_index, trajectory },
            other => other,
        }
    }
}

/// Returns a blowup error unless every entry of `xs` is finite.
#[inline]
pub fn ensure_finite(xs: &[f64], time_index: u64) -> Result<()> {
    if xs.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(CoreError::Blowup { time_index, trajectory: 0 })
    }
}
