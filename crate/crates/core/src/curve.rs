//! Time-indexed Monte Carlo error curves.

use crate::error::{CoreError, Result};
use serde::{Deserialize, Serialize};

/// Discretisation-floor check: a reported approximation error is only
/// trustworthy when it exceeds five times the self-discretisation error of
/// the scheme measuring it (step h against h/2). Flagged runs must not feed
/// rate fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloorCheck {
    pub reported_sup: f64,
    pub self_error_sup: f64,
    pub ok: bool,
}

impl FloorCheck {
    pub fn evaluate(reported_sup: f64, self_error_sup: f64) -> Self {
        FloorCheck { reported_sup, self_error_sup, ok: reported_sup >= 5.0 * self_error_sup }
    }
}

/// Provenance of a curve: the swept parameter (delta, step size, or particle
/// count), the replica count, and the master seed that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveMeta {
    pub label: String,
    pub sweep_value: f64,
    pub n_reps: u64,
    pub seed: u64,
}

/// Monte Carlo estimates of a time-indexed quantity (squared coupled
/// distance, weak error, or a moment trace) with standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub meta: CurveMeta,
}

impl ErrorCurve {
    pub fn new(times: Vec<f64>, values: Vec<f64>, std_errors: Vec<f64>, meta: CurveMeta) -> Result<Self> {
        if times.len() != values.len() || times.len() != std_errors.len() {
            return Err(CoreError::invalid(format!(
                "curve lists must have equal length: {} times, {} values, {} std_errors",
                times.len(),
                values.len(),
                std_errors.len()
            )));
        }
        if times.is_empty() {
            return Err(CoreError::invalid("curve must contain at least one point"));
        }
        Ok(ErrorCurve { times, values, std_errors, meta })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Supremum of the values over the whole curve.
    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Supremum over the points with `lo <= t <= hi`.
    pub fn window_max(&self, lo: f64, hi: f64) -> Result<f64> {
        let mut max = f64::NEG_INFINITY;
        let mut seen = false;
        for (t, v) in self.times.iter().zip(&self.values) {
            if *t >= lo && *t <= hi {
                seen = true;
                max = max.max(*v);
            }
        }
        if !seen {
            return Err(CoreError::invalid(format!("window [{lo}, {hi}] contains no curve points")));
        }
        Ok(max)
    }

    /// Value and standard error at the grid point closest to `t`.
    pub fn at(&self, t: f64) -> (f64, f64) {
        let mut best = 0;
        let mut dist = f64::INFINITY;
        for (k, tk) in self.times.iter().enumerate() {
            let d = (tk - t).abs();
            if d < dist {
                dist = d;
                best = k;
            }
        }
        (self.values[best], self.std_errors[best])
    }
}
