//! Negative control: a time-inhomogeneous perturbation whose error does not
//! vanish uniformly in time.
//!
//! The base process `dX = -X dt + dW` is coupled to a perturbed copy whose
//! drift carries a transient forcing supported on the window
//! `[1/delta, 1/delta + 1]`. The forcing is chosen so the coupled difference
//! follows the closed form
//!
//! ```text
//! X^delta_t - X_t = 0                      for t <= 1/delta
//!                   t - 1/delta            for 1/delta <= t <= 1/delta + 1
//!                   e^{-(t - (1/delta+1))} for t >= 1/delta + 1
//! ```
//!
//! exactly: the offset ramps linearly to one across the window and then
//! relaxes at unit rate. Shrinking `delta` only postpones the unit-size
//! excursion, so `sup_t` of the error never decreases — the error "runs
//! away" in time instead of disappearing.

use crate::curve::{CurveMeta, ErrorCurve};
use crate::error::{CoreError, Result};
use crate::rng::{make_stream, StreamId};

/// Window start `1/delta` and integrator step `h`; both window endpoints
/// must land exactly on the step grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppendixModel {
    pub delta: f64,
    pub h: f64,
}

impl AppendixModel {
    pub fn new(delta: f64, h: f64) -> Result<Self> {
        if !(delta > 0.0) || !(h > 0.0) {
            return Err(CoreError::invalid(format!("AppendixModel requires delta > 0 and h > 0, got {delta}, {h}")));
        }
        let start = 1.0 / delta;
        for endpoint in [start, start + 1.0] {
            let steps = endpoint / h;
            if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
                return Err(CoreError::invalid(format!(
                    "indicator window endpoint {endpoint} does not land on the step grid (h = {h})"
                )));
            }
        }
        Ok(AppendixModel { delta, h })
    }

    pub fn window_start(&self) -> f64 {
        1.0 / self.delta
    }

    /// Drift forcing of the perturbed copy at time `t`: ramps as
    /// `1 + (t - 1/delta)` inside `[1/delta, 1/delta + 1)` and vanishes
    /// outside, which makes the coupled difference grow linearly to one
    /// across the window.
    #[inline]
    pub fn forcing(&self, t: f64) -> f64 {
        let start = self.window_start();
        if t >= start && t < start + 1.0 {
            1.0 + (t - start)
        } else {
            0.0
        }
    }
}

/// The closed-form deviation `X^delta_t - X_t`.
pub fn analytic_error(t: f64, delta: f64) -> f64 {
    let start = 1.0 / delta;
    if t <= start {
        0.0
    } else if t <= start + 1.0 {
        t - start
    } else {
        (-(t - (start + 1.0))).exp()
    }
}

/// Integrates base and perturbed SDE with shared increments (the noise
/// cancels in the difference, so one trajectory suffices) and returns the
/// absolute difference over the full step grid.
pub fn simulate_counterexample(m: &AppendixModel, horizon: f64, seed: u64) -> Result<ErrorCurve> {
    if horizon < m.window_start() + 3.0 {
        return Err(CoreError::invalid(format!(
            "horizon must cover the excursion: need horizon >= 1/delta + 3 = {}, got {horizon}",
            m.window_start() + 3.0
        )));
    }
    let n_steps = (horizon / m.h).round() as usize;
    let mut stream = make_stream(seed, StreamId::new("counterexample", 0, 0));
    let mut base = 0.0f64;
    let mut pert = 0.0f64;
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut values = Vec::with_capacity(n_steps + 1);
    let sqrt_h = m.h.sqrt();
    for k in 0..=n_steps {
        let t = k as f64 * m.h;
        times.push(t);
        values.push((pert - base).abs());
        if k == n_steps {
            break;
        }
        let dw = sqrt_h * stream.standard_normal();
        let new_base = base + m.h * (-base) + dw;
        let new_pert = pert + m.h * (-pert + m.forcing(t)) + dw;
        if !(new_base.is_finite() && new_pert.is_finite()) {
            return Err(CoreError::Blowup { time_index: k as u64, trajectory: 0 });
        }
        base = new_base;
        pert = new_pert;
    }
    let meta = CurveMeta { label: "counterexample".into(), sweep_value: m.delta, n_reps: 1, seed };
    ErrorCurve::new(times, values, vec![0.0; n_steps + 1], meta)
}

/// Euler integration of the difference ODE alone (the Brownian terms cancel
/// exactly); used as a cross-check of the coupled simulation.
pub fn integrate_difference_ode(m: &AppendixModel, horizon: f64) -> Result<Vec<f64>> {
    if horizon <= 0.0 {
        return Err(CoreError::invalid("horizon must be positive"));
    }
    let n_steps = (horizon / m.h).round() as usize;
    let mut e = 0.0f64;
    let mut out = Vec::with_capacity(n_steps + 1);
    for k in 0..=n_steps {
        let t = k as f64 * m.h;
        out.push(e);
        if k == n_steps {
            break;
        }
        e += m.h * (-e + m.forcing(t));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_branch_values() {
        let delta = 0.1;
        assert_eq!(analytic_error(10.0, delta), 0.0);
        assert_eq!(analytic_error(11.0, delta), 1.0);
        assert!((analytic_error(12.0, delta) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((analytic_error(12.0, delta) - 0.36788).abs() < 1e-5);
        assert_eq!(analytic_error(3.0, delta), 0.0);
        assert!((analytic_error(10.5, delta) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn model_rejects_misaligned_grid() {
        assert!(AppendixModel::new(0.1, 0.03).is_err());
        assert!(AppendixModel::new(0.1, 0.01).is_ok());
        assert!(AppendixModel::new(0.2, 0.025).is_ok());
    }

    #[test]
    fn simulation_requires_horizon_past_excursion() {
        let m = AppendixModel::new(0.1, 0.01).unwrap();
        assert!(simulate_counterexample(&m, 12.0, 0).is_err());
        assert!(simulate_counterexample(&m, 13.0, 0).is_ok());
    }

    #[test]
    fn noise_cancels_against_difference_ode() {
        let m = AppendixModel::new(0.2, 0.01).unwrap();
        let curve = simulate_counterexample(&m, 9.0, 42).unwrap();
        let ode = integrate_difference_ode(&m, 9.0).unwrap();
        for (v, e) in curve.values.iter().zip(&ode) {
            assert!((v - e.abs()).abs() < 1e-9, "coupled {v} vs ode {e}");
        }
    }

    #[test]
    fn pre_window_difference_is_exactly_zero() {
        let m = AppendixModel::new(0.1, 0.01).unwrap();
        let curve = simulate_counterexample(&m, 13.0, 7).unwrap();
        for (t, v) in curve.times.iter().zip(&curve.values) {
            if *t < 10.0 {
                assert!(*v < 1e-12, "t = {t}, v = {v}");
            }
        }
    }
}
