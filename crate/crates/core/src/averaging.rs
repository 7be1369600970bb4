//! Slow-fast averaging experiments.
//!
//! The coupled pair
//!
//! ```text
//! dX = (-X - r cos Y) dt            + sqrt(2)       dW
//! dY = (1/delta)(-Y + r sin X) dt   + sqrt(2/delta) dB
//! ```
//!
//! is simulated against the averaged equation
//! `dXbar = (-Xbar - r e^{-1/2} cos(r sin Xbar)) dt + sqrt(2) dW`
//! driven by the same `W` (synchronous coupling), which makes the pathwise
//! squared distance an upper bound for the squared L2 Wasserstein distance
//! between the slow marginal and the averaged law.

use crate::curve::{CurveMeta, ErrorCurve, FloorCheck};
use crate::error::{CoreError, Result};
use crate::metrics::{fit_exp_decay, RateFit};
use crate::parallel::{map_trajectories_ordered, Welford};
use crate::rng::{make_stream, StreamId};

/// Coupling amplitude `r` and scale separation `delta` of the slow-fast pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlowFastModel {
    pub r: f64,
    pub delta: f64,
}

impl SlowFastModel {
    pub fn new(r: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(CoreError::invalid(format!("SlowFastModel requires delta > 0, got {delta}")));
        }
        if !r.is_finite() {
            return Err(CoreError::invalid("SlowFastModel requires finite r"));
        }
        Ok(SlowFastModel { r, delta })
    }
}

/// The averaged equation for the slow variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragedModel {
    pub r: f64,
}

/// Largest coupling amplitude for which the synchronous-coupling contraction
/// rate `1 - r e^{-1/2}` stays nonnegative.
pub const CONTRACTION_R_MAX: f64 = 1.648_721_270_700_128_2; // e^{1/2}

const INV_SQRT_E: f64 = 0.606_530_659_712_633_4; // e^{-1/2}

/// Drift of the averaged equation: the slow drift integrated against the
/// frozen fast law `N(r sin x, 1)`, using `E[cos Z] = e^{-1/2} cos m` for
/// `Z ~ N(m, 1)`.
#[inline]
pub fn averaged_drift(x: f64, r: f64) -> f64 {
    -x - r * INV_SQRT_E * (r * x.sin()).cos()
}

/// One Euler step of the coupled pair. The step must resolve the fast
/// relaxation time: `h <= delta / 20`.
pub fn slowfast_step(m: &SlowFastModel, state: (f64, f64), h: f64, dw: f64, db: f64) -> Result<(f64, f64)> {
    if !(h > 0.0) {
        return Err(CoreError::invalid(format!("slowfast_step requires h > 0, got {h}")));
    }
    if h > m.delta / 20.0 + 1e-15 {
        return Err(CoreError::invalid(format!(
            "step h = {h} too large for delta = {}: need h <= delta/20",
            m.delta
        )));
    }
    let (x, y) = state;
    let xn = x + h * (-x - m.r * y.cos()) + std::f64::consts::SQRT_2 * dw;
    let yn = y + h / m.delta * (-y + m.r * x.sin()) + (2.0 / m.delta).sqrt() * db;
    if xn.is_finite() && yn.is_finite() {
        Ok((xn, yn))
    } else {
        Err(CoreError::Blowup { time_index: 0, trajectory: 0 })
    }
}

/// Knobs shared by the averaging experiments.
#[derive(Debug, Clone, Copy)]
pub struct AveragingOptions {
    /// Base integration step; the coupled system runs at
    /// `min(h_base, delta / stiffness_divisor)`.
    pub h_base: f64,
    pub stiffness_divisor: f64,
    /// Cap on the number of reported times per curve.
    pub max_out_points: usize,
    /// Replicas used for the h-vs-h/2 self-discretisation estimate.
    pub floor_reps: u64,
}

impl Default for AveragingOptions {
    fn default() -> Self {
        AveragingOptions { h_base: 1e-3, stiffness_divisor: 20.0, max_out_points: 200, floor_reps: 200 }
    }
}

/// Output of one strong-error run: the coupled squared-error curve, the
/// second-moment traces gathered in the same pass, and the floor check.
#[derive(Debug, Clone)]
pub struct AveragingRun {
    pub strong: ErrorCurve,
    pub moment_x: ErrorCurve,
    pub moment_y: ErrorCurve,
    pub floor: FloorCheck,
}

struct GridPlan {
    h: f64,
    n_steps: usize,
    stride: usize,
    record_times: Vec<f64>,
}

fn plan_grid(h_target: f64, horizon: f64, max_out_points: usize) -> GridPlan {
    let n_steps = (horizon / h_target).ceil().max(1.0) as usize;
    let h = horizon / n_steps as f64;
    let stride = (n_steps + max_out_points - 1) / max_out_points.max(1);
    let stride = stride.max(1);
    let mut record_times = Vec::with_capacity(n_steps / stride + 2);
    let mut k = 0;
    while k <= n_steps {
        record_times.push(k as f64 * h);
        k += stride;
    }
    if (n_steps % stride) != 0 {
        record_times.push(horizon);
    }
    GridPlan { h, n_steps, stride, record_times }
}

const ROLE_W: u32 = 0;
const ROLE_B: u32 = 1;

/// Simulates the coupled pair and the averaged process with shared `W`
/// increments; returns `E|X_t - Xbar_t|^2` with standard errors, plus moment
/// traces and the discretisation-floor check.
pub fn simulate_strong_error(m: &SlowFastModel, horizon: f64, n_reps: u64, seed: u64) -> Result<AveragingRun> {
    simulate_strong_error_with(m, horizon, n_reps, seed, &AveragingOptions::default())
}

pub fn simulate_strong_error_with(
    m: &SlowFastModel,
    horizon: f64,
    n_reps: u64,
    seed: u64,
    opts: &AveragingOptions,
) -> Result<AveragingRun> {
    if !(horizon > 0.0) {
        return Err(CoreError::invalid(format!("horizon must be positive, got {horizon}")));
    }
    if n_reps < 100 {
        return Err(CoreError::invalid(format!("n_reps must be >= 100, got {n_reps}")));
    }
    let h_target = opts.h_base.min(m.delta / opts.stiffness_divisor);
    let plan = plan_grid(h_target, horizon, opts.max_out_points);
    let n_points = plan.record_times.len();

    // Channels per record point: squared coupled error, |X|^2, |Y|^2.
    let mut acc = Welford::new(3 * n_points);
    map_trajectories_ordered(
        n_reps,
        |traj| {
            let mut w = make_stream(seed, StreamId::new("avg-strong", traj, ROLE_W));
            let mut b = make_stream(seed, StreamId::new("avg-strong", traj, ROLE_B));
            let mut rec = vec![0.0; 3 * n_points];
            let (mut x, mut y, mut xb) = (0.0f64, 0.0f64, 0.0f64);
            let h = plan.h;
            let amp_x = (2.0 * h).sqrt();
            let amp_y = (2.0 * h / m.delta).sqrt();
            let inv_delta = 1.0 / m.delta;
            let mut idx = 0;
            for k in 0..=plan.n_steps {
                if k % plan.stride == 0 || k == plan.n_steps {
                    let d = x - xb;
                    rec[3 * idx] = d * d;
                    rec[3 * idx + 1] = x * x;
                    rec[3 * idx + 2] = y * y;
                    idx += 1;
                }
                if k == plan.n_steps {
                    break;
                }
                let zw = w.standard_normal();
                let zb = b.standard_normal();
                let xn = x + h * (-x - m.r * y.cos()) + amp_x * zw;
                let yn = y + h * inv_delta * (-y + m.r * x.sin()) + amp_y * zb;
                let xbn = xb + h * averaged_drift(xb, m.r) + amp_x * zw;
                if !(xn.is_finite() && yn.is_finite() && xbn.is_finite()) {
                    return Err(CoreError::Blowup { time_index: k as u64, trajectory: traj });
                }
                x = xn;
                y = yn;
                xb = xbn;
            }
            debug_assert_eq!(idx, n_points);
            Ok(rec)
        },
        |_, rec| acc.update(&rec),
    )?;

    let means = acc.mean().to_vec();
    let ses = acc.std_errors();
    let take = |c: usize| -> (Vec<f64>, Vec<f64>) {
        (
            (0..n_points).map(|i| means[3 * i + c]).collect(),
            (0..n_points).map(|i| ses[3 * i + c]).collect(),
        )
    };
    let meta = |label: &str| CurveMeta { label: label.into(), sweep_value: m.delta, n_reps, seed };
    let (sv, sse) = take(0);
    let strong = ErrorCurve::new(plan.record_times.clone(), sv, sse, meta("strong_error"))?;
    let (mx, mxe) = take(1);
    let moment_x = ErrorCurve::new(plan.record_times.clone(), mx, mxe, meta("moment_x"))?;
    let (my, mye) = take(2);
    let moment_y = ErrorCurve::new(plan.record_times.clone(), my, mye, meta("moment_y"))?;

    let self_sup = coupled_self_discretisation_sup(m, horizon, opts, seed)?;
    let floor = FloorCheck::evaluate(strong.sup(), self_sup);
    Ok(AveragingRun { strong, moment_x, moment_y, floor })
}

/// Self-discretisation error of the run: the coupled pair and the averaged
/// equation are each integrated at h and h/2 with a shared Brownian path;
/// returns the larger of the two sup squared differences.
fn coupled_self_discretisation_sup(m: &SlowFastModel, horizon: f64, opts: &AveragingOptions, seed: u64) -> Result<f64> {
    let h_target = opts.h_base.min(m.delta / opts.stiffness_divisor);
    let plan = plan_grid(h_target, horizon, opts.max_out_points);
    let n_points = plan.record_times.len();
    let mut acc = Welford::new(2 * n_points);
    map_trajectories_ordered(
        opts.floor_reps,
        |traj| {
            let mut w = make_stream(seed, StreamId::new("avg-floor", traj, ROLE_W));
            let mut b = make_stream(seed, StreamId::new("avg-floor", traj, ROLE_B));
            let mut rec = vec![0.0; 2 * n_points];
            let h = plan.h;
            let h2 = 0.5 * h;
            let amp_w2 = h2.sqrt();
            let inv_delta = 1.0 / m.delta;
            // Coarse and fine copies of the coupled pair and of the averaged
            // equation, all on one Brownian path.
            let (mut xc, mut yc, mut xf, mut yf) = (0.0f64, 0.0, 0.0, 0.0);
            let (mut xbc, mut xbf) = (0.0f64, 0.0);
            let mut idx = 0;
            for k in 0..=plan.n_steps {
                if k % plan.stride == 0 || k == plan.n_steps {
                    let dc = xc - xf;
                    let db_ = xbc - xbf;
                    rec[2 * idx] = dc * dc;
                    rec[2 * idx + 1] = db_ * db_;
                    idx += 1;
                }
                if k == plan.n_steps {
                    break;
                }
                let (zw1, zb1) = (w.standard_normal(), b.standard_normal());
                let (zw2, zb2) = (w.standard_normal(), b.standard_normal());
                let (dw1, dw2) = (amp_w2 * zw1, amp_w2 * zw2);
                let (db1, db2) = (amp_w2 * zb1, amp_w2 * zb2);
                // fine: two half steps
                let mut state = (xf, yf);
                state = euler_pair(m, state, h2, inv_delta, dw1, db1);
                state = euler_pair(m, state, h2, inv_delta, dw2, db2);
                xf = state.0;
                yf = state.1;
                xbf = xbf + h2 * averaged_drift(xbf, m.r) + std::f64::consts::SQRT_2 * dw1;
                xbf = xbf + h2 * averaged_drift(xbf, m.r) + std::f64::consts::SQRT_2 * dw2;
                // coarse: one full step with the summed increments
                let state = euler_pair(m, (xc, yc), h, inv_delta, dw1 + dw2, db1 + db2);
                xc = state.0;
                yc = state.1;
                xbc = xbc + h * averaged_drift(xbc, m.r) + std::f64::consts::SQRT_2 * (dw1 + dw2);
                if !(xc.is_finite() && yc.is_finite() && xf.is_finite() && yf.is_finite()) {
                    return Err(CoreError::Blowup { time_index: k as u64, trajectory: traj });
                }
            }
            Ok(rec)
        },
        |_, rec| acc.update(&rec),
    )?;
    Ok(acc.mean().iter().copied().fold(0.0, f64::max))
}

#[inline]
fn euler_pair(m: &SlowFastModel, state: (f64, f64), h: f64, inv_delta: f64, dw: f64, db: f64) -> (f64, f64) {
    let (x, y) = state;
    (
        x + h * (-x - m.r * y.cos()) + std::f64::consts::SQRT_2 * dw,
        y + h * inv_delta * (-y + m.r * x.sin()) + (2.0 * inv_delta).sqrt() * db,
    )
}

/// Test functions with bounded first and second derivatives for the weak
/// (semigroup) error experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeakTestFn {
    Tanh,
    Cos,
    /// x -> 1 / (1 + x^2)
    RationalBump,
    /// Constant function; weak error must vanish identically.
    Constant(f64),
}

impl WeakTestFn {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            WeakTestFn::Tanh => x.tanh(),
            WeakTestFn::Cos => x.cos(),
            WeakTestFn::RationalBump => 1.0 / (1.0 + x * x),
            WeakTestFn::Constant(c) => *c,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            WeakTestFn::Tanh => "tanh",
            WeakTestFn::Cos => "cos",
            WeakTestFn::RationalBump => "rational_bump",
            WeakTestFn::Constant(_) => "constant",
        }
    }
}

/// Weak error `|E f(X_t) - E f(Xbar_t)|` per output time, estimated from the
/// coupled pathwise differences (common random numbers), with the standard
/// error of the difference estimator.
pub fn simulate_weak_error(m: &SlowFastModel, f: WeakTestFn, horizon: f64, n_reps: u64, seed: u64) -> Result<ErrorCurve> {
    simulate_weak_error_with(m, f, horizon, n_reps, seed, &AveragingOptions::default())
}

pub fn simulate_weak_error_with(
    m: &SlowFastModel,
    f: WeakTestFn,
    horizon: f64,
    n_reps: u64,
    seed: u64,
    opts: &AveragingOptions,
) -> Result<ErrorCurve> {
    if !(horizon > 0.0) {
        return Err(CoreError::invalid(format!("horizon must be positive, got {horizon}")));
    }
    if n_reps < 100 {
        return Err(CoreError::invalid(format!("n_reps must be >= 100, got {n_reps}")));
    }
    let h_target = opts.h_base.min(m.delta / opts.stiffness_divisor);
    let plan = plan_grid(h_target, horizon, opts.max_out_points);
    let n_points = plan.record_times.len();
    let mut acc = Welford::new(n_points);
    map_trajectories_ordered(
        n_reps,
        |traj| {
            let mut w = make_stream(seed, StreamId::new("avg-weak", traj, ROLE_W));
            let mut b = make_stream(seed, StreamId::new("avg-weak", traj, ROLE_B));
            let mut rec = vec![0.0; n_points];
            let (mut x, mut y, mut xb) = (0.0f64, 0.0f64, 0.0f64);
            let h = plan.h;
            let sqrt_h = h.sqrt();
            let inv_delta = 1.0 / m.delta;
            let mut idx = 0;
            for k in 0..=plan.n_steps {
                if k % plan.stride == 0 || k == plan.n_steps {
                    rec[idx] = f.eval(x) - f.eval(xb);
                    idx += 1;
                }
                if k == plan.n_steps {
                    break;
                }
                let dw = sqrt_h * w.standard_normal();
                let db = sqrt_h * b.standard_normal();
                let state = euler_pair(m, (x, y), h, inv_delta, dw, db);
                let xbn = xb + h * averaged_drift(xb, m.r) + std::f64::consts::SQRT_2 * dw;
                x = state.0;
                y = state.1;
                xb = xbn;
                if !(x.is_finite() && y.is_finite() && xb.is_finite()) {
                    return Err(CoreError::Blowup { time_index: k as u64, trajectory: traj });
                }
            }
            Ok(rec)
        },
        |_, rec| acc.update(&rec),
    )?;
    let values: Vec<f64> = acc.mean().iter().map(|v| v.abs()).collect();
    let ses = acc.std_errors();
    let meta = CurveMeta {
        label: format!("weak_error_{}", f.label()),
        sweep_value: m.delta,
        n_reps,
        seed,
    };
    ErrorCurve::new(plan.record_times.clone(), values, ses, meta)
}

/// Simulates two synchronously coupled copies of the averaged equation from
/// `x0` and `x0p`, fits `log E|X1 - X2|^2` against `t`, and returns
/// `lambda_hat = -slope/2` (the paper-normalised rate for the distance, not
/// its square).
pub fn estimate_contraction(
    model: &AveragedModel,
    x0: f64,
    x0p: f64,
    horizon: f64,
    n_reps: u64,
    seed: u64,
) -> Result<RateFit> {
    if x0 == x0p {
        return Err(CoreError::invalid("estimate_contraction requires x0 != x0'"));
    }
    if model.r > CONTRACTION_R_MAX {
        return Err(CoreError::invalid(format!(
            "contraction diagnostics require r <= sqrt(e) ~= {CONTRACTION_R_MAX}, got {}",
            model.r
        )));
    }
    if !(horizon > 0.0) {
        return Err(CoreError::invalid("horizon must be positive"));
    }
    let h = 1e-3;
    let plan = plan_grid(h, horizon, 200);
    let n_points = plan.record_times.len();
    let mut acc = Welford::new(n_points);
    map_trajectories_ordered(
        n_reps,
        |traj| {
            let mut w = make_stream(seed, StreamId::new("avg-contraction", traj, ROLE_W));
            let mut rec = vec![0.0; n_points];
            let (mut x1, mut x2) = (x0, x0p);
            let h = plan.h;
            let amp = (2.0 * h).sqrt();
            let mut idx = 0;
            for k in 0..=plan.n_steps {
                if k % plan.stride == 0 || k == plan.n_steps {
                    let d = x1 - x2;
                    rec[idx] = d * d;
                    idx += 1;
                }
                if k == plan.n_steps {
                    break;
                }
                let dw = amp * w.standard_normal();
                x1 += h * averaged_drift(x1, model.r) + dw;
                x2 += h * averaged_drift(x2, model.r) + dw;
                if !(x1.is_finite() && x2.is_finite()) {
                    return Err(CoreError::Blowup { time_index: k as u64, trajectory: traj });
                }
            }
            Ok(rec)
        },
        |_, rec| acc.update(&rec),
    )?;
    let meta = CurveMeta { label: "contraction".into(), sweep_value: model.r, n_reps, seed };
    let curve = ErrorCurve::new(plan.record_times.clone(), acc.mean().to_vec(), acc.std_errors(), meta)?;
    let fit = fit_exp_decay(&curve, (0.0, horizon))?;
    Ok(RateFit { exponent: 0.5 * fit.exponent, ..fit })
}

/// Second-moment traces `E|X_t|^2` and `E|Y_t|^2` of the coupled pair.
pub struct MomentTraces {
    pub x: ErrorCurve,
    pub y: ErrorCurve,
}

pub fn moment_trace(m: &SlowFastModel, horizon: f64, n_reps: u64, seed: u64) -> Result<MomentTraces> {
    let run = simulate_strong_error_with(m, horizon, n_reps, seed, &AveragingOptions::default())?;
    Ok(MomentTraces { x: run.moment_x, y: run.moment_y })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn averaged_drift_paper_value_at_origin() {
        // -e^{-1/2} at (x, r) = (0, 1).
        assert!((averaged_drift(0.0, 1.0) + 0.60653).abs() < 1e-5);
        assert!((averaged_drift(0.0, 1.0) + INV_SQRT_E).abs() < 1e-15);
    }

    #[test]
    fn averaged_drift_decouples_at_r_zero() {
        for x in [-2.0, -0.5, 0.0, 1.3] {
            assert_eq!(averaged_drift(x, 0.0), -x);
        }
    }

    #[test]
    fn averaged_drift_r_two() {
        assert!((averaged_drift(0.0, 2.0) + 2.0 * INV_SQRT_E).abs() < 1e-15);
        assert!((averaged_drift(0.0, 2.0) + 1.21306).abs() < 1e-5);
    }

    #[test]
    fn slowfast_step_hand_drift() {
        let m = SlowFastModel::new(1.0, 0.1).unwrap();
        let (x, y) = slowfast_step(&m, (0.0, 0.0), 0.001, 0.0, 0.0).unwrap();
        assert!((x + 0.001).abs() < 1e-15);
        assert_eq!(y, 0.0);
    }

    #[test]
    fn slowfast_step_rejects_stiff_step() {
        let m = SlowFastModel::new(1.0, 0.1).unwrap();
        assert!(slowfast_step(&m, (0.0, 0.0), 0.01, 0.0, 0.0).is_err());
    }

    #[test]
    fn slowfast_decoupled_matches_plain_ou_euler() {
        let m = SlowFastModel::new(0.0, 1.0).unwrap();
        let (x, _) = slowfast_step(&m, (1.0, 0.3), 0.05, 0.2, 0.0).unwrap();
        let expect = 1.0 + 0.05 * (-1.0) + std::f64::consts::SQRT_2 * 0.2;
        assert!((x - expect).abs() < 1e-15);
    }

    // Fixed point of the zero-noise drift: x = -r cos y, y = r sin x. The
    // map is a contraction, so iterating it is an independent root finder;
    // the system has a unique root near (-0.768, -0.695) at r = 1.
    #[test]
    fn slowfast_zero_noise_fixed_point_stays_put() {
        let r = 1.0f64;
        let (mut x, mut y) = (0.0f64, 0.0f64);
        for _ in 0..300 {
            x = -r * y.cos();
            y = r * x.sin();
        }
        assert!((x + 0.768169).abs() < 1e-5, "x = {x}");
        assert!((y + 0.694820).abs() < 1e-5, "y = {y}");
        let residual_x = -x - r * y.cos();
        let residual_y = -y + r * x.sin();
        assert!(residual_x.abs() < 1e-10 && residual_y.abs() < 1e-10);

        let m = SlowFastModel::new(r, 0.5).unwrap();
        let (xn, yn) = slowfast_step(&m, (x, y), 0.01, 0.0, 0.0).unwrap();
        assert!((xn - x).abs() < 1e-12 && (yn - y).abs() < 1e-12);
    }

    #[test]
    fn contraction_requires_distinct_starts_and_small_r() {
        let m = AveragedModel { r: 1.0 };
        assert!(estimate_contraction(&m, 1.0, 1.0, 5.0, 100, 0).is_err());
        let m = AveragedModel { r: 1.7 };
        assert!(estimate_contraction(&m, 1.0, -1.0, 5.0, 100, 0).is_err());
    }

    #[test]
    fn weak_error_of_constant_function_vanishes() {
        let m = SlowFastModel::new(1.0, 0.1).unwrap();
        let curve = simulate_weak_error(&m, WeakTestFn::Constant(3.0), 1.0, 100, 7).unwrap();
        assert!(curve.values.iter().all(|v| *v == 0.0));
    }
}
