//! Long-horizon strong error of sampling schemes against reference dynamics.
//!
//! * ULA against the exact OU transition (quadratic potential) or a 64x fine
//!   Euler path (perturbed potential),
//! * UBU against a 128x fine Euler path of the kinetic system, with the
//!   U-step noise pair reconstructed from the same fine Brownian increments,
//! * unadjusted HMC against the exact Hamiltonian-flow chain on a Gaussian
//!   target, with identical momentum draws.
//!
//! All couplings share one Brownian path between scheme and reference, so
//! the recorded E|X - X_ref|^2 estimates the squared strong error at chain
//! times. Fine-grid references carry a self-error estimate (step halving)
//! and the 5x floor rule flags contaminated runs.

use crate::curve::{CurveMeta, ErrorCurve, FloorCheck};
use crate::error::{CoreError, Result};
use crate::integrators::UbuKernel;
use crate::metrics::{fit_power_law, RateFit};
use crate::parallel::{map_trajectories_ordered, Welford};
use crate::rng::{make_stream, StreamId};

/// Confining potentials with closed-form gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialSpec {
    /// `U(x) = a x^2 / 2`
    Quadratic { a: f64 },
    /// `U(x) = a x^2 / 2 + b log cosh x`; requires `|b| < a` so that
    /// `U'' >= a - |b| > 0`.
    PerturbedQuadratic { a: f64, b: f64 },
}

impl PotentialSpec {
    pub fn quadratic(a: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(CoreError::invalid(format!("quadratic potential requires a > 0, got {a}")));
        }
        Ok(PotentialSpec::Quadratic { a })
    }

    pub fn perturbed_quadratic(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(CoreError::invalid(format!("perturbed quadratic requires a > 0, got {a}")));
        }
        if !(b.abs() < a) {
            return Err(CoreError::invalid(format!("perturbed quadratic requires |b| < a, got a = {a}, b = {b}")));
        }
        Ok(PotentialSpec::PerturbedQuadratic { a, b })
    }

    #[inline]
    pub fn grad(&self, x: f64) -> f64 {
        match self {
            PotentialSpec::Quadratic { a } => a * x,
            PotentialSpec::PerturbedQuadratic { a, b } => a * x + b * x.tanh(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            PotentialSpec::Quadratic { a } => format!("quadratic(a={a})"),
            PotentialSpec::PerturbedQuadratic { a, b } => format!("perturbed_quadratic(a={a},b={b})"),
        }
    }
}

/// Scheme selector for the order-of-convergence sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SchemeSpec {
    Ula,
    Ubu { gamma: f64 },
    /// `flow_time = eps * L` is held fixed across the sweep; the chain runs
    /// `horizon / flow_time` steps.
    HmcUnadjusted { flow_time: f64 },
}

/// Cap on chain steps per trajectory.
pub const STEP_BUDGET: u64 = 10_000_000;

/// A strong-error curve together with the reference-floor check (absent when
/// the reference is exact).
#[derive(Debug, Clone)]
pub struct DiscretizationRun {
    pub curve: ErrorCurve,
    pub floor: Option<FloorCheck>,
}

#[derive(Debug, Clone, Copy)]
pub struct UlaOptions {
    pub x0: f64,
    /// Multiplies every noise draw; zero isolates the deterministic
    /// Euler-vs-exact gap.
    pub noise_scale: f64,
    /// Fine-grid factor for non-quadratic references.
    pub fine_factor: usize,
    pub floor_reps: u64,
}

impl Default for UlaOptions {
    fn default() -> Self {
        UlaOptions { x0: 0.0, noise_scale: 1.0, fine_factor: 64, floor_reps: 200 }
    }
}

fn chain_plan(delta: f64, horizon: f64) -> Result<(usize, usize)> {
    if !(delta > 0.0) || !(horizon > 0.0) {
        return Err(CoreError::invalid(format!("delta and horizon must be positive, got {delta}, {horizon}")));
    }
    let steps = (horizon / delta).round().max(1.0) as u64;
    if steps > STEP_BUDGET {
        return Err(CoreError::BudgetExceeded { steps, cap: STEP_BUDGET });
    }
    let steps = steps as usize;
    let stride = (steps / 2048).max(1);
    Ok((steps, stride))
}

fn record_times(delta: f64, steps: usize, stride: usize) -> Vec<f64> {
    let mut times = Vec::with_capacity(steps / stride + 2);
    let mut k = 0;
    while k <= steps {
        times.push(k as f64 * delta);
        k += stride;
    }
    if steps % stride != 0 {
        times.push(steps as f64 * delta);
    }
    times
}

/// ULA chain `X_{k+1} = X_k - delta grad U(X_k) + sqrt(2 delta) Xi_k`
/// coupled to its reference; returns `E|X_ld - X_l|^2` at chain times.
pub fn ula_strong_error(pot: &PotentialSpec, delta: f64, horizon: f64, n_reps: u64, seed: u64) -> Result<DiscretizationRun> {
    ula_strong_error_with(pot, delta, horizon, n_reps, seed, &UlaOptions::default())
}

pub fn ula_strong_error_with(
    pot: &PotentialSpec,
    delta: f64,
    horizon: f64,
    n_reps: u64,
    seed: u64,
    opts: &UlaOptions,
) -> Result<DiscretizationRun> {
    let (steps, stride) = chain_plan(delta, horizon)?;
    let times = record_times(delta, steps, stride);
    let n_points = times.len();
    let meta = CurveMeta { label: "ula_strong_error".into(), sweep_value: delta, n_reps, seed };

    match *pot {
        PotentialSpec::Quadratic { a } => {
            let decay = (-a * delta).exp();
            let std = (( -(-2.0 * a * delta).exp_m1()) / a).sqrt(); // sigma = sqrt(2)
            let mut acc = Welford::new(n_points);
            map_trajectories_ordered(
                n_reps,
                |traj| {
                    let mut stream = make_stream(seed, StreamId::new("ula", traj, 0));
                    let mut rec = vec![0.0; n_points];
                    let (mut xc, mut xe) = (opts.x0, opts.x0);
                    let amp = (2.0 * delta).sqrt() * opts.noise_scale;
                    let mut idx = 0;
                    for k in 0..=steps {
                        if k % stride == 0 || k == steps {
                            let d = xc - xe;
                            rec[idx] = d * d;
                            idx += 1;
                        }
                        if k == steps {
                            break;
                        }
                        let z = stream.standard_normal();
                        xc = xc - delta * pot.grad(xc) + amp * z;
                        xe = decay * xe + std * opts.noise_scale * z;
                        if !(xc.is_finite() && xe.is_finite()) {
                            return Err(CoreError::Blowup { time_index: k as u64, trajectory: traj });
                        }
                    }
                    Ok(rec)
                },
                |_, rec| acc.update(&rec),
            )?;
            let curve = ErrorCurve::new(times, acc.mean().to_vec(), acc.std_errors(), meta)?;
            Ok(DiscretizationRun { curve, floor: None })
        }
        PotentialSpec::PerturbedQuadratic { .. } => {
            let factor = opts.fine_factor;
            let hf = delta / factor as f64;
            let mut acc = Welford::new(n_points);
            map_trajectories_ordered(
                n_reps,
                |traj| {
                    let mut stream = make_stream(seed, StreamId::new("ula", traj, 0));
                    let mut rec = vec![0.0; n_points];
                    let (mut xc, mut xf) = (opts.x0, opts.x0);
                    let sqrt2 = std::f64::consts::SQRT_2;
                    let mut idx = 0;
                    for k in 0..=steps {
                        if k % stride == 0 || k == steps {
                            let d = xc - xf;
                            rec[idx] = d * d;
                            idx += 1;
                        }
                        if k == steps {
                            break;
                        }
                        let mut coarse = 0.0;
                        for _ in 0..factor {
                            let db = hf.sqrt() * opts.noise_scale * stream.standard_normal();
                            coarse += db;
                            xf = xf - hf * pot.grad(xf) + sqrt2 * db;
                        }
                        xc = xc - delta * pot.grad(xc) + sqrt2 * coarse;
                        if !(xc.is_finite() && xf.is_finite()) {
                            return Err(CoreError::Blowup { time_index: k as u64, trajectory: traj });
                        }
                    }
                    Ok(rec)
                },
                |_, rec| acc.update(&rec),
            )?;
            let curve = ErrorCurve::new(times, acc.mean().to_vec(), acc.std_errors(), meta)?;
            let self_sup = overdamped_reference_self_error(pot, delta, horizon, seed, opts)?;
            let floor = FloorCheck::evaluate(curve.sup(), self_sup);
            Ok(DiscretizationRun { curve, floor: Some(floor) })
        }
    }
}

/// Self-error of the fine overdamped reference: fine step against its half,
/// same Brownian path.
fn overdamped_reference_self_error(
    pot: &PotentialSpec,
    delta: f64,
    horizon: f64,
    seed: u64,
    opts: &UlaOptions,
) -> Result<f64> {
    let (steps, stride) = chain_plan(delta, horizon)?;
    let n_points = record_times(delta, steps, stride).len();
    let factor = opts.fine_factor;
    let hf = delta / factor as f64;
    let hh = 0.5 * hf;
    let mut acc = Welford::new(n_points);
    map_trajectories_ordered(
        opts.floor_reps,
        |traj| {
            let mut stream = make_stream(seed, StreamId::new("ula-floor", traj, 0));
            let mut rec = vec![0.0; n_points];
            let (mut xf, mut xh) = (opts.x0, opts.x0);
            let sqrt2 = std::f64::consts::SQRT_2;
            let mut idx = 0;
            for k in 0..=steps {
                if k % stride == 0 || k == steps {
                    let d = xf - xh;
                    rec[idx] = d * d;
                    idx += 1;
                }
                if k == steps {
                    break;
                }
                for _ in 0..factor {
                    let d1 = hh.sqrt() * opts.noise_scale * stream.standard_normal();
                    let d2 = hh.sqrt() * opts.noise_scale * stream.standard_normal();
                    xh = xh - hh * pot.grad(xh) + sqrt2 * d1;
                    xh = xh - hh * pot.grad(xh) + sqrt2 * d2;
                    xf = xf - hf * pot.grad(xf) + sqrt2 * (d1 + d2);
                }
                if !(xf.is_finite() && xh.is_finite()) {
                    return Err(CoreError::Blowup { time_index: k as u64, trajectory: traj });
                }
            }
            Ok(rec)
        },
        |_, rec| acc.update(&rec),
    )?;
    Ok(acc.mean().iter().copied().fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy)]
pub struct UbuOptions {
    pub fine_factor: usize,
    pub floor_reps: u64,
    /// Zeroes the gradient kick; the splitting is then exact for the kinetic
    /// OU flow and the measured error is the reference's own.
    pub zero_gradient: bool,
}

impl Default for UbuOptions {
    fn default() -> Self {
        UbuOptions { fine_factor: 128, floor_reps: 200, zero_gradient: false }
    }
}

/// Projection of the U-half-step noise pair onto fine Brownian increments.
///
/// Over a half step of length `s = h/2` split into `j_half` fine intervals,
/// the exact pair is `eta_V = sqrt(2g) int e^{-g(s-u)} dB`,
/// `eta_X = sqrt(2g) int (1-e^{-g(s-u)})/g dB`. Conditioning on the fine
/// increments gives per-interval weights (the interval averages of the two
/// kernels); the conditional remainder is an independent Gaussian pair whose
/// covariance is the Ito-isometry covariance minus the projected part. Using
/// both keeps the scheme's transition law exact while coupling it as tightly
/// as possible to the fine reference path.
struct UStepReconstruction {
    wv: Vec<f64>,
    wx: Vec<f64>,
    m11: f64,
    m21: f64,
    m22: f64,
}

impl UStepReconstruction {
    fn new(gamma: f64, s: f64, j_half: usize) -> Self {
        let hf = s / j_half as f64;
        let mut wv = Vec::with_capacity(j_half);
        let mut wx = Vec::with_capacity(j_half);
        let root = (2.0 * gamma).sqrt();
        for j in 0..j_half {
            let u0 = j as f64 * hf;
            let u1 = (j + 1) as f64 * hf;
            // integral of e^{-gamma (s-u)} over [u0, u1]
            let a = ((-gamma * (s - u1)).exp() - (-gamma * (s - u0)).exp()) / gamma;
            let b = (hf - a) / gamma;
            wv.push(root * a / hf);
            wx.push(root * b / hf);
        }
        let (svv, svx, sxx) = crate::integrators::ubu_u_covariance(gamma, s);
        let mut pvv = 0.0;
        let mut pvx = 0.0;
        let mut pxx = 0.0;
        for j in 0..j_half {
            pvv += wv[j] * wv[j] * hf;
            pvx += wv[j] * wx[j] * hf;
            pxx += wx[j] * wx[j] * hf;
        }
        let rvv = (svv - pvv).max(0.0);
        let rvx = svx - pvx;
        let rxx = (sxx - pxx).max(0.0);
        let m11 = rvv.sqrt();
        let m21 = if m11 > 0.0 { rvx / m11 } else { 0.0 };
        let m22 = (rxx - m21 * m21).max(0.0).sqrt();
        UStepReconstruction { wv, wx, m11, m21, m22 }
    }

    /// Noise pair for one half step from the fine increments plus an
    /// independent residual pair of standard normals.
    #[inline]
    fn pair(&self, fine: &[f64], z1: f64, z2: f64) -> (f64, f64) {
        let mut pv = 0.0;
        let mut px = 0.0;
        for (j, db) in fine.iter().enumerate() {
            pv += self.wv[j] * db;
            px += self.wx[j] * db;
        }
        (pv + self.m11 * z1, px + self.m21 * z1 + self.m22 * z2)
    }
}

/// UBU chain coupled to a fine-grid Euler path of the kinetic system;
/// returns the joint squared error `E[|dx|^2 + |dv|^2]` at chain times.
pub fn ubu_strong_error(
    pot: &PotentialSpec,
    gamma: f64,
    delta: f64,
    horizon: f64,
    n_reps: u64,
    seed: u64,
) -> Result<DiscretizationRun> {
    ubu_strong_error_with(pot, gamma, delta, horizon, n_reps, seed, &UbuOptions::default())
}

pub fn ubu_strong_error_with(
    pot: &PotentialSpec,
    gamma: f64,
    delta: f64,
    horizon: f64,
    n_reps: u64,
    seed: u64,
    opts: &UbuOptions,
) -> Result<DiscretizationRun> {
    if !(gamma > 0.0) {
        return Err(CoreError::invalid(format!("UBU requires gamma > 0, got {gamma}")));
    }
    if opts.fine_factor < 2 || opts.fine_factor % 2 != 0 {
        return Err(CoreError::invalid("fine_factor must be an even integer >= 2"));
    }
    let (steps, stride) = chain_plan(delta, horizon)?;
    let times = record_times(delta, steps, stride);
    let n_points = times.len();
    let factor = opts.fine_factor;
    let j_half = factor / 2;
    let hf = delta / factor as f64;
    let s = 0.5 * delta;
    let kernel = UbuKernel::new(gamma, delta)?;
    let recon = UStepReconstruction::new(gamma, s, j_half);
    let grad = |x: f64| if opts.zero_gradient { 0.0 } else { pot.grad(x) };

    let mut acc = Welford::new(n_points);
    map_trajectories_ordered(
        n_reps,
        |traj| {
            let mut brownian = make_stream(seed, StreamId::new("ubu", traj, 0));
            let mut residual = make_stream(seed, StreamId::new("ubu", traj, 1));
            let mut rec = vec![0.0; n_points];
            let mut fine = vec![0.0; factor];
            let (mut xu, mut vu) = (0.0f64, 0.0f64);
            let (mut xr, mut vr) = (0.0f64, 0.0f64);
            let amp_f = hf.sqrt();
            let noise_r = (2.0 * gamma).sqrt();
            let mut idx = 0;
            for k in 0..=steps {
                if k % stride == 0 || k == steps {
                    let dx = xu - xr;
                    let dv = vu - vr;
                    rec[idx] = dx * dx + dv * dv;
                    idx += 1;
                }
                if k == steps {
                    break;
                }
                for db in fine.iter_mut() {
                    *db = amp_f * brownian.standard_normal();
                }
                // fine Euler reference across the whole coarse step
                for db in fine.iter() {
                    let ax = vr;
                    let av = -grad(xr) - gamma * vr;
                    xr += hf * ax;
                    vr += hf * av + noise_r * db;
                }
                // UBU: U half, B kick, U half, reconstructing the U-step
                // pairs from the same fine increments
                let (ev, ex) = recon.pair(&fine[..j_half], residual.standard_normal(), residual.standard_normal());
                kernel.u_half_with_noise(&mut xu, &mut vu, ev, ex);
                vu -= delta * grad(xu);
                let (ev, ex) = recon.pair(&fine[j_half..], residual.standard_normal(), residual.standard_normal());
                kernel.u_half_with_noise(&mut xu, &mut vu, ev, ex);
                if !(xu.is_finite() && vu.is_finite() && xr.is_finite() && vr.is_finite()) {
                    return Err(CoreError::Blowup { time_index: k as u64, trajectory: traj });
                }
            }
            Ok(rec)
        },
        |_, rec| acc.update(&rec),
    )?;
    let meta = CurveMeta { label: "ubu_strong_error".into(), sweep_value: delta, n_reps, seed };
    let curve = ErrorCurve::new(times, acc.mean().to_vec(), acc.std_errors(), meta)?;
    let self_sup = kinetic_reference_self_error(pot, gamma, delta, horizon, seed, opts)?;
    let floor = FloorCheck::evaluate(curve.sup(), self_sup);
    Ok(DiscretizationRun { curve, floor: Some(floor) })
}

/// Self-error of the fine kinetic Euler reference (step hf against hf/2,
/// shared path).
fn kinetic_reference_self_error(
    pot: &PotentialSpec,
    gamma: f64,
    delta: f64,
    horizon: f64,
    seed: u64,
    opts: &UbuOptions,
) -> Result<f64> {
    let (steps, stride) = chain_plan(delta, horizon)?;
    let n_points = record_times(delta, steps, stride).len();
    let factor = opts.fine_factor;
    let hf = delta / factor as f64;
    let hh = 0.5 * hf;
    let grad = |x: f64| if opts.zero_gradient { 0.0 } else { pot.grad(x) };
    let mut acc = Welford::new(n_points);
    map_trajectories_ordered(
        opts.floor_reps,
        |traj| {
            let mut brownian = make_stream(seed, StreamId::new("ubu-floor", traj, 0));
            let mut rec = vec![0.0; n_points];
            let (mut xf, mut vf) = (0.0f64, 0.0f64);
            let (mut xh, mut vh) = (0.0f64, 0.0f64);
            let amp_h = hh.sqrt();
            let noise_r = (2.0 * gamma).sqrt();
            let mut idx = 0;
            for k in 0..=steps {
                if k % stride == 0 || k == steps {
                    let dx = xf - xh;
                    let dv = vf - vh;
                    rec[idx] = dx * dx + dv * dv;
                    idx += 1;
                }
                if k == steps {
                    break;
                }
                for _ in 0..factor {
                    let d1 = amp_h * brownian.standard_normal();
                    let d2 = amp_h * brownian.standard_normal();
                    let step_half = |x: &mut f64, v: &mut f64, db: f64| {
                        let ax = *v;
                        let av = -grad(*x) - gamma * *v;
                        *x += hh * ax;
                        *v += hh * av + noise_r * db;
                    };
                    step_half(&mut xh, &mut vh, d1);
                    step_half(&mut xh, &mut vh, d2);
                    let ax = vf;
                    let av = -grad(xf) - gamma * vf;
                    xf += hf * ax;
                    vf += hf * av + noise_r * (d1 + d2);
                }
                if !(xf.is_finite() && vf.is_finite() && xh.is_finite() && vh.is_finite()) {
                    return Err(CoreError::Blowup { time_index: k as u64, trajectory: traj });
                }
            }
            Ok(rec)
        },
        |_, rec| acc.update(&rec),
    )?;
    Ok(acc.mean().iter().copied().fold(0.0, f64::max))
}

/// Unadjusted-HMC bias curve plus the exact-flow chain's position second
/// moment (for the measure-preservation check).
#[derive(Debug, Clone)]
pub struct HmcRun {
    pub curve: ErrorCurve,
    pub exact_second_moment: ErrorCurve,
}

/// Couples the leapfrog uHMC chain against the exact Hamiltonian-flow chain
/// on the Gaussian target `U = a x^2/2`, with identical momentum draws and
/// full refresh each step; returns `E|X_l - X_l^eps|^2` along the chain.
pub fn hmc_bias_curve(pot: &PotentialSpec, eps: f64, l: u32, chain_len: u32, n_reps: u64, seed: u64) -> Result<HmcRun> {
    let a = match pot {
        PotentialSpec::Quadratic { a } => *a,
        _ => return Err(CoreError::invalid("hmc_bias_curve requires the quadratic potential (exact flow is a rotation)")),
    };
    if l == 0 {
        return Err(CoreError::invalid("hmc_bias_curve requires l >= 1"));
    }
    if eps < 0.0 {
        return Err(CoreError::invalid(format!("hmc_bias_curve requires eps >= 0, got {eps}")));
    }
    let flow_time = eps * l as f64;
    if flow_time > 0.0 {
        let k = (flow_time / std::f64::consts::FRAC_PI_2).round();
        if k >= 1.0 && (flow_time - k * std::f64::consts::FRAC_PI_2).abs() < 1e-3 {
            return Err(CoreError::invalid(format!(
                "flow time eps*L = {flow_time} within 1e-3 of {k} * pi/2: exact chain is degenerate"
            )));
        }
    }
    let omega = a.sqrt();
    let (cos_t, sin_t) = ((omega * flow_time).cos(), (omega * flow_time).sin());
    let n_points = chain_len as usize + 1;
    let mut acc = Welford::new(2 * n_points);
    map_trajectories_ordered(
        n_reps,
        |traj| {
            let mut momenta = make_stream(seed, StreamId::new("hmc", traj, 0));
            let mut rec = vec![0.0; 2 * n_points];
            let (mut xe, mut xl) = (0.0f64, 0.0f64);
            for step in 0..=chain_len as usize {
                let d = xe - xl;
                rec[2 * step] = d * d;
                rec[2 * step + 1] = xe * xe;
                if step == chain_len as usize {
                    break;
                }
                let xi = momenta.standard_normal();
                // exact flow: rotation in (x, v/omega) coordinates
                xe = cos_t * xe + sin_t * xi / omega;
                // leapfrog with the same momentum
                let (mut x, mut v) = (xl, xi);
                for _ in 0..l {
                    v -= 0.5 * eps * a * x;
                    x += eps * v;
                    v -= 0.5 * eps * a * x;
                }
                xl = x;
                if !(xe.is_finite() && xl.is_finite()) {
                    return Err(CoreError::Blowup { time_index: step as u64, trajectory: traj });
                }
            }
            Ok(rec)
        },
        |_, rec| acc.update(&rec),
    )?;
    let times: Vec<f64> = (0..n_points).map(|k| k as f64 * flow_time).collect();
    let means = acc.mean().to_vec();
    let ses = acc.std_errors();
    let take = |c: usize| -> (Vec<f64>, Vec<f64>) {
        (
            (0..n_points).map(|i| means[2 * i + c]).collect(),
            (0..n_points).map(|i| ses[2 * i + c]).collect(),
        )
    };
    let (bv, bse) = take(0);
    let (mv, mse) = take(1);
    let meta = CurveMeta { label: "hmc_bias".into(), sweep_value: eps, n_reps, seed };
    let curve = ErrorCurve::new(times.clone(), bv, bse, meta)?;
    let meta2 = CurveMeta { label: "hmc_exact_second_moment".into(), sweep_value: eps, n_reps, seed };
    let exact_second_moment = ErrorCurve::new(times, mv, mse, meta2)?;
    Ok(HmcRun { curve, exact_second_moment })
}

/// Runs the matching strong-error experiment at each delta and fits
/// `log (sup RMS error)` against `log delta`. Any run flagged by the floor
/// rule aborts the fit.
pub fn order_of_convergence(
    scheme: &SchemeSpec,
    pot: &PotentialSpec,
    deltas: &[f64],
    horizon: f64,
    n_reps: u64,
    seed: u64,
) -> Result<RateFit> {
    let mut points = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let (sup_sq, floor) = match scheme {
            SchemeSpec::Ula => {
                let run = ula_strong_error(pot, delta, horizon, n_reps, seed)?;
                (run.curve.sup(), run.floor)
            }
            SchemeSpec::Ubu { gamma } => {
                let run = ubu_strong_error(pot, *gamma, delta, horizon, n_reps, seed)?;
                (run.curve.sup(), run.floor)
            }
            SchemeSpec::HmcUnadjusted { flow_time } => {
                let l = (flow_time / delta).round();
                if l < 1.0 || (flow_time / delta - l).abs() > 1e-9 {
                    return Err(CoreError::invalid(format!(
                        "flow_time {flow_time} is not an integer multiple of eps = {delta}"
                    )));
                }
                let chain_len = (horizon / flow_time).round().max(1.0) as u32;
                let run = hmc_bias_curve(pot, delta, l as u32, chain_len, n_reps, seed)?;
                (run.curve.sup(), None)
            }
        };
        if let Some(f) = floor {
            if !f.ok {
                return Err(CoreError::FitFailure(format!(
                    "run at delta = {delta} is flagged for reference-floor contamination \
                     (reported {:.3e} < 5 x self error {:.3e})",
                    f.reported_sup, f.self_error_sup
                )));
            }
        }
        points.push((delta, sup_sq.sqrt()));
    }
    fit_power_law(&points)
}

/// Fit hook for precomputed `(scale, sup RMS error)` points.
pub fn order_from_points(points: &[(f64, f64)]) -> Result<RateFit> {
    fit_power_law(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn potential_validation() {
        assert!(PotentialSpec::quadratic(0.0).is_err());
        assert!(PotentialSpec::perturbed_quadratic(1.0, 1.0).is_err());
        assert!(PotentialSpec::perturbed_quadratic(1.0, 0.3).is_ok());
        let p = PotentialSpec::perturbed_quadratic(2.0, -0.5).unwrap();
        assert!((p.grad(1.0) - (2.0 - 0.5 * 1.0f64.tanh())).abs() < 1e-15);
    }

    // Zero-noise one-step gap: |e^{-delta} - (1 - delta)| at x = 1,
    // delta = 0.5 is e^{-0.5} - 0.5 = 0.1065...
    #[test]
    fn ula_zero_noise_gap_is_euler_vs_exact() {
        let pot = PotentialSpec::quadratic(1.0).unwrap();
        let opts = UlaOptions { x0: 1.0, noise_scale: 0.0, ..Default::default() };
        let run = ula_strong_error_with(&pot, 0.5, 0.5, 100, 0, &opts).unwrap();
        let rms = run.curve.values.last().unwrap().sqrt();
        assert!((rms - 0.10653).abs() < 1e-4, "rms = {rms}");
        assert!(run.floor.is_none());
    }

    #[test]
    fn chain_budget_is_enforced() {
        let pot = PotentialSpec::quadratic(1.0).unwrap();
        let err = ula_strong_error(&pot, 1e-9, 100.0, 100, 0);
        assert!(matches!(err, Err(CoreError::BudgetExceeded { .. })));
    }

    #[test]
    fn hmc_requires_quadratic_and_guards_resonance() {
        let pot = PotentialSpec::perturbed_quadratic(1.0, 0.1).unwrap();
        assert!(hmc_bias_curve(&pot, 0.1, 10, 5, 100, 0).is_err());

        let pot = PotentialSpec::quadratic(1.0).unwrap();
        // eps*L = pi/2 within 1e-3
        let eps = std::f64::consts::FRAC_PI_2 / 10.0 + 1e-5;
        assert!(hmc_bias_curve(&pot, eps, 10, 5, 100, 0).is_err());
    }

    #[test]
    fn hmc_identity_chain_has_zero_error() {
        let pot = PotentialSpec::quadratic(1.0).unwrap();
        let run = hmc_bias_curve(&pot, 0.0, 1, 10, 100, 0).unwrap();
        assert!(run.curve.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn order_from_synthetic_points() {
        let fit = order_from_points(&[(0.1, 0.1), (0.01, 0.01)]).unwrap();
        assert!((fit.exponent - 1.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }
}
