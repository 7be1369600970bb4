//! Interacting particle systems and their nonlinear limit.
//!
//! The N-particle system
//! `dX^i = [-grad U(X^i) + (1/N) sum_j grad W(X^i - X^j)] dt + sqrt(2) dB^i`
//! is coupled to N i.i.d. copies of the limit process: same initial points,
//! same Brownian motion per index. The limit law is supplied either in
//! closed form (Gaussian closure for quadratic potentials) or by a frozen
//! proxy ensemble evolved alongside.

use crate::curve::{CurveMeta, ErrorCurve};
use crate::error::{CoreError, Result};
use crate::parallel::{map_trajectories_ordered, Welford};
use crate::rng::{make_stream, RngStream, StreamId};
use std::sync::Arc;

/// Scalar gradient field. The `Linear` variant covers the quadratic
/// potentials `c z^2 / 2` used by the benchmarks and keeps the O(N^2)
/// interaction loop free of dynamic dispatch.
#[derive(Clone)]
pub enum GradFn {
    Linear { coef: f64 },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl GradFn {
    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        match self {
            GradFn::Linear { coef } => coef * z,
            GradFn::Custom(f) => f(z),
        }
    }
}

impl std::fmt::Debug for GradFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GradFn::Linear { coef } => write!(f, "Linear({coef})"),
            GradFn::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Moments of the nonlinear limit law for quadratic confinement `a x^2/2`
/// and interaction `kappa z^2/2`, contractive for `kappa < a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianClosure {
    pub a: f64,
    pub kappa: f64,
    pub m0: f64,
    pub v0: f64,
}

impl GaussianClosure {
    pub fn new(a: f64, kappa: f64, m0: f64, v0: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(CoreError::invalid(format!("GaussianClosure requires a > 0, got {a}")));
        }
        if !(kappa < a) {
            return Err(CoreError::invalid(format!(
                "GaussianClosure requires kappa < a (contractive regime), got kappa = {kappa}, a = {a}"
            )));
        }
        if v0 < 0.0 {
            return Err(CoreError::invalid(format!("GaussianClosure requires v0 >= 0, got {v0}")));
        }
        Ok(GaussianClosure { a, kappa, m0, v0 })
    }
}

/// Closed-form mean and variance of the limit law at time `t`:
/// the mean decays as `m0 e^{-a t}` (the interaction vanishes in the mean)
/// and the variance solves `dV/dt = -2(a - kappa)V + 2`.
pub fn gaussian_closure_law(g: &GaussianClosure, t: f64) -> (f64, f64) {
    let mean = g.m0 * (-g.a * t).exp();
    let rate = 2.0 * (g.a - g.kappa);
    let v_inf = 1.0 / (g.a - g.kappa);
    let var = v_inf + (g.v0 - v_inf) * (-rate * t).exp();
    (mean, var)
}

/// Provider of the limit law for the nonlinear copies.
#[derive(Debug, Clone)]
pub enum LimitLaw {
    Closure(GaussianClosure),
    /// Frozen proxy ensemble of `m` particles co-evolved with the replicas.
    Proxy { m: usize },
}

/// The interacting particle model.
#[derive(Debug, Clone)]
pub struct ParticleModel {
    pub grad_confine: GradFn,
    pub grad_interact: GradFn,
    pub n: usize,
    pub limit_law: Option<LimitLaw>,
}

/// Particle-count budget for the direct O(N^2) interaction sums.
pub const MAX_PARTICLES: usize = 1024;

impl ParticleModel {
    pub fn new(grad_confine: GradFn, grad_interact: GradFn, n: usize, limit_law: Option<LimitLaw>) -> Result<Self> {
        if n < 2 {
            return Err(CoreError::invalid(format!("ParticleModel requires N >= 2, got {n}")));
        }
        if n > MAX_PARTICLES {
            return Err(CoreError::invalid(format!("ParticleModel capped at N <= {MAX_PARTICLES}, got {n}")));
        }
        // The interaction gradient must be odd so self-interaction vanishes.
        for z in [0.37, 0.9, 1.7, 2.45] {
            let asym = (grad_interact.eval(-z) + grad_interact.eval(z)).abs();
            if asym > 1e-12 * grad_interact.eval(z).abs().max(1.0) {
                return Err(CoreError::invalid(format!(
                    "grad_interact must be odd: |gW(-{z}) + gW({z})| = {asym}"
                )));
            }
        }
        Ok(ParticleModel { grad_confine, grad_interact, n, limit_law })
    }

    /// Quadratic benchmark `U = a x^2/2`, `W = kappa z^2/2`, starting from a
    /// point mass at the origin, with the Gaussian closure attached as the
    /// limit-law provider.
    pub fn quadratic(a: f64, kappa: f64, n: usize) -> Result<Self> {
        let closure = GaussianClosure::new(a, kappa, 0.0, 0.0)?;
        ParticleModel::new(
            GradFn::Linear { coef: a },
            GradFn::Linear { coef: kappa },
            n,
            Some(LimitLaw::Closure(closure)),
        )
    }
}

/// A snapshot of particle states.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub states: Vec<f64>,
    pub time: f64,
}

/// Mean-field drift of every particle: component `i` receives
/// `-grad U(x_i) + (1/N) sum_j grad W(x_i - x_j)` by direct summation
/// (the `j = i` term contributes zero by oddness).
pub fn particle_drift(model: &ParticleModel, ens: &Ensemble) -> Result<Vec<f64>> {
    if ens.states.len() != model.n {
        return Err(CoreError::invalid(format!(
            "ensemble has {} particles, model expects {}",
            ens.states.len(),
            model.n
        )));
    }
    let mut out = vec![0.0; model.n];
    drift_into(&model.grad_confine, &model.grad_interact, &ens.states, &mut out);
    crate::error::ensure_finite(&out, 0)?;
    Ok(out)
}

#[inline]
fn drift_into(grad_confine: &GradFn, grad_interact: &GradFn, xs: &[f64], out: &mut [f64]) {
    let n_inv = 1.0 / xs.len() as f64;
    match grad_interact {
        GradFn::Linear { coef } => {
            for (i, xi) in xs.iter().enumerate() {
                let mut s = 0.0;
                for xj in xs {
                    s += xi - xj;
                }
                out[i] = -grad_confine.eval(*xi) + coef * n_inv * s;
            }
        }
        GradFn::Custom(f) => {
            for (i, xi) in xs.iter().enumerate() {
                let mut s = 0.0;
                for xj in xs {
                    s += f(xi - xj);
                }
                out[i] = -grad_confine.eval(*xi) + n_inv * s;
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PocOptions {
    pub h: f64,
    pub max_out_points: usize,
}

impl Default for PocOptions {
    fn default() -> Self {
        PocOptions { h: 1e-3, max_out_points: 200 }
    }
}

/// Propagation-of-chaos run: the averaged squared coupling distance
/// `N^{-1} sum_i E|Xbar^i - X^{i,N}|^2` over time, plus the interacting
/// ensemble's mean and variance traces for limit-law checks.
#[derive(Debug, Clone)]
pub struct PocRun {
    pub curve: ErrorCurve,
    pub ensemble_mean: ErrorCurve,
    pub ensemble_var: ErrorCurve,
}

struct StepPlan {
    h: f64,
    n_steps: usize,
    stride: usize,
    times: Vec<f64>,
}

fn plan_steps(h_target: f64, horizon: f64, max_out_points: usize) -> StepPlan {
    let n_steps = (horizon / h_target).ceil().max(1.0) as usize;
    let h = horizon / n_steps as f64;
    let stride = ((n_steps + max_out_points - 1) / max_out_points.max(1)).max(1);
    let mut times = Vec::new();
    let mut k = 0;
    while k <= n_steps {
        times.push(k as f64 * h);
        k += stride;
    }
    if n_steps % stride != 0 {
        times.push(horizon);
    }
    StepPlan { h, n_steps, stride, times }
}

/// Couples the N-particle system to N i.i.d. nonlinear copies driven by the
/// registered limit law. Requires a limit-law provider on the model.
pub fn simulate_poc_error(model: &ParticleModel, horizon: f64, n_reps: u64, seed: u64) -> Result<PocRun> {
    simulate_poc_error_with(model, horizon, n_reps, seed, &PocOptions::default())
}

pub fn simulate_poc_error_with(
    model: &ParticleModel,
    horizon: f64,
    n_reps: u64,
    seed: u64,
    opts: &PocOptions,
) -> Result<PocRun> {
    if !(horizon > 0.0) {
        return Err(CoreError::invalid("horizon must be positive"));
    }
    match &model.limit_law {
        None => Err(CoreError::Configuration(
            "simulate_poc_error requires a registered limit-law provider (Gaussian closure or proxy ensemble)".into(),
        )),
        Some(LimitLaw::Closure(g)) => {
            check_closure_consistency(model, g)?;
            poc_with_closure(model, *g, horizon, n_reps, seed, opts)
        }
        Some(LimitLaw::Proxy { m }) => poc_with_proxy(model, *m, horizon, n_reps, seed, opts),
    }
}

fn check_closure_consistency(model: &ParticleModel, g: &GaussianClosure) -> Result<()> {
    match (&model.grad_confine, &model.grad_interact) {
        (GradFn::Linear { coef: a }, GradFn::Linear { coef: k }) => {
            if (a - g.a).abs() > 1e-12 || (k - g.kappa).abs() > 1e-12 {
                return Err(CoreError::Configuration(format!(
                    "Gaussian closure (a = {}, kappa = {}) does not match the model potentials (a = {a}, kappa = {k})",
                    g.a, g.kappa
                )));
            }
            Ok(())
        }
        _ => Err(CoreError::Configuration(
            "the Gaussian closure is only valid for quadratic confinement and interaction".into(),
        )),
    }
}

fn poc_with_closure(
    model: &ParticleModel,
    g: GaussianClosure,
    horizon: f64,
    n_reps: u64,
    seed: u64,
    opts: &PocOptions,
) -> Result<PocRun> {
    let plan = plan_steps(opts.h, horizon, opts.max_out_points);
    let n = model.n;
    let n_points = plan.times.len();
    // mean drift of the nonlinear copy: -a y + kappa (y - m_t)
    let means: Vec<f64> = (0..plan.n_steps).map(|k| g.m0 * (-g.a * (k as f64 * plan.h)).exp()).collect();

    let mut acc = Welford::new(3 * n_points);
    map_trajectories_ordered(
        n_reps,
        |replica| {
            let mut streams: Vec<RngStream> =
                (0..n).map(|i| make_stream(seed, StreamId::new("mf-poc", replica, i as u32))).collect();
            let mut xs = init_states(&g, &mut streams);
            let mut ys = xs.clone();
            let mut drift = vec![0.0; n];
            let mut rec = vec![0.0; 3 * n_points];
            let h = plan.h;
            let amp = (2.0 * h).sqrt();
            let mut idx = 0;
            for k in 0..=plan.n_steps {
                if k % plan.stride == 0 || k == plan.n_steps {
                    record(&xs, &ys, &mut rec, idx);
                    idx += 1;
                }
                if k == plan.n_steps {
                    break;
                }
                drift_into(&model.grad_confine, &model.grad_interact, &xs, &mut drift);
                let m_t = means[k];
                let mut ok = true;
                for i in 0..n {
                    let db = amp * streams[i].standard_normal();
                    xs[i] = xs[i] + h * drift[i] + db;
                    let y = ys[i];
                    let dy = -g.a * y + g.kappa * (y - m_t);
                    ys[i] = y + h * dy + db;
                    ok &= xs[i].is_finite() && ys[i].is_finite();
                }
                if !ok {
                    return Err(CoreError::Blowup { time_index: k as u64, trajectory: replica });
                }
            }
            Ok(rec)
        },
        |_, rec| acc.update(&rec),
    )?;
    build_poc_run(model, n_reps, seed, plan.times, acc)
}

fn init_states(g: &GaussianClosure, streams: &mut [RngStream]) -> Vec<f64> {
    if g.v0 > 0.0 {
        let sd = g.v0.sqrt();
        streams.iter_mut().map(|s| g.m0 + sd * s.standard_normal()).collect()
    } else {
        vec![g.m0; streams.len()]
    }
}

#[inline]
fn record(xs: &[f64], ys: &[f64], rec: &mut [f64], idx: usize) {
    let n = xs.len() as f64;
    let mut sq = 0.0;
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let d = y - x;
        sq += d * d;
        sum += x;
        sumsq += x * x;
    }
    let mean = sum / n;
    rec[3 * idx] = sq / n;
    rec[3 * idx + 1] = mean;
    rec[3 * idx + 2] = (sumsq / n - mean * mean).max(0.0) * n / (n - 1.0);
}

fn build_poc_run(model: &ParticleModel, n_reps: u64, seed: u64, times: Vec<f64>, acc: Welford) -> Result<PocRun> {
    let n_points = times.len();
    let means = acc.mean().to_vec();
    let ses = acc.std_errors();
    let take = |c: usize| -> (Vec<f64>, Vec<f64>) {
        (
            (0..n_points).map(|i| means[3 * i + c]).collect(),
            (0..n_points).map(|i| ses[3 * i + c]).collect(),
        )
    };
    let meta = |label: &str| CurveMeta {
        label: label.into(),
        sweep_value: model.n as f64,
        n_reps,
        seed,
    };
    let (cv, cse) = take(0);
    let curve = ErrorCurve::new(times.clone(), cv, cse, meta("poc_error"))?;
    let (mv, mse) = take(1);
    let ensemble_mean = ErrorCurve::new(times.clone(), mv, mse, meta("ensemble_mean"))?;
    let (vv, vse) = take(2);
    let ensemble_var = ErrorCurve::new(times, vv, vse, meta("ensemble_var"))?;
    Ok(PocRun { curve, ensemble_mean, ensemble_var })
}

fn poc_with_proxy(
    model: &ParticleModel,
    m: usize,
    horizon: f64,
    n_reps: u64,
    seed: u64,
    opts: &PocOptions,
) -> Result<PocRun> {
    if m < 16 * model.n {
        return Err(CoreError::Configuration(format!(
            "proxy ensemble must satisfy M >= 16 N, got M = {m}, N = {}",
            model.n
        )));
    }
    let plan = plan_steps(opts.h, horizon, opts.max_out_points);
    let n = model.n;
    let n_points = plan.times.len();
    let h = plan.h;
    let amp = (2.0 * h).sqrt();

    let mut proxy: Vec<f64> = vec![0.0; m];
    let mut proxy_streams: Vec<RngStream> =
        (0..m).map(|j| make_stream(seed, StreamId::new("mf-proxy", 0, j as u32))).collect();
    let mut proxy_drift = vec![0.0; m];

    struct Replica {
        xs: Vec<f64>,
        ys: Vec<f64>,
        drift: Vec<f64>,
        streams: Vec<RngStream>,
        rec: Vec<f64>,
        idx: usize,
        failed: Option<u64>,
    }
    let mut replicas: Vec<Replica> = (0..n_reps)
        .map(|r| Replica {
            xs: vec![0.0; n],
            ys: vec![0.0; n],
            drift: vec![0.0; n],
            streams: (0..n).map(|i| make_stream(seed, StreamId::new("mf-poc", r, i as u32))).collect(),
            rec: vec![0.0; 3 * n_points],
            idx: 0,
            failed: None,
        })
        .collect();

    use rayon::prelude::*;
    for k in 0..=plan.n_steps {
        let at_record = k % plan.stride == 0 || k == plan.n_steps;
        let proxy_ref: &[f64] = &proxy;
        replicas.par_iter_mut().for_each(|rep| {
            if rep.failed.is_some() {
                return;
            }
            if at_record {
                let idx = rep.idx;
                record(&rep.xs, &rep.ys, &mut rep.rec, idx);
                rep.idx += 1;
            }
            if k == plan.n_steps {
                return;
            }
            let mut drift = std::mem::take(&mut rep.drift);
            drift_into(&model.grad_confine, &model.grad_interact, &rep.xs, &mut drift);
            let m_inv = 1.0 / m as f64;
            let mut ok = true;
            for i in 0..n {
                let db = amp * rep.streams[i].standard_normal();
                rep.xs[i] = rep.xs[i] + h * drift[i] + db;
                // nonlinear copy against the frozen proxy law, by direct sum
                let y = rep.ys[i];
                let mut s = 0.0;
                for z in proxy_ref {
                    s += model.grad_interact.eval(y - z);
                }
                let dy = -model.grad_confine.eval(y) + m_inv * s;
                rep.ys[i] = y + h * dy + db;
                ok &= rep.xs[i].is_finite() && rep.ys[i].is_finite();
            }
            if !ok {
                rep.failed = Some(k as u64);
            }
            rep.drift = drift;
        });
        if k == plan.n_steps {
            break;
        }
        // advance the proxy after the replicas consumed its time-k state
        drift_into(&model.grad_confine, &model.grad_interact, &proxy, &mut proxy_drift);
        for (j, z) in proxy.iter_mut().enumerate() {
            *z += h * proxy_drift[j] + amp * proxy_streams[j].standard_normal();
        }
    }
    for (r, rep) in replicas.iter().enumerate() {
        if let Some(step) = rep.failed {
            return Err(CoreError::Blowup { time_index: step, trajectory: r as u64 });
        }
    }
    let mut acc = Welford::new(3 * n_points);
    for rep in &replicas {
        acc.update(&rep.rec);
    }
    build_poc_run(model, n_reps, seed, plan.times, acc)
}

/// Moment traces of a frozen proxy ensemble evolved as an interacting system.
#[derive(Debug, Clone)]
pub struct ProxyMoments {
    pub times: Vec<f64>,
    pub means: Vec<f64>,
    pub vars: Vec<f64>,
}

/// Evolves `m >= 16 N` particles as one interacting system and records the
/// empirical mean and variance of its state over time; this empirical law
/// stands in for the limit law when no closed form exists.
pub fn proxy_limit_ensemble(model: &ParticleModel, m: usize, horizon: f64, seed: u64) -> Result<ProxyMoments> {
    if m < 16 * model.n {
        return Err(CoreError::Configuration(format!(
            "proxy ensemble must satisfy M >= 16 N, got M = {m}, N = {}",
            model.n
        )));
    }
    let opts = PocOptions::default();
    let plan = plan_steps(opts.h, horizon, opts.max_out_points);
    let mut zs = vec![0.0; m];
    let mut streams: Vec<RngStream> =
        (0..m).map(|j| make_stream(seed, StreamId::new("mf-proxy", 0, j as u32))).collect();
    let mut drift = vec![0.0; m];
    let mut means = Vec::with_capacity(plan.times.len());
    let mut vars = Vec::with_capacity(plan.times.len());
    let h = plan.h;
    let amp = (2.0 * h).sqrt();
    for k in 0..=plan.n_steps {
        if k % plan.stride == 0 || k == plan.n_steps {
            let mean = zs.iter().sum::<f64>() / m as f64;
            let var = zs.iter().map(|z| (z - mean) * (z - mean)).sum::<f64>() / (m as f64 - 1.0);
            means.push(mean);
            vars.push(var);
        }
        if k == plan.n_steps {
            break;
        }
        drift_into(&model.grad_confine, &model.grad_interact, &zs, &mut drift);
        for (j, z) in zs.iter_mut().enumerate() {
            *z += h * drift[j] + amp * streams[j].standard_normal();
        }
        crate::error::ensure_finite(&zs, k as u64)?;
    }
    Ok(ProxyMoments { times: plan.times, means, vars })
}

/// Evolves the interacting system from explicit initial states, one noise
/// stream per slot selected by `roles`; returns per-slot paths sampled every
/// step. Exchangeability means permuting (initial state, role) pairs permutes
/// the returned paths.
pub fn evolve_interacting_paths(
    model: &ParticleModel,
    init: &[f64],
    roles: &[u32],
    h: f64,
    n_steps: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if init.len() != model.n || roles.len() != model.n {
        return Err(CoreError::invalid("init and roles must match the model particle count"));
    }
    let mut xs = init.to_vec();
    let mut streams: Vec<RngStream> =
        roles.iter().map(|r| make_stream(seed, StreamId::new("mf-paths", 0, *r))).collect();
    let mut drift = vec![0.0; model.n];
    let mut paths: Vec<Vec<f64>> = (0..model.n).map(|i| vec![init[i]]).collect();
    let amp = (2.0 * h).sqrt();
    for k in 0..n_steps {
        drift_into(&model.grad_confine, &model.grad_interact, &xs, &mut drift);
        for i in 0..model.n {
            xs[i] += h * drift[i] + amp * streams[i].standard_normal();
            paths[i].push(xs[i]);
        }
        crate::error::ensure_finite(&xs, k as u64)?;
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn particle_drift_hand_sum() {
        // ens = (1, -1), a = 1, kappa = 0.5: drift = (-0.5, 0.5).
        let model = ParticleModel::quadratic(1.0, 0.5, 2).unwrap();
        let ens = Ensemble { states: vec![1.0, -1.0], time: 0.0 };
        let d = particle_drift(&model, &ens).unwrap();
        assert!((d[0] + 0.5).abs() < 1e-15);
        assert!((d[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn equal_particles_feel_no_interaction() {
        let model = ParticleModel::quadratic(1.0, 0.5, 4).unwrap();
        let ens = Ensemble { states: vec![0.7; 4], time: 0.0 };
        let d = particle_drift(&model, &ens).unwrap();
        for di in d {
            assert!((di + 0.7).abs() < 1e-15);
        }
    }

    #[test]
    fn kappa_zero_gives_independent_ou_drifts() {
        let model = ParticleModel::quadratic(1.0, 0.0, 3).unwrap();
        let ens = Ensemble { states: vec![1.0, -2.0, 0.5], time: 0.0 };
        let d = particle_drift(&model, &ens).unwrap();
        assert_eq!(d, vec![-1.0, 2.0, -0.5]);
    }

    #[test]
    fn model_rejects_even_interaction_gradient() {
        let bad = GradFn::Custom(Arc::new(|z: f64| z * z));
        assert!(ParticleModel::new(GradFn::Linear { coef: 1.0 }, bad, 4, None).is_err());
    }

    #[test]
    fn closure_law_examples() {
        let g = GaussianClosure::new(1.0, 0.5, 0.3, 0.7).unwrap();
        assert_eq!(gaussian_closure_law(&g, 0.0), (0.3, 0.7));

        let g = GaussianClosure::new(1.0, 0.5, 1.0, 0.0).unwrap();
        let (m, v) = gaussian_closure_law(&g, 60.0);
        assert!(m.abs() < 1e-20);
        assert!((v - 2.0).abs() < 1e-12);

        let g = GaussianClosure::new(1.0, 0.0, 0.0, 0.0).unwrap();
        let (_, v) = gaussian_closure_law(&g, 50.0);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closure_rejects_non_contractive_regime() {
        assert!(GaussianClosure::new(1.0, 1.0, 0.0, 0.0).is_err());
        assert!(GaussianClosure::new(1.0, 1.5, 0.0, 0.0).is_err());
    }

    #[test]
    fn poc_requires_provider_and_proxy_size() {
        let model = ParticleModel::new(GradFn::Linear { coef: 1.0 }, GradFn::Linear { coef: 0.5 }, 4, None).unwrap();
        assert!(matches!(simulate_poc_error(&model, 1.0, 100, 0), Err(CoreError::Configuration(_))));
        assert!(matches!(proxy_limit_ensemble(&model, 4, 1.0, 0), Err(CoreError::Configuration(_))));
    }

    #[test]
    fn kappa_zero_coupling_is_exact() {
        // No interaction: the pair shares drift and noise, so the coupled
        // error is identically zero.
        let model = ParticleModel::quadratic(1.0, 0.0, 8).unwrap();
        let run = simulate_poc_error_with(&model, 0.5, 100, 3, &PocOptions { h: 1e-2, max_out_points: 50 }).unwrap();
        assert!(run.curve.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn permuting_particles_permutes_paths() {
        let model = ParticleModel::quadratic(1.0, 0.5, 4).unwrap();
        let init = [0.3, -1.2, 0.9, 2.0];
        let roles = [0u32, 1, 2, 3];
        let base = evolve_interacting_paths(&model, &init, &roles, 1e-3, 10, 11).unwrap();
        for perm in [[2usize, 0, 3, 1], [3, 2, 1, 0]] {
            let p_init: Vec<f64> = perm.iter().map(|&i| init[i]).collect();
            let p_roles: Vec<u32> = perm.iter().map(|&i| roles[i]).collect();
            let permuted = evolve_interacting_paths(&model, &p_init, &p_roles, 1e-3, 10, 11).unwrap();
            for (slot, &orig) in perm.iter().enumerate() {
                for (a, b) in permuted[slot].iter().zip(&base[orig]) {
                    assert!((a - b).abs() < 1e-12, "slot {slot} diverged: {a} vs {b}");
                }
            }
        }
    }
}
