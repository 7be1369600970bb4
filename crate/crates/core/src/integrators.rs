//! One-step integration kernels.
//!
//! All kernels are pure: the caller supplies the noise, so the same inputs
//! always produce the same outputs. Additive noise only — diffusion matrices
//! are constant.

use crate::error::{ensure_finite, CoreError, Result};
use crate::rng::RngStream;
use std::sync::Arc;

type VecField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Drift/diffusion description of `dX = b(X) dt + sigma dW` with constant
/// `sigma`.
#[derive(Clone)]
pub struct SdeModel {
    pub dim: usize,
    drift: VecField,
    diffusion: Vec<f64>, // dim x dim, row-major
    pub label: String,
}

impl SdeModel {
    pub fn new(dim: usize, drift: VecField, diffusion: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if dim == 0 {
            return Err(CoreError::invalid("SdeModel requires dim >= 1"));
        }
        if diffusion.len() != dim * dim {
            return Err(CoreError::invalid(format!(
                "diffusion must be {dim}x{dim}, got {} entries",
                diffusion.len()
            )));
        }
        if !diffusion.iter().all(|v| v.is_finite()) {
            return Err(CoreError::invalid("diffusion entries must be finite"));
        }
        Ok(SdeModel { dim, drift, diffusion, label: label.into() })
    }

    /// One-dimensional model with scalar drift and noise amplitude.
    pub fn scalar(drift: impl Fn(f64) -> f64 + Send + Sync + 'static, sigma: f64, label: impl Into<String>) -> Result<Self> {
        SdeModel::new(1, Arc::new(move |x, out| out[0] = drift(x[0])), vec![sigma], label)
    }

    #[inline]
    pub fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        (self.drift)(x, out);
    }

    pub fn diffusion(&self) -> &[f64] {
        &self.diffusion
    }
}

impl std::fmt::Debug for SdeModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SdeModel").field("dim", &self.dim).field("label", &self.label).finish()
    }
}

/// Euler-Maruyama update `x + b(x) dt + sigma dW`, writing into `out`.
/// `scratch` holds the drift evaluation; both must have the model dimension.
pub fn euler_step_into(m: &SdeModel, x: &[f64], dt: f64, dw: &[f64], scratch: &mut [f64], out: &mut [f64]) -> Result<()> {
    m.drift_into(x, scratch);
    ensure_finite(scratch, 0)?;
    let d = m.dim;
    for i in 0..d {
        let mut noise = 0.0;
        for j in 0..d {
            noise += m.diffusion[i * d + j] * dw[j];
        }
        out[i] = x[i] + scratch[i] * dt + noise;
    }
    ensure_finite(out, 0)
}

/// Euler-Maruyama update `x + b(x) dt + sigma dW`.
pub fn euler_step(m: &SdeModel, x: &[f64], dt: f64, dw: &[f64]) -> Result<Vec<f64>> {
    if x.len() != m.dim || dw.len() != m.dim {
        return Err(CoreError::invalid(format!(
            "euler_step dimension mismatch: model dim {}, state {}, noise {}",
            m.dim,
            x.len(),
            dw.len()
        )));
    }
    if !(dt > 0.0) {
        return Err(CoreError::invalid(format!("euler_step requires dt > 0, got {dt}")));
    }
    let mut scratch = vec![0.0; m.dim];
    let mut out = vec![0.0; m.dim];
    euler_step_into(m, x, dt, dw, &mut scratch, &mut out)?;
    Ok(out)
}

/// Parameters of an Ornstein-Uhlenbeck process
/// `dX = -theta (X - mean) dt + sigma dW`.
#[derive(Debug, Clone, PartialEq)]
pub struct OuParams {
    pub theta: f64,
    pub mean: Vec<f64>,
    pub sigma: f64,
}

impl OuParams {
    pub fn new(theta: f64, mean: Vec<f64>, sigma: f64) -> Result<Self> {
        if !(theta > 0.0) {
            return Err(CoreError::invalid(format!("OuParams requires theta > 0, got {theta}")));
        }
        if sigma < 0.0 {
            return Err(CoreError::invalid(format!("OuParams requires sigma >= 0, got {sigma}")));
        }
        Ok(OuParams { theta, mean, sigma })
    }

    pub fn scalar(theta: f64, mean: f64, sigma: f64) -> Result<Self> {
        OuParams::new(theta, vec![mean], sigma)
    }

    /// Conditional standard deviation of the exact transition over `dt`.
    #[inline]
    pub fn transition_std(&self, dt: f64) -> f64 {
        // sigma * sqrt((1 - e^{-2 theta dt}) / (2 theta))
        self.sigma * ((-(-2.0 * self.theta * dt).exp_m1()) / (2.0 * self.theta)).sqrt()
    }
}

/// Exact Gaussian transition of the OU process over `dt`, driven by a
/// standard normal vector `xi`.
pub fn exact_ou_step(p: &OuParams, x: &[f64], dt: f64, xi: &[f64]) -> Result<Vec<f64>> {
    if x.len() != p.mean.len() || xi.len() != p.mean.len() {
        return Err(CoreError::invalid("exact_ou_step dimension mismatch"));
    }
    if dt < 0.0 {
        return Err(CoreError::invalid(format!("exact_ou_step requires dt >= 0, got {dt}")));
    }
    let decay = (-p.theta * dt).exp();
    let std = p.transition_std(dt);
    let out: Vec<f64> = x
        .iter()
        .zip(&p.mean)
        .zip(xi)
        .map(|((xi_, m), z)| m + decay * (xi_ - m) + std * z)
        .collect();
    ensure_finite(&out, 0)?;
    Ok(out)
}

#[inline]
pub fn exact_ou_step_scalar(decay: f64, std: f64, mean: f64, x: f64, xi: f64) -> f64 {
    mean + decay * (x - mean) + std * xi
}

/// Kinetic Langevin model `dX = V dt`, `dV = -grad U(X) dt - gamma V dt
/// + sqrt(2 gamma) dB`.
#[derive(Clone)]
pub struct KineticModel {
    pub dim: usize,
    grad_potential: VecField,
    pub gamma: f64,
}

impl KineticModel {
    pub fn new(dim: usize, grad_potential: VecField, gamma: f64) -> Result<Self> {
        if dim == 0 {
            return Err(CoreError::invalid("KineticModel requires dim >= 1"));
        }
        if !(gamma > 0.0) {
            return Err(CoreError::invalid(format!("KineticModel requires gamma > 0, got {gamma}")));
        }
        Ok(KineticModel { dim, grad_potential, gamma })
    }

    pub fn scalar(grad: impl Fn(f64) -> f64 + Send + Sync + 'static, gamma: f64) -> Result<Self> {
        KineticModel::new(1, Arc::new(move |x, out| out[0] = grad(x[0])), gamma)
    }

    #[inline]
    pub fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        (self.grad_potential)(x, out);
    }
}

impl std::fmt::Debug for KineticModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KineticModel").field("dim", &self.dim).field("gamma", &self.gamma).finish()
    }
}

/// Covariance of the exact free Langevin (OU) flow over time `s`:
/// with `eta_V = sqrt(2 gamma) int_0^s e^{-gamma(s-u)} dB_u` and
/// `eta_X = sqrt(2 gamma) int_0^s (1 - e^{-gamma(s-u)})/gamma dB_u`,
/// returns `(Var eta_V, Cov(eta_V, eta_X), Var eta_X)` from the Ito isometry:
///
/// ```text
/// Var eta_V = 1 - e^{-2 gamma s}
/// Cov       = (1 - e^{-gamma s})^2 / gamma
/// Var eta_X = (2/gamma) (s - 2(1 - e^{-gamma s})/gamma + (1 - e^{-2 gamma s})/(2 gamma))
/// ```
pub fn ubu_u_covariance(gamma: f64, s: f64) -> (f64, f64, f64) {
    let em1 = (-gamma * s).exp_m1(); // e^{-gamma s} - 1
    let em2 = (-2.0 * gamma * s).exp_m1();
    let svv = -em2;
    let svx = em1 * em1 / gamma;
    let x = gamma * s;
    let sxx = if x < 1e-3 {
        // series for the cancellation-prone bracket
        2.0 * gamma * s * s * s * (1.0 / 3.0 - x / 4.0 + 7.0 * x * x / 60.0)
    } else {
        (2.0 / gamma) * (s + 2.0 * em1 / gamma - em2 / (2.0 * gamma))
    };
    (svv, svx, sxx)
}

/// Precomputed half-step coefficients for the UBU splitting at step `h`.
#[derive(Debug, Clone, Copy)]
pub struct UbuKernel {
    pub gamma: f64,
    pub h: f64,
    pub decay: f64,    // e^{-gamma h/2}
    pub pos_coef: f64, // (1 - e^{-gamma h/2}) / gamma
    l11: f64,
    l21: f64,
    l22: f64,
}

impl UbuKernel {
    pub fn new(gamma: f64, h: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(CoreError::invalid(format!("UBU requires gamma > 0, got {gamma}")));
        }
        if h < 0.0 {
            return Err(CoreError::invalid(format!("UBU requires h >= 0, got {h}")));
        }
        let s = 0.5 * h;
        let (svv, svx, sxx) = ubu_u_covariance(gamma, s);
        let l11 = svv.sqrt();
        let l21 = if l11 > 0.0 { svx / l11 } else { 0.0 };
        let l22 = (sxx - l21 * l21).max(0.0).sqrt();
        Ok(UbuKernel {
            gamma,
            h,
            decay: (-gamma * s).exp(),
            pos_coef: -(-gamma * s).exp_m1() / gamma,
            l11,
            l21,
            l22,
        })
    }

    /// Exact half-step of the free flow `dX = V dt, dV = -gamma V dt +
    /// sqrt(2 gamma) dB`, per coordinate, driven by two standard normals.
    #[inline]
    pub fn u_half(&self, x: &mut f64, v: &mut f64, z1: f64, z2: f64) {
        let eta_v = self.l11 * z1;
        let eta_x = self.l21 * z1 + self.l22 * z2;
        *x += self.pos_coef * *v + eta_x;
        *v = self.decay * *v + eta_v;
    }

    /// Half-step with externally supplied correlated noise pair
    /// `(eta_V, eta_X)` (used when the pair is reconstructed from a shared
    /// fine Brownian path).
    #[inline]
    pub fn u_half_with_noise(&self, x: &mut f64, v: &mut f64, eta_v: f64, eta_x: f64) {
        *x += self.pos_coef * *v + eta_x;
        *v = self.decay * *v + eta_v;
    }
}

/// One UBU step: exact OU half-flow, gradient kick `v -= h grad U(x)`, exact
/// OU half-flow. `first` and `second` carry one standard-normal pair per
/// coordinate for the two half-flows.
pub fn ubu_step(
    m: &KineticModel,
    x: &[f64],
    v: &[f64],
    h: f64,
    first: &[[f64; 2]],
    second: &[[f64; 2]],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if x.len() != m.dim || v.len() != m.dim || first.len() != m.dim || second.len() != m.dim {
        return Err(CoreError::invalid("ubu_step dimension mismatch"));
    }
    let kernel = UbuKernel::new(m.gamma, h)?;
    let mut xs = x.to_vec();
    let mut vs = v.to_vec();
    let mut grad = vec![0.0; m.dim];
    for i in 0..m.dim {
        kernel.u_half(&mut xs[i], &mut vs[i], first[i][0], first[i][1]);
    }
    m.grad_into(&xs, &mut grad);
    ensure_finite(&grad, 0)?;
    for i in 0..m.dim {
        vs[i] -= h * grad[i];
        kernel.u_half(&mut xs[i], &mut vs[i], second[i][0], second[i][1]);
    }
    ensure_finite(&xs, 0)?;
    ensure_finite(&vs, 0)?;
    Ok((xs, vs))
}

/// Leapfrog (velocity Verlet) integration: kick-drift-kick iterated `l`
/// times. Volume-preserving and time-reversible.
pub fn leapfrog(
    grad_potential: &dyn Fn(&[f64], &mut [f64]),
    x: &[f64],
    v: &[f64],
    eps: f64,
    l: u32,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if l == 0 {
        return Err(CoreError::invalid("leapfrog requires l >= 1"));
    }
    if eps < 0.0 {
        return Err(CoreError::invalid(format!("leapfrog requires eps >= 0, got {eps}")));
    }
    let dim = x.len();
    let mut xs = x.to_vec();
    let mut vs = v.to_vec();
    let mut grad = vec![0.0; dim];
    grad_potential(&xs, &mut grad);
    ensure_finite(&grad, 0)?;
    for step in 0..l {
        for i in 0..dim {
            vs[i] -= 0.5 * eps * grad[i];
        }
        for i in 0..dim {
            xs[i] += eps * vs[i];
        }
        grad_potential(&xs, &mut grad);
        ensure_finite(&grad, step as u64)?;
        for i in 0..dim {
            vs[i] -= 0.5 * eps * grad[i];
        }
    }
    ensure_finite(&xs, l as u64)?;
    ensure_finite(&vs, l as u64)?;
    Ok((xs, vs))
}

/// One unadjusted HMC update with full momentum refresh: draws `v ~ N(0, I)`
/// from the stream, runs leapfrog, and returns the new position. No
/// accept/reject step.
pub fn hmc_kernel(
    grad_potential: &dyn Fn(&[f64], &mut [f64]),
    x: &[f64],
    eps: f64,
    l: u32,
    stream: &mut RngStream,
) -> Result<Vec<f64>> {
    let v: Vec<f64> = (0..x.len()).map(|_| stream.standard_normal()).collect();
    hmc_kernel_with_momentum(grad_potential, x, &v, eps, l)
}

/// The HMC update with the momentum supplied by the caller.
pub fn hmc_kernel_with_momentum(
    grad_potential: &dyn Fn(&[f64], &mut [f64]),
    x: &[f64],
    v: &[f64],
    eps: f64,
    l: u32,
) -> Result<Vec<f64>> {
    let (xs, _) = leapfrog(grad_potential, x, v, eps, l)?;
    Ok(xs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ou_model() -> SdeModel {
        SdeModel::scalar(|x| -x, std::f64::consts::SQRT_2, "ou").unwrap()
    }

    #[test]
    fn euler_zero_noise_linear_step() {
        let m = ou_model();
        let out = euler_step(&m, &[1.0], 0.1, &[0.0]).unwrap();
        assert!((out[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn euler_hand_evaluated_recursion() {
        let m = ou_model();
        let out = euler_step(&m, &[1.0], 0.1, &[0.3162]).unwrap();
        let expect = 0.9 + std::f64::consts::SQRT_2 * 0.3162;
        assert!((out[0] - expect).abs() < 1e-15);
        assert!((out[0] - 1.3472).abs() < 1e-4);
    }

    #[test]
    fn euler_identity_drift_adds_noise() {
        let m = SdeModel::scalar(|_| 0.0, 1.0, "flat").unwrap();
        let out = euler_step(&m, &[2.5], 0.3, &[0.7]).unwrap();
        assert_eq!(out[0], 2.5 + 0.7);
    }

    #[test]
    fn euler_detects_blowup() {
        let m = SdeModel::scalar(|x| x * f64::INFINITY, 1.0, "bad").unwrap();
        assert!(matches!(euler_step(&m, &[1.0], 0.1, &[0.0]), Err(CoreError::Blowup { .. })));
    }

    #[test]
    fn exact_ou_reaches_stationary_mean() {
        let p = OuParams::scalar(1.0, 0.0, std::f64::consts::SQRT_2).unwrap();
        let out = exact_ou_step(&p, &[1.0], 50.0, &[0.0]).unwrap();
        assert!(out[0].abs() < 1e-15);
    }

    #[test]
    fn exact_ou_dt_zero_is_identity() {
        let p = OuParams::scalar(1.0, 0.0, std::f64::consts::SQRT_2).unwrap();
        let out = exact_ou_step(&p, &[1.7], 0.0, &[3.0]).unwrap();
        assert_eq!(out[0], 1.7);
    }

    #[test]
    fn ubu_free_flight_limit() {
        // gamma -> 0+: U half-steps degenerate to free flight, so one step is
        // flight, kick, flight.
        let m = KineticModel::scalar(|x| x, 1e-12).unwrap();
        let (x, v) = ubu_step(&m, &[1.0], &[0.0], 0.1, &[[0.0; 2]], &[[0.0; 2]]).unwrap();
        assert!((x[0] - 0.995).abs() < 1e-10, "x = {}", x[0]);
        assert!((v[0] + 0.1).abs() < 1e-10, "v = {}", v[0]);
    }

    #[test]
    fn ubu_h_zero_is_identity() {
        let m = KineticModel::scalar(|x| x, 1.0).unwrap();
        let (x, v) = ubu_step(&m, &[0.3], &[-0.4], 0.0, &[[1.0, 2.0]], &[[0.5, -0.5]]).unwrap();
        assert_eq!((x[0], v[0]), (0.3, -0.4));
    }

    #[test]
    fn ubu_half_steps_compose_to_full_flow() {
        // Zero noise, gamma = 1, no potential: v = e^{-h}, x = 1 - e^{-h}.
        let m = KineticModel::scalar(|_| 0.0, 1.0).unwrap();
        let (x, v) = ubu_step(&m, &[0.0], &[1.0], 0.2, &[[0.0; 2]], &[[0.0; 2]]).unwrap();
        assert!((v[0] - (-0.2f64).exp()).abs() < 1e-14);
        assert!((x[0] - (1.0 - (-0.2f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn leapfrog_hand_evaluated() {
        let grad = |x: &[f64], out: &mut [f64]| out[0] = x[0];
        let (x, v) = leapfrog(&grad, &[1.0], &[0.0], 0.1, 1).unwrap();
        assert!((x[0] - 0.995).abs() < 1e-15);
        assert!((v[0] + 0.09975).abs() < 1e-15);
    }

    #[test]
    fn leapfrog_rejects_l_zero_and_eps_zero_is_identity() {
        let grad = |x: &[f64], out: &mut [f64]| out[0] = x[0];
        assert!(leapfrog(&grad, &[1.0], &[0.0], 0.1, 0).is_err());
        let (x, v) = leapfrog(&grad, &[1.0], &[0.5], 0.0, 1).unwrap();
        assert_eq!((x[0], v[0]), (1.0, 0.5));
    }

    #[test]
    fn leapfrog_is_reversible() {
        let grad = |x: &[f64], out: &mut [f64]| out[0] = x[0];
        let (x1, v1) = leapfrog(&grad, &[0.7], &[-0.3], 0.05, 40).unwrap();
        let (x0, v0) = leapfrog(&grad, &x1, &[-v1[0]], 0.05, 40).unwrap();
        assert!((x0[0] - 0.7).abs() < 1e-12);
        assert!((-v0[0] + 0.3).abs() < 1e-12);
    }

    #[test]
    fn leapfrog_preserves_phase_space_volume() {
        // Finite-difference Jacobian of one step for U = x^2/2.
        let grad = |x: &[f64], out: &mut [f64]| out[0] = x[0];
        let eps = 0.1;
        let d = 1e-5;
        let f = |x: f64, v: f64| {
            let (xs, vs) = leapfrog(&grad, &[x], &[v], eps, 1).unwrap();
            (xs[0], vs[0])
        };
        let (x0, v0) = (0.4, -0.2);
        let (xp, vp) = f(x0 + d, v0);
        let (xm, vm) = f(x0 - d, v0);
        let (xq, vq) = f(x0, v0 + d);
        let (xr, vr) = f(x0, v0 - d);
        let j11 = (xp - xm) / (2.0 * d);
        let j21 = (vp - vm) / (2.0 * d);
        let j12 = (xq - xr) / (2.0 * d);
        let j22 = (vq - vr) / (2.0 * d);
        let det = j11 * j22 - j12 * j21;
        assert!((det - 1.0).abs() < 1e-6, "det = {det}");
    }

    #[test]
    fn hmc_kernel_is_deterministic_given_stream() {
        use crate::rng::{make_stream, StreamId};
        let grad = |x: &[f64], out: &mut [f64]| out[0] = x[0];
        let mut s1 = make_stream(4, StreamId::new("hmc", 0, 0));
        let mut s2 = make_stream(4, StreamId::new("hmc", 0, 0));
        let a = hmc_kernel(&grad, &[0.2], 0.1, 10, &mut s1).unwrap();
        let b = hmc_kernel(&grad, &[0.2], 0.1, 10, &mut s2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn hmc_zero_momentum_follows_deterministic_leapfrog() {
        let grad = |x: &[f64], out: &mut [f64]| out[0] = x[0];
        let via_kernel = hmc_kernel_with_momentum(&grad, &[1.0], &[0.0], 0.1, 1).unwrap();
        let (direct, _) = leapfrog(&grad, &[1.0], &[0.0], 0.1, 1).unwrap();
        assert_eq!(via_kernel, direct);
    }
}
