//! Time grids, Brownian increments, and grid-refinement coupling.

use crate::error::{CoreError, Result};
use crate::rng::RngStream;

/// Uniform time grid `t0 + k*dt` for `k = 0..=n_steps`.
///
/// Grid points are computed by multiplication, not repeated addition, so they
/// do not drift over long runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    dt: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() || !t0.is_finite() {
            return Err(CoreError::invalid(format!("TimeGrid requires finite t0 and dt > 0, got t0 = {t0}, dt = {dt}")));
        }
        if n_steps == 0 {
            return Err(CoreError::invalid("TimeGrid requires n_steps >= 1"));
        }
        Ok(TimeGrid { t0, dt, n_steps })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// The k-th grid point, `k` in `0..=n_steps`.
    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.n_steps)
    }
}

/// Brownian increments on a grid: `values[k] ~ N(0, dt * I_dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementArray {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>, // row-major, n_steps x dim
}

impl IncrementArray {
    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Increment over `[t_k, t_{k+1})`.
    #[inline]
    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Draws i.i.d. `N(0, dt)` increments for every grid step.
pub fn gaussian_increments(stream: &mut RngStream, grid: TimeGrid, dim: usize) -> Result<IncrementArray> {
    if dim == 0 {
        return Err(CoreError::invalid("gaussian_increments requires dim >= 1"));
    }
    let scale = grid.dt().sqrt();
    let mut values = vec![0.0; grid.n_steps() * dim];
    for v in values.iter_mut() {
        *v = scale * stream.standard_normal();
    }
    Ok(IncrementArray { grid, dim, values })
}

/// Sums consecutive blocks of `factor` fine increments into one coarse
/// increment; the coarse grid has `dt * factor`. This is the coupling that
/// lets two discretisations of different step sizes share one Brownian path.
pub fn coarsen_increments(fine: &IncrementArray, factor: usize) -> Result<IncrementArray> {
    if factor == 0 {
        return Err(CoreError::invalid("coarsen_increments requires factor >= 1"));
    }
    let n = fine.grid.n_steps();
    if n % factor != 0 {
        return Err(CoreError::invalid(format!("cannot coarsen {n} steps by factor {factor}: not divisible")));
    }
    let coarse_grid = TimeGrid::new(fine.grid.t0(), fine.grid.dt() * factor as f64, n / factor)?;
    let dim = fine.dim;
    let mut values = vec![0.0; coarse_grid.n_steps() * dim];
    for j in 0..coarse_grid.n_steps() {
        for i in 0..factor {
            let row = fine.row(j * factor + i);
            for d in 0..dim {
                values[j * dim + d] += row[d];
            }
        }
    }
    Ok(IncrementArray { grid: coarse_grid, dim, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{make_stream, StreamId};

    #[test]
    fn grid_points_are_multiplicative() {
        let g = TimeGrid::new(0.0, 0.1, 1_000_000).unwrap();
        // 10^6 accumulated additions of 0.1 would drift by ~1e-9; the
        // multiplicative form stays exact to one ulp.
        assert!((g.time(1_000_000) - 100_000.0).abs() < 1e-7);
        assert_eq!(g.time(3), 0.1 * 3.0);
    }

    #[test]
    fn grid_rejects_bad_arguments() {
        assert!(TimeGrid::new(0.0, 0.0, 10).is_err());
        assert!(TimeGrid::new(0.0, -1.0, 10).is_err());
        assert!(TimeGrid::new(0.0, 0.1, 0).is_err());
        assert!(TimeGrid::new(f64::NAN, 0.1, 1).is_err());
    }

    #[test]
    fn increments_deterministic_after_reset() {
        let grid = TimeGrid::new(0.0, 0.01, 64).unwrap();
        let mut s = make_stream(9, StreamId::new("inc", 0, 0));
        let a = gaussian_increments(&mut s, grid, 2).unwrap();
        s.reset();
        let b = gaussian_increments(&mut s, grid, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn increments_reject_dim_zero() {
        let grid = TimeGrid::new(0.0, 0.01, 4).unwrap();
        let mut s = make_stream(9, StreamId::new("inc", 0, 0));
        assert!(gaussian_increments(&mut s, grid, 0).is_err());
    }

    #[test]
    fn increment_moments_match_n0_dt() {
        // dt = 0.01, 10^6 entries: sample mean within 4*sigma/sqrt(n) of 0,
        // sample variance inside the chi-square concentration band.
        let grid = TimeGrid::new(0.0, 0.01, 1_000_000).unwrap();
        let mut s = make_stream(42, StreamId::new("moments", 0, 0));
        let inc = gaussian_increments(&mut s, grid, 1).unwrap();
        let n = inc.values().len() as f64;
        let mean = inc.values().iter().sum::<f64>() / n;
        let var = inc.values().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 4e-4, "mean = {mean}");
        assert!((0.0097..=0.0103).contains(&var), "var = {var}");
    }

    #[test]
    fn coarsen_definition_and_identity() {
        let grid = TimeGrid::new(0.0, 0.5, 2).unwrap();
        let fine = IncrementArray { grid, dim: 1, values: vec![1.25, -0.5] };
        let coarse = coarsen_increments(&fine, 2).unwrap();
        assert_eq!(coarse.values(), &[0.75]);
        assert_eq!(coarse.grid().dt(), 1.0);

        let same = coarsen_increments(&fine, 1).unwrap();
        assert_eq!(same, fine);
    }

    #[test]
    fn coarsen_rejects_non_divisible() {
        let grid = TimeGrid::new(0.0, 0.5, 3).unwrap();
        let fine = IncrementArray { grid, dim: 1, values: vec![0.0; 3] };
        assert!(coarsen_increments(&fine, 2).is_err());
    }

    #[test]
    fn coarsened_variance_scales_with_factor() {
        let grid = TimeGrid::new(0.0, 0.02, 100_000 * 4).unwrap();
        let mut s = make_stream(11, StreamId::new("coarse-var", 0, 0));
        let fine = gaussian_increments(&mut s, grid, 1).unwrap();
        let coarse = coarsen_increments(&fine, 4).unwrap();
        let n = coarse.values().len() as f64;
        let var = coarse.values().iter().map(|v| v * v).sum::<f64>() / n;
        let expect = 4.0 * 0.02;
        // 4-sigma band for a sample variance over 1e5 draws.
        let tol = expect * 4.0 * (2.0 / n).sqrt();
        assert!((var - expect).abs() < tol, "var = {var}, expect = {expect}");
    }
}
