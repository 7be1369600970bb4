//! Trajectory-parallel execution with ordered reduction.
//!
//! Replicas are mapped in parallel but folded strictly in trajectory-index
//! order, so every Monte Carlo estimate is independent of the worker count.

use crate::error::Result;
use rayon::prelude::*;

const CHUNK: u64 = 128;

/// Maps `f` over trajectory indices `0..n_reps` in parallel and folds the
/// results in index order. Errors are surfaced for the lowest failing index,
/// tagged with that trajectory.
pub(crate) fn map_trajectories_ordered<T: Send>(
    n_reps: u64,
    f: impl Fn(u64) -> Result<T> + Sync,
    mut fold: impl FnMut(u64, T),
) -> Result<()> {
    let mut start = 0;
    while start < n_reps {
        let end = (start + CHUNK).min(n_reps);
        let results: Vec<(u64, Result<T>)> = (start..end).into_par_iter().map(|i| (i, f(i))).collect();
        for (i, r) in results {
            fold(i, r.map_err(|e| e.with_trajectory(i))?);
        }
        start = end;
    }
    Ok(())
}

/// Streaming mean and M2 accumulator over fixed-length records.
pub(crate) struct Welford {
    n: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    pub fn new(len: usize) -> Self {
        Welford { n: 0, mean: vec![0.0; len], m2: vec![0.0; len] }
    }

    pub fn update(&mut self, xs: &[f64]) {
        debug_assert_eq!(xs.len(), self.mean.len());
        self.n += 1;
        let n = self.n as f64;
        for (i, x) in xs.iter().enumerate() {
            let d = x - self.mean[i];
            self.mean[i] += d / n;
            self.m2[i] += d * (x - self.mean[i]);
        }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Standard errors of the means; zero when fewer than two samples.
    pub fn std_errors(&self) -> Vec<f64> {
        if self.n < 2 {
            return vec![0.0; self.mean.len()];
        }
        let n = self.n as f64;
        self.m2.iter().map(|m2| (m2 / (n - 1.0) / n).sqrt()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordered_fold_sees_indices_in_order() {
        let mut seen = Vec::new();
        map_trajectories_ordered(300, |i| Ok(i * 2), |i, v| {
            assert_eq!(v, i * 2);
            seen.push(i);
        })
        .unwrap();
        assert_eq!(seen, (0..300).collect::<Vec<_>>());
    }

    #[test]
    fn welford_matches_two_pass() {
        let xs = [[1.0, -2.0], [3.0, 0.5], [-1.0, 4.0], [0.0, 0.0]];
        let mut w = Welford::new(2);
        for x in &xs {
            w.update(x);
        }
        let mean0: f64 = xs.iter().map(|x| x[0]).sum::<f64>() / 4.0;
        assert!((w.mean()[0] - mean0).abs() < 1e-15);
        let var0: f64 = xs.iter().map(|x| (x[0] - mean0).powi(2)).sum::<f64>() / 3.0;
        assert!((w.std_errors()[0] - (var0 / 4.0).sqrt()).abs() < 1e-15);
    }
}
