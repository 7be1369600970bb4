//! Distances, moments, and rate fitting.
//!
//! Distances beyond dimension one are never estimated here: the experiments
//! report the coupled squared distance E|X - Y|^2, which upper-bounds the
//! squared L2 Wasserstein distance, and in one dimension the exact empirical
//! W2 is available through order statistics.

use crate::curve::ErrorCurve;
use crate::error::{CoreError, Result};
use serde::{Deserialize, Serialize};

/// A fitted exponent (power-law alpha or decay rate lambda) with intercept
/// and goodness of fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

/// Exact W2 between two equal-size empirical measures on the line: sort both
/// samples and pair order statistics.
pub fn w2_empirical_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(CoreError::invalid(format!("sample sizes differ: {} vs {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(CoreError::invalid("empty samples"));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let n = sa.len() as f64;
    let sum_sq: f64 = sa.iter().zip(&sb).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((sum_sq / n).sqrt())
}

/// W2 between two one-dimensional Gaussians.
pub fn w2_gaussian(m1: f64, v1: f64, m2: f64, v2: f64) -> Result<f64> {
    if v1 < 0.0 || v2 < 0.0 {
        return Err(CoreError::invalid(format!("negative variance: {v1}, {v2}")));
    }
    let dm = m1 - m2;
    let ds = v1.sqrt() - v2.sqrt();
    Ok((dm * dm + ds * ds).sqrt())
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let fit = intercept + slope * x;
        ss_res += (y - fit) * (y - fit);
        ss_tot += (y - my) * (y - my);
    }
    let r_squared = if ss_tot > 0.0 { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) } else { 1.0 };
    (slope, intercept, r_squared)
}

/// Least squares on (log scale, log value); the exponent is the slope.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 2 {
        return Err(CoreError::invalid(format!("fit_power_law needs >= 2 points, got {}", points.len())));
    }
    for (s, v) in points {
        if !(*s > 0.0) || !(*v > 0.0) {
            return Err(CoreError::invalid(format!("fit_power_law needs positive scales and values, got ({s}, {v})")));
        }
    }
    let xs: Vec<f64> = points.iter().map(|(s, _)| s.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, v)| v.ln()).collect();
    let spread = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - xs.iter().cloned().fold(f64::INFINITY, f64::min);
    if spread <= 0.0 {
        return Err(CoreError::FitFailure("all scales equal".into()));
    }
    let (slope, intercept, r_squared) = least_squares(&xs, &ys);
    Ok(RateFit { exponent: slope, intercept, r_squared, n_points: points.len() })
}

/// Fits `log value ~ -lambda * t` over the window, using only points whose
/// value exceeds ten times its standard error. For curves carrying squared
/// distances the caller halves the returned rate.
pub fn fit_exp_decay(curve: &ErrorCurve, window: (f64, f64)) -> Result<RateFit> {
    let (lo, hi) = window;
    let mut ts = Vec::new();
    let mut ys = Vec::new();
    for ((t, v), se) in curve.times.iter().zip(&curve.values).zip(&curve.std_errors) {
        if *t >= lo && *t <= hi && *v > 10.0 * *se && *v > 0.0 {
            ts.push(*t);
            ys.push(v.ln());
        }
    }
    if ts.len() < 3 {
        return Err(CoreError::FitFailure(format!(
            "fit_exp_decay needs >= 3 usable points in [{lo}, {hi}] above the noise floor, found {}",
            ts.len()
        )));
    }
    let spread = ts.last().unwrap() - ts.first().unwrap();
    if spread <= 0.0 {
        return Err(CoreError::FitFailure("degenerate time window".into()));
    }
    let (slope, intercept, r_squared) = least_squares(&ts, &ys);
    Ok(RateFit { exponent: -slope, intercept, r_squared, n_points: ts.len() })
}

/// Ratio of the late-window maximum to the early-window maximum. A bounded
/// ratio witnesses a time-uniform error; a large one flags error that grows
/// late. The result is never NaN: equal zero maxima give 1, a zero early
/// maximum under positive late error gives +inf.
pub fn plateau_stat(curve: &ErrorCurve, early: (f64, f64), late: (f64, f64)) -> Result<f64> {
    let e = curve.window_max(early.0, early.1)?;
    let l = curve.window_max(late.0, late.1)?;
    if e == 0.0 {
        return Ok(if l == 0.0 { 1.0 } else { f64::INFINITY });
    }
    Ok(l / e)
}

/// Sample mean and standard error of the mean, with compensated summation.
pub fn mean_and_se(samples: &[f64]) -> Result<(f64, f64)> {
    let n = samples.len();
    if n < 2 {
        return Err(CoreError::invalid(format!("mean_and_se needs n >= 2, got {n}")));
    }
    let mean = compensated_sum(samples.iter().copied()) / n as f64;
    let var = compensated_sum(samples.iter().map(|x| (x - mean) * (x - mean))) / (n as f64 - 1.0);
    Ok((mean, (var / n as f64).sqrt()))
}

/// Neumaier compensated summation.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::CurveMeta;
    use crate::rng::{make_stream, StreamId};

    fn curve(times: Vec<f64>, values: Vec<f64>, std_errors: Vec<f64>) -> ErrorCurve {
        let meta = CurveMeta { label: "test".into(), sweep_value: 0.0, n_reps: 1, seed: 0 };
        ErrorCurve::new(times, values, std_errors, meta).unwrap()
    }

    #[test]
    fn w2_identical_and_point_masses() {
        assert_eq!(w2_empirical_1d(&[0.0, 1.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(w2_empirical_1d(&[0.0], &[1.0]).unwrap(), 1.0);
    }

    // Brute force over both pairings of {0,2} vs {1,3}: sorted pairing costs
    // sqrt((1+1)/2) = 1, crossed pairing costs sqrt((9+1)/2) = sqrt 5.
    #[test]
    fn w2_takes_the_sorted_pairing() {
        assert!((w2_empirical_1d(&[0.0, 2.0], &[1.0, 3.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn w2_rejects_unequal_lengths() {
        assert!(w2_empirical_1d(&[0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn w2_gaussian_examples() {
        assert_eq!(w2_gaussian(0.0, 1.0, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(w2_gaussian(0.0, 1.0, 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(w2_gaussian(0.0, 1.0, 0.0, 4.0).unwrap(), 1.0);
        assert!(w2_gaussian(0.0, -1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn w2_gaussian_matches_empirical_estimator() {
        // 10^6 paired sorted samples from N(0,1) and N(0,4).
        let mut s = make_stream(3, StreamId::new("w2-gauss", 0, 0));
        let n = 1_000_000;
        let a: Vec<f64> = (0..n).map(|_| s.standard_normal()).collect();
        let b: Vec<f64> = (0..n).map(|_| 2.0 * s.standard_normal()).collect();
        let est = w2_empirical_1d(&a, &b).unwrap();
        assert!((est - 1.0).abs() < 0.01, "est = {est}");
    }

    #[test]
    fn power_law_recovers_exact_lines() {
        let fit = fit_power_law(&[(0.1, 0.1), (0.01, 0.01)]).unwrap();
        assert!((fit.exponent - 1.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);

        let fit = fit_power_law(&[(0.1, 0.01), (0.01, 0.0001)]).unwrap();
        assert!((fit.exponent - 2.0).abs() < 1e-12);
    }

    // Hand least squares on the three log pairs:
    //   x = ln{0.1, 0.05, 0.025}, y = ln{0.012, 0.0031, 0.0008}
    // gives slope 1.95346 (cov 0.6256975 / var 0.3203017).
    #[test]
    fn power_law_three_point_hand_fit() {
        let fit = fit_power_law(&[(0.1, 0.012), (0.05, 0.0031), (0.025, 0.0008)]).unwrap();
        assert!((fit.exponent - 1.95346).abs() < 1e-3, "alpha = {}", fit.exponent);
    }

    #[test]
    fn power_law_rejects_bad_input() {
        assert!(fit_power_law(&[(0.1, 0.1)]).is_err());
        assert!(fit_power_law(&[(0.1, -0.1), (0.2, 0.1)]).is_err());
        assert!(matches!(fit_power_law(&[(0.1, 0.1), (0.1, 0.2)]), Err(CoreError::FitFailure(_))));
    }

    #[test]
    fn exp_decay_exact_and_constant() {
        let c = curve(vec![1.0, 2.0, 3.0], vec![(-1.0f64).exp(), (-2.0f64).exp(), (-3.0f64).exp()], vec![0.0; 3]);
        let fit = fit_exp_decay(&c, (0.0, 10.0)).unwrap();
        assert!((fit.exponent - 1.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);

        let c = curve(vec![1.0, 2.0, 3.0], vec![0.5; 3], vec![0.0; 3]);
        let fit = fit_exp_decay(&c, (0.0, 10.0)).unwrap();
        assert!(fit.exponent.abs() < 1e-12);
    }

    #[test]
    fn exp_decay_refits_generated_rate() {
        let mut s = make_stream(17, StreamId::new("decay", 0, 0));
        let times: Vec<f64> = (1..=10).map(|k| k as f64).collect();
        let values: Vec<f64> = times.iter().map(|t| 2.0 * (-0.4 * t).exp() + 1e-6 * s.standard_normal()).collect();
        let c = curve(times, values, vec![1e-7; 10]);
        let fit = fit_exp_decay(&c, (0.0, 10.0)).unwrap();
        assert!((0.39..=0.41).contains(&fit.exponent), "lambda = {}", fit.exponent);
    }

    #[test]
    fn exp_decay_fails_without_usable_points() {
        let c = curve(vec![1.0, 2.0, 3.0], vec![1e-9; 3], vec![1e-3; 3]);
        assert!(matches!(fit_exp_decay(&c, (0.0, 10.0)), Err(CoreError::FitFailure(_))));
    }

    #[test]
    fn plateau_examples() {
        let c = curve(vec![0.0, 1.0, 2.0, 3.0], vec![2.0; 4], vec![0.0; 4]);
        assert_eq!(plateau_stat(&c, (0.0, 1.0), (2.0, 3.0)).unwrap(), 1.0);

        let c = curve(vec![0.0, 1.0, 2.0, 3.0], vec![1.0, 0.5, 0.25, 0.125], vec![0.0; 4]);
        assert!(plateau_stat(&c, (0.0, 1.0), (2.0, 3.0)).unwrap() < 1.0);

        assert!(plateau_stat(&c, (10.0, 11.0), (2.0, 3.0)).is_err());
    }

    #[test]
    fn mean_and_se_examples() {
        assert_eq!(mean_and_se(&[1.0, 1.0, 1.0]).unwrap(), (1.0, 0.0));
        let (m, se) = mean_and_se(&[0.0, 2.0]).unwrap();
        assert_eq!(m, 1.0);
        assert!((se - 1.0).abs() < 1e-15);
        assert!(mean_and_se(&[1.0]).is_err());
    }

    #[test]
    fn mean_of_a_million_normals() {
        let mut s = make_stream(5, StreamId::new("mean", 0, 0));
        let xs: Vec<f64> = (0..1_000_000).map(|_| s.standard_normal()).collect();
        let (m, _) = mean_and_se(&xs).unwrap();
        assert!(m.abs() < 0.004, "mean = {m}");
    }
}
