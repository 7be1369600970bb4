// Scratch calibration probe; not part of the test suite.
use std::time::Instant;
use uitlab_core::averaging::*;
use uitlab_core::discretization::*;
use uitlab_core::meanfield::*;
use uitlab_core::metrics::*;

fn main() {
    let which: Vec<String> = std::env::args().skip(1).collect();
    let has = |s: &str| which.is_empty() || which.iter().any(|w| w == s);

    if has("avg") {
        let t0 = Instant::now();
        let mut pts = Vec::new();
        for &delta in &[0.02, 0.01, 0.005, 0.0025] {
            let m = SlowFastModel::new(1.0, delta).unwrap();
            let run = simulate_strong_error(&m, 20.0, 500, 42).unwrap();
            let sup = run.strong.sup();
            println!(
                "avg delta={delta}: sup={sup:.4e} floor_self={:.2e} ok={} plateau_windows: e={:.3e} l={:.3e}",
                run.floor.self_error_sup,
                run.floor.ok,
                run.strong.window_max(2.0, 5.0).unwrap(),
                run.strong.window_max(10.0, 20.0).unwrap()
            );
            pts.push((delta, sup));
        }
        let fit = fit_power_law(&pts).unwrap();
        println!("avg slope={:.3} r2={:.3} elapsed={:.1?}", fit.exponent, fit.r_squared, t0.elapsed());
    }

    if has("contr") {
        let t0 = Instant::now();
        for &r in &[0.0, 0.5, 1.0, 1.5] {
            let fit = estimate_contraction(&AveragedModel { r }, 1.0, -1.0, 6.0, 500, 42);
            match fit {
                Ok(f) => println!("contraction r={r}: lambda={:.4} r2={:.4} n={}", f.exponent, f.r_squared, f.n_points),
                Err(e) => println!("contraction r={r}: {e}"),
            }
        }
        println!("contr elapsed={:.1?}", t0.elapsed());
    }

    if has("mom") {
        let t0 = Instant::now();
        for &delta in &[0.1, 0.01] {
            let m = SlowFastModel::new(1.0, delta).unwrap();
            let tr = moment_trace(&m, 20.0, 1000, 42).unwrap();
            let sup_x = tr.x.sup();
            let se_at_sup = tr.x.std_errors.iter().cloned().fold(0.0, f64::max);
            println!("moments delta={delta}: sup E|X|^2 = {sup_x:.4} (max se {se_at_sup:.4}), sup E|Y|^2 = {:.4}", tr.y.sup());
        }
        println!("mom elapsed={:.1?}", t0.elapsed());
    }

    if has("ula") {
        let t0 = Instant::now();
        let pot = PotentialSpec::quadratic(1.0).unwrap();
        let mut pts_terminal = Vec::new();
        let mut pts_sup = Vec::new();
        for k in 4..=7 {
            let delta = 2f64.powi(-k);
            let run = ula_strong_error(&pot, delta, 10.0, 10_000, 42).unwrap();
            let term = run.curve.values.last().unwrap().sqrt();
            let sup = run.curve.sup().sqrt();
            let plateau = plateau_stat(&run.curve, (2.0, 5.0), (5.0, 10.0)).unwrap();
            println!("ula delta=2^-{k}: term_rms={term:.4e} sup_rms={sup:.4e} plateau={plateau:.3}");
            pts_terminal.push((delta, term));
            pts_sup.push((delta, sup));
        }
        println!(
            "ula slope terminal={:.3} sup={:.3} elapsed={:.1?}",
            fit_power_law(&pts_terminal).unwrap().exponent,
            fit_power_law(&pts_sup).unwrap().exponent,
            t0.elapsed()
        );
    }

    if has("ubu") {
        let t0 = Instant::now();
        for (a, b) in [(1.0, 0.3), (4.0, 1.0)] {
            let pot = PotentialSpec::perturbed_quadratic(a, b).unwrap();
            let mut pts = Vec::new();
            for k in 3..=6 {
                let delta = 2f64.powi(-k);
                let run = ubu_strong_error(&pot, 1.0, delta, 10.0, 500, 42).unwrap();
                let sup = run.curve.sup();
                let f = run.floor.unwrap();
                println!(
                    "ubu(a={a},b={b}) delta=2^-{k}: sup={sup:.4e} self={:.2e} ratio={:.1} ok={}",
                    f.self_error_sup,
                    sup / f.self_error_sup.max(1e-300),
                    f.ok
                );
                pts.push((delta, sup.sqrt()));
            }
            let fit = fit_power_law(&pts).unwrap();
            println!("ubu(a={a},b={b}) slope={:.3} r2={:.3}", fit.exponent, fit.r_squared);
        }
        println!("ubu elapsed={:.1?}", t0.elapsed());
    }

    if has("hmc") {
        let t0 = Instant::now();
        let pot = PotentialSpec::quadratic(1.0).unwrap();
        let mut pts = Vec::new();
        for &eps in &[0.2f64, 0.1, 0.05] {
            let l = (1.0 / eps).round() as u32;
            let run = hmc_bias_curve(&pot, eps, l, 50, 20_000, 42).unwrap();
            let term = run.curve.values.last().unwrap().sqrt();
            let sup = run.curve.sup().sqrt();
            println!("hmc eps={eps}: term_rms={term:.4e} sup_rms={sup:.4e}");
            pts.push((eps, term));
        }
        let fit = fit_power_law(&pts).unwrap();
        println!("hmc slope={:.3} r2={:.3} elapsed={:.1?}", fit.exponent, fit.r_squared, t0.elapsed());
    }

    if has("poc") {
        let t0 = Instant::now();
        let mut pts = Vec::new();
        for &n in &[16usize, 32, 64, 128, 256] {
            let model = ParticleModel::quadratic(1.0, 0.5, n).unwrap();
            let run = simulate_poc_error(&model, 20.0, 100, 42).unwrap();
            let sup = run.curve.sup();
            println!("poc N={n}: sup={sup:.4e} (t elapsed so far {:.1?})", t0.elapsed());
            pts.push((n as f64, sup));
        }
        let fit = fit_power_law(&pts).unwrap();
        println!("poc slope={:.3} r2={:.3} elapsed={:.1?}", fit.exponent, fit.r_squared, t0.elapsed());
    }

    if has("weak") {
        let t0 = Instant::now();
        for &delta in &[0.02, 0.01] {
            let m = SlowFastModel::new(1.0, delta).unwrap();
            let c = simulate_weak_error(&m, WeakTestFn::Tanh, 20.0, 10_000, 42).unwrap();
            let sup = c.sup();
            let max_se = c.std_errors.iter().cloned().fold(0.0, f64::max);
            println!("weak tanh delta={delta}: sup={sup:.4e} max_se={max_se:.2e}");
        }
        println!("weak elapsed={:.1?}", t0.elapsed());
    }
}
