mod common;

use std::f64::consts::SQRT_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use common::bachelier_levy;
use passage_lab::mc::{bridge_crossing_probability, simulate_euler, EulerProcess, McConfig, McEstimate};
use passage_lab::numerics::QuadSpec;
use passage_lab::transforms::{pushforward_law, reduce_ou, reduce_time_changed, TimeChange};

/// Hitting times of `a` by `z + B(ρ(t))`, stepping `t` with exact Gaussian
/// increments and a bridge check in between.
fn time_changed_hits(rho: impl Fn(f64) -> f64, z: f64, a: f64, dt: f64, horizon: f64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut hits = Vec::with_capacity(n);
    for _ in 0..n {
        let (mut t, mut y) = (0.0, z);
        while t < horizon {
            let var = rho(t + dt) - rho(t);
            let next = y + var.sqrt() * rng.sample::<f64, _>(StandardNormal);
            let crossed = next >= a || rng.random::<f64>() < bridge_crossing_probability(a - y, a - next, var);
            t += dt;
            y = next;
            if crossed {
                hits.push(t);
                break;
            }
        }
    }
    hits
}

fn ecdf(hits: &[f64], n: usize, t: f64) -> McEstimate {
    McEstimate::proportion(hits.iter().filter(|&&h| h <= t).count(), n)
}

/// `∫_0^t f` for a law tabulated on a fine grid, by the trapezoid rule.
fn tabulated_cdf(grid: &[f64], f: &[f64], t: f64) -> f64 {
    grid.windows(2)
        .zip(f.windows(2))
        .take_while(|(g, _)| g[1] <= t)
        .map(|(g, v)| 0.5 * (g[1] - g[0]) * (v[0] + v[1]))
        .sum()
}

fn check_clock(tc: TimeChange, rho: impl Fn(f64) -> f64) {
    let (n, dt) = (20_000, 1e-3);
    let reduced = reduce_time_changed(0.0, 1.0, tc).unwrap();
    let grid: Vec<f64> = (1..=3000).map(|k| k as f64 * dt).collect();
    let law = pushforward_law(&reduced, 1, &grid, &QuadSpec::default()).unwrap();
    let hits = time_changed_hits(&rho, 0.0, 1.0, dt, 3.0, n);
    for t in [0.5, 1.0, 1.5, 2.0, 3.0] {
        let exact = bachelier_levy(0.0, 1.0, 0.0, rho(t));
        let tabulated = tabulated_cdf(&grid, law.density.values(), t);
        assert!((tabulated - exact).abs() < 1e-3, "t = {t}: tabulated {tabulated} vs {exact}");
        let e = ecdf(&hits, n, t);
        // each step carries a discretisation bias of order dt
        assert!(e.agrees_with(exact, 3.0, 2e-3), "t = {t}: MC {} +- {} vs {exact}", e.value, e.std_error);
    }
}

#[test]
fn quadratic_clock() {
    check_clock(TimeChange::Power { p: 2.0 }, |t| t * t);
}

#[test]
fn linear_clock() {
    check_clock(TimeChange::Linear { c: 3.0 }, |t| 3.0 * t);
}

#[test]
fn ornstein_uhlenbeck_against_pushforward() {
    let (mu, sigma) = (0.5, 1.0);
    let reduced = reduce_ou(0.0, mu, sigma, 1.0).unwrap();
    let grid: Vec<f64> = (1..=8000).map(|k| k as f64 * 1e-3).collect();
    let law = pushforward_law(&reduced, 1, &grid, &QuadSpec::default()).unwrap();
    let cfg = McConfig::new(10_000, 1e-4, 8.0, 5).unwrap();
    let sample = simulate_euler(&EulerProcess::Ou { z: 0.0, mu, sigma, s0: 1.0 }, &cfg).unwrap();
    // histogram on unit-width bins
    for k in 0..6 {
        let (lo, hi) = (k as f64, k as f64 + 1.0);
        let expected = tabulated_cdf(&grid, law.density.values(), hi) - tabulated_cdf(&grid, law.density.values(), lo);
        let e = McEstimate::proportion(sample.times.iter().filter(|&&t| lo < t && t <= hi).count(), sample.len());
        assert!(e.agrees_with(expected, 3.5, 2e-3), "bin {k}: MC {} +- {} vs {expected}", e.value, e.std_error);
    }
}

#[test]
fn ornstein_uhlenbeck_clock_is_closed_form() {
    // σ²/(2μ) = 1 gives ρ(t) = e^{2t} − 1 and ρ⁻¹(u) = ln(1 + u)/2
    let reduced = reduce_ou(0.0, 1.0, SQRT_2, 1.0).unwrap();
    for u in [1e-6, 0.3, 2.0, 1e4] {
        let t = reduced.original_time(u);
        assert!((t - u.ln_1p() / 2.0).abs() < 1e-12 * t.max(1.0));
    }
}
