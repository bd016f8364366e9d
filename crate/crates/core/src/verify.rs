//! Self-check suites behind `passage-lab verify`.
//!
//! The analytic suite compares independent routes to the same quantity
//! (closed form against quadrature, recursion against convolution); the
//! Monte Carlo suite compares simulated statistics against the laws at
//! `±3·SE`.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;

use crate::error::Result;
use crate::linear_passage::{
    first_passage_cdf, first_passage_density, hit_probability, last_passage_cdf, last_passage_density,
    never_return_probability, no_zero_probability, salminen_density_numeric, PassageProblem,
};
use crate::mc::{
    estimate_last_passage_cdf, estimate_no_zero_probability, simulate_euler, simulate_first_passage, EulerProcess,
    McConfig, DEFAULT_EULER_DT,
};
use crate::numerics::{erf, integrate, QuadSpec};
use crate::successive::{
    density_peak, jensen_bound, nth_passage_law, t2_defect, t2_density, t2_mass, t2_partial_mean, tau2_density,
    tau2_mass,
};
use crate::transforms::{cir_first_passage_cdf, reduce_conjugated, reduce_ou, Conjugation, TimeChange};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Reported for reference only; never fails a suite.
    Info,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        let status = if passed { Status::Pass } else { Status::Fail };
        Self { name: name.into(), status, detail }
    }

    fn info(name: &str, detail: String) -> Self {
        Self { name: name.into(), status: Status::Info, detail }
    }

    /// A check whose computation failed counts as a failure.
    fn from_result(name: &str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((ok, detail)) => Self::new(name, ok, detail),
            Err(e) => Self::new(name, false, format!("error: {e}")),
        }
    }

    pub fn failed(&self) -> bool {
        self.status == Status::Fail
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "INFO",
        };
        write!(f, "{tag}  {:<28} {}", self.name, self.detail)
    }
}

fn problem(b: f64) -> PassageProblem {
    PassageProblem { x: 0.0, a: 1.0, b }
}

/// Analytic identities; deterministic.
pub fn analytic_suite() -> Vec<Check> {
    let spec = QuadSpec::default();
    vec![
        Check::from_result("excursion-law-equivalence", excursion_law_equivalence(&spec)),
        Check::from_result("arcsine-reduction", arcsine_reduction()),
        Check::from_result("excursion-law-normalized", excursion_law_normalized(&spec)),
        Check::from_result("first-passage-consistency", first_passage_consistency()),
        Check::from_result("never-return-limit", never_return_limit(&spec)),
        Check::from_result("defect-consistency", defect_consistency(&spec)),
        Check::from_result("jensen-bound", jensen_bound_holds(&spec)),
        Check::from_result("driftless-laws-proper", driftless_laws_proper(&spec)),
        Check::from_result("singular-head", singular_head(&spec)),
        Check::from_result("recursion-vs-convolution", recursion_vs_convolution(&spec)),
        Check::from_result("divergent-mean", divergent_mean(&spec)),
        Check::from_result("reduction-round-trips", reduction_round_trips()),
        Check::from_result("tau2-peak-ordering", tau2_peak_ordering(&spec)),
        match tau2_vs_inverse_gaussian_peaks(&spec) {
            Ok(detail) => Check::info("tau2-vs-ig-peak", detail),
            Err(e) => Check::new("tau2-vs-ig-peak", false, format!("error: {e}")),
        },
    ]
}

fn excursion_law_equivalence(spec: &QuadSpec) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for b in [-2.0, -1.0, -0.5, 0.0] {
        for t in [0.5, 1.0, 2.0, 5.0] {
            for frac in [0.05, 0.3, 0.7, 0.95] {
                let u = frac * t;
                let closed = last_passage_density(b, t, u)?;
                let numeric = salminen_density_numeric(b, t, u, spec)?;
                worst = worst.max((closed - numeric).abs());
            }
        }
    }
    Ok((worst <= 1e-6, format!("max |integral form - closed form| = {worst:.2e} (tol 1e-6)")))
}

fn arcsine_reduction() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for t in [0.5, 1.0, 3.0] {
        for k in 1..100 {
            let u = t * k as f64 / 100.0;
            let arcsine = 1.0 / (PI * (u * (t - u)).sqrt());
            worst = worst.max((last_passage_density(0.0, t, u)? - arcsine).abs() / arcsine);
        }
    }
    Ok((worst <= 1e-12, format!("max relative deviation from 1/(pi sqrt(u(t-u))) = {worst:.2e}")))
}

fn excursion_law_normalized(spec: &QuadSpec) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for b in [-2.0, -0.5, 0.7] {
        let t = 2.0;
        let psi = |u: f64| last_passage_density(b, t, u).unwrap_or(f64::NAN);
        let mass = integrate(psi, 0.0, t, &spec.singular_both()).into_result()?;
        worst = worst.max((mass - 1.0).abs());
    }
    Ok((worst <= 1e-8, format!("max |mass - 1| = {worst:.2e}")))
}

fn first_passage_consistency() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for b in [-1.0, 0.0, 0.5] {
        let p = problem(b);
        for t in [0.2, 1.0, 4.0] {
            let h = 1e-5 * t;
            let fd = (first_passage_cdf(&p, t + h)? - first_passage_cdf(&p, t - h)?) / (2.0 * h);
            worst = worst.max((fd - first_passage_density(&p, t)?).abs());
        }
        worst = worst.max((first_passage_cdf(&p, f64::INFINITY)? - hit_probability(&p)?).abs());
    }
    Ok((worst <= 1e-6, format!("max |dF/dt - f|, |F(inf) - P(hit)| = {worst:.2e}")))
}

fn never_return_limit(spec: &QuadSpec) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for b in [-2.0f64, -1.0, -0.5] {
        let limit = erf(b.abs() / SQRT_2);
        worst = worst.max((no_zero_probability(b, 1.0, 1e6, spec)? - limit).abs());
    }
    Ok((worst <= 1e-3, format!("max |P(no zero in (1, 1+1e6)) - erf(|b|/sqrt 2)| = {worst:.2e}")))
}

fn defect_consistency(spec: &QuadSpec) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for b in [-2.0, -1.0, -0.5, -0.1] {
        let p = problem(b);
        worst = worst.max((1.0 - t2_mass(&p, spec)? - t2_defect(&p, spec)?).abs());
    }
    Ok((worst <= 1e-3, format!("max |1 - integral f_T2 - defect| = {worst:.2e}")))
}

fn jensen_bound_holds(spec: &QuadSpec) -> Result<(bool, String)> {
    let mut ok = true;
    let mut prev = f64::INFINITY;
    for k in 0..=30 {
        let b = if k == 30 { 0.0 } else { -3.0 + 0.1 * k as f64 };
        let p = problem(b);
        let defect = t2_defect(&p, spec)?;
        let gamma = jensen_bound(&p)?;
        ok &= defect <= gamma + 1e-12 && defect < prev;
        prev = defect;
        if k == 30 {
            ok &= defect == 0.0 && gamma == 0.0;
        }
    }
    Ok((ok, "defect <= gamma, defect decreasing in b, both 0 at b = 0".into()))
}

fn driftless_laws_proper(spec: &QuadSpec) -> Result<(bool, String)> {
    let p = problem(0.0);
    let (m1, m2) = (t2_mass(&p, spec)?, tau2_mass(&p, spec)?);
    let ok = (m1 - 1.0).abs() <= 5e-3 && (m2 - 1.0).abs() <= 5e-3;
    Ok((ok, format!("b = 0: integral f_T2 = {m1:.6}, integral f_tau2 = {m2:.6}")))
}

fn singular_head(spec: &QuadSpec) -> Result<(bool, String)> {
    let p = problem(-0.5);
    let v: Vec<f64> =
        [1e-4, 1e-6, 1e-8].iter().map(|&t| Ok(t2_density(&p, t, spec)? * t.sqrt())).collect::<Result<_>>()?;
    let (lo, hi) = v.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &x| (l.min(x), h.max(x)));
    let spread = (hi - lo) / lo;
    Ok((spread < 0.05, format!("sqrt(t) f_T2(t) at 1e-4, 1e-6, 1e-8 varies by {:.3}%", 100.0 * spread)))
}

fn recursion_vs_convolution(spec: &QuadSpec) -> Result<(bool, String)> {
    let p = problem(0.0);
    let grid: Vec<f64> = (0..400).map(|k| 0.05 * 1000f64.powf(k as f64 / 399.0)).collect();
    let law = nth_passage_law(&p, 2, &grid, spec)?;
    let mut worst: f64 = 0.0;
    for (&t, &f) in grid.iter().zip(law.density.values()) {
        worst = worst.max((f - tau2_density(&p, t, spec)?).abs());
    }
    Ok((worst <= 1e-4, format!("sup |recursion - convolution| on [0.05, 50] = {worst:.2e}")))
}

fn divergent_mean(spec: &QuadSpec) -> Result<(bool, String)> {
    let p = problem(0.0);
    let (m2, m4) = (t2_partial_mean(&p, 1e2, spec)?, t2_partial_mean(&p, 1e4, spec)?);
    Ok((m4 >= 5.0 * m2, format!("partial means to 1e2 / 1e4: {m2:.4} / {m4:.4}")))
}

fn reduction_round_trips() -> Result<(bool, String)> {
    let clocks = [TimeChange::power(2.0)?, TimeChange::linear(3.0)?, TimeChange::ornstein_uhlenbeck(1.0, SQRT_2)?];
    let mut worst: f64 = 0.0;
    for tc in &clocks {
        for k in 0..=1000 {
            let t = 0.1 * k as f64;
            worst = worst.max((tc.rho_inverse(tc.rho(t)) - t).abs() / t.max(1.0));
        }
    }
    for k in 0..=1000 {
        let z = k as f64 / 1000.0;
        for c in [Conjugation::Cir, Conjugation::WrightFisher] {
            worst = worst.max((c.v_inverse(c.v(z)) - z).abs());
        }
    }
    let cir = reduce_conjugated(&Conjugation::Cir, 0.25, 1.0)?;
    let ou = reduce_ou(0.0, 1.0, SQRT_2, 1.0)?;
    let ok =
        worst <= 1e-10 && cir.bm_problem == PassageProblem { x: 1.0, a: 2.0, b: 0.0 } && ou.bm_problem == problem(0.0);
    Ok((ok, format!("max round-trip error = {worst:.2e}")))
}

fn tau2_peak_ordering(spec: &QuadSpec) -> Result<(bool, String)> {
    let peaks: Vec<f64> = [-2.0, -1.0, -0.5, 0.0]
        .iter()
        .map(|&b| Ok(density_peak(|t| tau2_density(&problem(b), t, spec), 1e-3, 20.0)?.1))
        .collect::<Result<_>>()?;
    let ok = peaks.windows(2).all(|w| w[0] > w[1]);
    Ok((ok, format!("peaks for b = -2, -1, -0.5, 0: {peaks:.4?}")))
}

fn tau2_vs_inverse_gaussian_peaks(spec: &QuadSpec) -> Result<String> {
    let p = problem(0.0);
    let tau2 = density_peak(|t| tau2_density(&p, t, spec), 1e-3, 20.0)?;
    let ig = density_peak(|t| first_passage_density(&p, t), 1e-3, 20.0)?;
    Ok(format!("b = 0 peaks: f_tau2 {:.4} at t = {:.3}, f_IG {:.4} at t = {:.3}", tau2.1, tau2.0, ig.1, ig.0))
}

/// Monte Carlo comparisons; `paths` sets the Brownian sample size (Euler
/// checks use a fifth of it), `seed` makes the run reproducible.
pub fn mc_suite(paths: usize, seed: u64, workers: usize) -> Vec<Check> {
    let spec = QuadSpec::default();
    let euler_paths = (paths / 5).max(1);
    let mut checks = vec![
        Check::from_result("mc-arcsine-no-zero", mc_arcsine(paths, seed, workers)),
        Check::from_result("mc-last-passage", mc_last_passage(paths, seed, workers, &spec)),
        Check::from_result("mc-never-return", mc_never_return(paths.min(5000), seed, workers)),
        Check::from_result("mc-first-passage", mc_first_passage(paths, seed, workers)),
        Check::from_result("mc-bridge-necessity", mc_bridge_necessity(paths.min(20_000), seed, workers)),
        Check::from_result("mc-reproducible", mc_reproducible(seed)),
    ];
    match mc_cir_median(euler_paths, seed, workers) {
        Ok(cir) => checks.extend(cir),
        Err(e) => checks.push(Check::new("mc-cir-median", false, format!("error: {e}"))),
    }
    checks.push(Check::from_result("mc-ou-deciles", mc_ou_deciles(euler_paths, seed, workers)));
    checks
}

fn mc_arcsine(paths: usize, seed: u64, workers: usize) -> Result<(bool, String)> {
    let cfg = McConfig::new(paths, 1e-3, 1.0, seed)?.with_workers(workers);
    let e = estimate_no_zero_probability(0.0, 0.25, 0.75, &cfg)?;
    Ok((
        e.agrees_with(1.0 / 3.0, 3.0, 0.0),
        format!("P(no zero in (0.25, 1)) = {:.5} +- {:.5}, exact 1/3", e.value, e.std_error),
    ))
}

fn mc_last_passage(paths: usize, seed: u64, workers: usize, spec: &QuadSpec) -> Result<(bool, String)> {
    let cfg = McConfig::new(paths, 1e-3, 2.0, seed)?.with_workers(workers);
    let e = estimate_last_passage_cdf(-1.0, 2.0, 1.0, &cfg)?;
    let exact = last_passage_cdf(-1.0, 2.0, 1.0, spec)?;
    Ok((
        e.agrees_with(exact, 3.0, 0.0),
        format!("b = -1: P(last zero before 2 <= 1) = {:.5} +- {:.5}, quadrature {exact:.5}", e.value, e.std_error),
    ))
}

fn mc_never_return(paths: usize, seed: u64, workers: usize) -> Result<(bool, String)> {
    let cfg = McConfig::new(paths, 1e-2, 1.0, seed)?.with_workers(workers);
    let e = estimate_no_zero_probability(-1.0, 1.0, 100.0, &cfg)?;
    // P(no zero in (1, 101)) exceeds the never-return limit by P(last zero > 101)
    let limit = never_return_probability(-1.0, 1.0)?;
    Ok((
        e.agrees_with(limit, 3.0, 1e-6),
        format!("b = -1: P(no zero in (1, 101)) = {:.4} +- {:.4}, limit {limit:.4}", e.value, e.std_error),
    ))
}

/// `t` with `F(t) = q` for an increasing `F` on `(0, ∞)`.
fn invert_cdf(f: impl Fn(f64) -> Result<f64>, q: f64) -> Result<f64> {
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi)? < q {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn mc_first_passage(paths: usize, seed: u64, workers: usize) -> Result<(bool, String)> {
    let p = problem(-1.0);
    let cfg = McConfig::for_problem(&p, paths, seed)?.with_workers(workers);
    let s = simulate_first_passage(&p, &cfg)?;
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for k in 1..10 {
        let q = k as f64 / 10.0;
        let t = invert_cdf(|t| first_passage_cdf(&p, t), q)?;
        let e = s.ecdf(t);
        ok &= e.agrees_with(q, 3.0, 0.0);
        worst = worst.max((e.value - q).abs() / e.std_error);
    }
    let mean = s.mean_uncensored();
    ok &= mean.agrees_with(1.0, 3.0, 0.0);
    Ok((ok, format!("worst decile deviation {worst:.2} SE; mean {:.4} +- {:.4}", mean.value, mean.std_error)))
}

fn mc_bridge_necessity(paths: usize, seed: u64, workers: usize) -> Result<(bool, String)> {
    let p = problem(-1.0);
    let cfg = McConfig::new(paths, 1e-2, 20.0, seed)?.with_workers(workers);
    let with = simulate_first_passage(&p, &cfg)?;
    let without = simulate_first_passage(&p, &cfg.with_bridge_correction(false))?;
    let t = invert_cdf(|t| first_passage_cdf(&p, t), 0.5)?;
    let (w, wo) = (with.ecdf(t), without.ecdf(t));
    let ok = w.agrees_with(0.5, 3.0, 0.0) && wo.value + 3.0 * wo.std_error < 0.5;
    Ok((ok, format!("dt = 1e-2, F(median): bridge {:.4}, no bridge {:.4} (late), exact 0.5", w.value, wo.value)))
}

fn mc_reproducible(seed: u64) -> Result<(bool, String)> {
    let p = problem(-1.0);
    let cfg = McConfig::new(500, 1e-2, 20.0, seed)?;
    let a = simulate_first_passage(&p, &cfg.with_workers(1))?;
    let b = simulate_first_passage(&p, &cfg.with_workers(4))?;
    Ok((a == b, "identical samples with 1 and 4 workers".into()))
}

fn mc_cir_median(paths: usize, seed: u64, workers: usize) -> Result<Vec<Check>> {
    // horizon 6 keeps the censored fraction well below one half
    let cfg = McConfig::new(paths, DEFAULT_EULER_DT, 6.0, seed)?.with_workers(workers);
    let s = simulate_euler(&EulerProcess::Cir { z: 0.25, barrier: 1.0 }, &cfg)?;
    let median = s.quantile(0.5).unwrap_or(f64::INFINITY);
    let exact = invert_cdf(|t| cir_first_passage_cdf(0.25, 1.0, t), 0.5)?;
    let bm = reduce_conjugated(&Conjugation::Cir, 0.25, 1.0)?.bm_problem;
    let one_sided = invert_cdf(|t| first_passage_cdf(&bm, t), 0.5)?;
    let rel = |m: f64| 100.0 * (median - m).abs() / m;
    Ok(vec![
        Check::new(
            "mc-cir-median",
            rel(exact) <= 5.0,
            format!(
                "Euler CIR median {median:.4}, exit of BM from (-2, 2) median {exact:.4}, rel. diff {:.2}%",
                rel(exact)
            ),
        ),
        Check::info(
            "mc-cir-vs-reduction",
            format!("one-sided BM(1 -> 2) median {one_sided:.4} differs from Euler by {:.2}%", rel(one_sided)),
        ),
    ])
}

fn mc_ou_deciles(paths: usize, seed: u64, workers: usize) -> Result<(bool, String)> {
    let reduced = reduce_ou(0.0, 1.0, SQRT_2, 1.0)?;
    let cfg = McConfig::new(paths, DEFAULT_EULER_DT, 10.0, seed)?.with_workers(workers);
    let s = simulate_euler(&EulerProcess::Ou { z: 0.0, mu: 1.0, sigma: SQRT_2, s0: 1.0 }, &cfg)?;
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for k in 1..10 {
        let q = k as f64 / 10.0;
        let t = reduced.original_time(invert_cdf(|u| first_passage_cdf(&reduced.bm_problem, u), q)?);
        let e = s.ecdf(t);
        ok &= e.agrees_with(q, 3.0, 0.0);
        worst = worst.max((e.value - q).abs() / e.std_error);
    }
    Ok((ok, format!("worst OU decile deviation {worst:.2} SE against the pushed-forward law")))
}
