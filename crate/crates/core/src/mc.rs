//! Monte Carlo oracle: discretized paths with Brownian-bridge crossing
//! detection.
//!
//! Every path draws from its own ChaCha stream keyed on `(seed, path index)`
//! and results are gathered in path order, so a run is bit-for-bit the same
//! whatever the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{ensure, Error, Result};
use crate::linear_passage::{first_passage_mean, PassageProblem};

/// A path whose distance drifts away from the boundary is abandoned once
/// its probability of ever coming back, `exp(−2|b|·|D|)`, drops below this.
pub const RETURN_CUTOFF: f64 = 1e-12;

/// Default step for Brownian distance processes.
pub const DEFAULT_BM_DT: f64 = 1e-3;

/// Default step for Euler schemes.
pub const DEFAULT_EULER_DT: f64 = 1e-4;

/// How far an Euler state may overshoot its natural domain (before
/// clamping) without being reported as unstable.
pub const DOMAIN_SLACK: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    /// Worker threads; 0 uses the global rayon pool.
    pub workers: usize,
    /// Detect crossings hidden inside a step with the bridge probability.
    pub bridge_correction: bool,
}

impl McConfig {
    pub fn new(n_paths: usize, dt: f64, horizon: f64, seed: u64) -> Result<Self> {
        let cfg = Self { n_paths, dt, horizon, seed, workers: 0, bridge_correction: true };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Horizon `50·E(τ₁)`, or `50·(a−x)²` for a flat boundary; step
    /// [`DEFAULT_BM_DT`].
    pub fn for_problem(p: &PassageProblem, n_paths: usize, seed: u64) -> Result<Self> {
        let d = p.gap();
        let horizon = if p.b == 0.0 || !p.is_recurrent() { 50.0 * d * d } else { 50.0 * first_passage_mean(p)? };
        Self::new(n_paths, DEFAULT_BM_DT, horizon, seed)
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_bridge_correction(mut self, on: bool) -> Self {
        self.bridge_correction = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.n_paths >= 1, || "n_paths must be >= 1".into())?;
        ensure(self.dt.is_finite() && self.dt > 0.0, || format!("dt must be > 0, got {}", self.dt))?;
        ensure(self.horizon.is_finite() && self.horizon >= self.dt, || {
            format!("horizon must be finite and >= dt, got {} (dt = {})", self.horizon, self.dt)
        })
    }

    fn rng(&self, path: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(path as u64);
        rng
    }

    /// Runs `f` on every path index and returns the results in path order.
    fn run<T: Send>(&self, f: impl Fn(usize, &mut ChaCha8Rng) -> T + Sync + Send) -> Vec<T> {
        let job = || (0..self.n_paths).into_par_iter().map(|i| f(i, &mut self.rng(i))).collect();
        if self.workers == 0 {
            job()
        } else {
            match rayon::ThreadPoolBuilder::new().num_threads(self.workers).build() {
                Ok(pool) => pool.install(job),
                Err(_) => job(),
            }
        }
    }

    /// Step lengths covering `[0, span]`, the last one possibly shorter.
    fn steps(&self, span: f64) -> (usize, f64) {
        let full = (span / self.dt).floor();
        let rest = span - full * self.dt;
        if rest > 1e-9 * self.dt {
            (full as usize + 1, rest)
        } else {
            (full as usize, self.dt)
        }
    }
}

/// Point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_effective: usize,
}

impl McEstimate {
    /// Fraction of successes with the binomial standard error.
    pub fn proportion(hits: usize, n: usize) -> Self {
        let p = hits as f64 / n as f64;
        Self { value: p, std_error: (p * (1.0 - p) / n as f64).sqrt(), n_effective: n }
    }

    /// Sample mean with the empirical standard error.
    pub fn mean(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { value: f64::NAN, std_error: f64::NAN, n_effective: 0 };
        }
        let m = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 { xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        Self { value: m, std_error: (var / n as f64).sqrt(), n_effective: n }
    }

    /// `|value − target| ≤ k·SE + bias`
    pub fn agrees_with(&self, target: f64, k: f64, bias: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error + bias
    }
}

/// Simulated passage times. Censored paths carry the horizon (or `+∞` if
/// they were abandoned as never returning) and `censored = true`.
#[derive(Debug, Clone, PartialEq)]
pub struct PassageSample {
    pub times: Vec<f64>,
    pub censored: Vec<bool>,
    pub horizon: f64,
}

impl PassageSample {
    fn from_paths(paths: Vec<Option<f64>>, horizon: f64) -> Self {
        let censored: Vec<bool> = paths.iter().map(Option::is_none).collect();
        let times = paths.into_iter().map(|t| t.unwrap_or(horizon)).collect();
        Self { times, censored, horizon }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_censored(&self) -> usize {
        self.censored.iter().filter(|&&c| c).count()
    }

    /// Empirical `P(τ ≤ t)` for `t` up to the horizon.
    pub fn ecdf(&self, t: f64) -> McEstimate {
        let hits = self.times.iter().zip(&self.censored).filter(|(&s, &c)| !c && s <= t).count();
        McEstimate::proportion(hits, self.len())
    }

    /// Mean over the uncensored times.
    pub fn mean_uncensored(&self) -> McEstimate {
        let xs: Vec<f64> = self.times.iter().zip(&self.censored).filter(|(_, &c)| !c).map(|(&s, _)| s).collect();
        McEstimate::mean(&xs)
    }

    /// Empirical `q`-quantile counting censored paths as `+∞`; `None` when
    /// it falls among the censored ones.
    pub fn quantile(&self, q: f64) -> Option<f64> {
        let mut xs: Vec<f64> =
            self.times.iter().zip(&self.censored).map(|(&s, &c)| if c { f64::INFINITY } else { s }).collect();
        xs.sort_by(f64::total_cmp);
        let k = ((q * xs.len() as f64).ceil() as usize).clamp(1, xs.len()) - 1;
        xs.get(k).copied().filter(|x| x.is_finite())
    }
}

/// Probability that a Brownian bridge of variance `var` between `d0` and
/// `d1` touches zero: `exp(−2·d0·d1/var)` for same-sign endpoints, 1
/// otherwise.
pub fn bridge_crossing_probability(d0: f64, d1: f64, var: f64) -> f64 {
    if d0 * d1 <= 0.0 {
        1.0
    } else {
        (-2.0 * d0 * d1 / var).exp()
    }
}

/// Fraction of the step at which a crossing is placed: the root of the
/// straight line through `|d0|` and `−|d1|`.
fn crossing_fraction(d0: f64, d1: f64) -> f64 {
    let (a, b) = (d0.abs(), d1.abs());
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

/// Advances `D` by one step of drift `-b` and unit diffusion; returns the
/// new value and whether the step touched zero.
#[inline]
fn bm_step(rng: &mut ChaCha8Rng, d: f64, b: f64, h: f64, bridge: bool) -> (f64, bool) {
    let z: f64 = rng.sample(StandardNormal);
    let next = d - b * h + h.sqrt() * z;
    let hit = if d * next <= 0.0 {
        true
    } else if bridge {
        rng.random::<f64>() < bridge_crossing_probability(d, next, h)
    } else {
        false
    };
    (next, hit)
}

/// The distance has drift `−b`; once it points away from zero and
/// `exp(−2|b||D|)` is negligible, the path is not coming back.
#[inline]
fn escaped(d: f64, b: f64) -> bool {
    d * b < 0.0 && (-2.0 * (b * d).abs()).exp() < RETURN_CUTOFF
}

/// First passage of `x + B_t` through `a + b·t` on `[0, horizon]`.
pub fn simulate_first_passage(p: &PassageProblem, cfg: &McConfig) -> Result<PassageSample> {
    cfg.validate()?;
    p.require_off_boundary()?;
    let (n_steps, last) = cfg.steps(cfg.horizon);
    let d0 = p.x - p.a;
    let b = p.b;
    let paths = cfg.run(|_, rng| {
        let mut d = d0;
        for k in 0..n_steps {
            let h = if k + 1 == n_steps { last } else { cfg.dt };
            let (next, hit) = bm_step(rng, d, b, h, cfg.bridge_correction);
            if hit {
                return Some(k as f64 * cfg.dt + crossing_fraction(d, next) * h);
            }
            d = next;
            if escaped(d, b) {
                return None;
            }
        }
        None
    });
    Ok(PassageSample::from_paths(paths, cfg.horizon))
}

/// `P(no zero of B_t − b·t in (s, s + gap))` for paths started on the line.
///
/// The distance at time `s` is drawn exactly as `N(−bs, s)`; the window is
/// then stepped with bridge detection. `cfg.horizon` is not used.
pub fn estimate_no_zero_probability(b: f64, s: f64, gap: f64, cfg: &McConfig) -> Result<McEstimate> {
    cfg.validate()?;
    ensure(b.is_finite(), || format!("slope must be finite, got {b}"))?;
    ensure(s.is_finite() && s > 0.0, || format!("s must be > 0, got {s}"))?;
    ensure(gap >= 0.0, || format!("gap must be >= 0, got {gap}"))?;
    if gap == 0.0 {
        return Ok(McEstimate::proportion(cfg.n_paths, cfg.n_paths));
    }
    let window = if gap.is_finite() { Some(cfg.steps(gap)) } else { None };
    let flags = cfg.run(|_, rng| {
        let z: f64 = rng.sample(StandardNormal);
        let mut d = -b * s + s.sqrt() * z;
        let mut k = 0usize;
        loop {
            if escaped(d, b) {
                return true;
            }
            let h = match window {
                Some((n, last)) if k + 1 == n => last,
                Some((n, _)) if k >= n => return true,
                _ => cfg.dt,
            };
            if window.is_none() && b == 0.0 {
                // a driftless path always comes back
                return false;
            }
            let (next, hit) = bm_step(rng, d, b, h, cfg.bridge_correction);
            if hit {
                return false;
            }
            d = next;
            k += 1;
        }
    });
    Ok(McEstimate::proportion(flags.iter().filter(|&&ok| ok).count(), cfg.n_paths))
}

/// `P(last zero before t is ≤ u)` for paths started on the line, i.e. the
/// probability of no zero in `(u, t)`.
pub fn estimate_last_passage_cdf(b: f64, t: f64, u: f64, cfg: &McConfig) -> Result<McEstimate> {
    ensure(0.0 < u && u < t, || format!("need 0 < u < t, got u = {u}, t = {t}"))?;
    estimate_no_zero_probability(b, u, t - u, cfg)
}

/// Diffusions simulated by Euler–Maruyama against their barrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EulerProcess {
    /// `dZ = dt/4 + √(Z ∨ 0) dB` against the level `barrier`.
    Cir { z: f64, barrier: f64 },
    /// `dZ = (1/4 − Z/2) dt + √(Z(1−Z) ∨ 0) dB`, kept in `[0, 1]`, against
    /// the level `barrier`.
    WrightFisher { z: f64, barrier: f64 },
    /// `dZ = rZ dt + σZ dB` against `exp(σS₀ + μ′t)`.
    Gbm { z: f64, r: f64, sigma: f64, s0: f64, mu_prime: f64 },
    /// `dZ = −μZ dt + σ dB` against `S₀e^{−μt}`.
    Ou { z: f64, mu: f64, sigma: f64, s0: f64 },
}

impl EulerProcess {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Cir { z, barrier } => z >= 0.0 && barrier >= 0.0 && z != barrier,
            Self::WrightFisher { z, barrier } => {
                (0.0..=1.0).contains(&z) && (0.0..=1.0).contains(&barrier) && z != barrier
            }
            Self::Gbm { z, sigma, .. } => z > 0.0 && sigma > 0.0,
            Self::Ou { z, mu, sigma, s0 } => mu > 0.0 && sigma > 0.0 && s0 > z,
        };
        ensure(ok, || format!("parameters outside the process domain: {self:?}"))
    }

    fn start(&self) -> f64 {
        match *self {
            Self::Cir { z, .. } | Self::WrightFisher { z, .. } | Self::Gbm { z, .. } | Self::Ou { z, .. } => z,
        }
    }

    fn drift(&self, z: f64) -> f64 {
        match *self {
            Self::Cir { .. } => 0.25,
            Self::WrightFisher { .. } => 0.25 - 0.5 * z,
            Self::Gbm { r, .. } => r * z,
            Self::Ou { mu, .. } => -mu * z,
        }
    }

    fn diffusion(&self, z: f64) -> f64 {
        match *self {
            Self::Cir { .. } => z.max(0.0).sqrt(),
            Self::WrightFisher { .. } => (z * (1.0 - z)).max(0.0).sqrt(),
            Self::Gbm { sigma, .. } => sigma * z,
            Self::Ou { sigma, .. } => sigma,
        }
    }

    fn barrier(&self, t: f64) -> f64 {
        match *self {
            Self::Cir { barrier, .. } | Self::WrightFisher { barrier, .. } => barrier,
            Self::Gbm { sigma, s0, mu_prime, .. } => (sigma * s0 + mu_prime * t).exp(),
            Self::Ou { mu, s0, .. } => s0 * (-mu * t).exp(),
        }
    }

    /// Clamps into the natural domain; `None` when the raw step overshot it
    /// by more than [`DOMAIN_SLACK`] or is not finite.
    fn admit(&self, z: f64) -> Option<f64> {
        if !z.is_finite() {
            return None;
        }
        match self {
            Self::Cir { .. } => (z >= -DOMAIN_SLACK).then_some(z),
            Self::WrightFisher { .. } => (-DOMAIN_SLACK..=1.0 + DOMAIN_SLACK).contains(&z).then_some(z.clamp(0.0, 1.0)),
            Self::Gbm { .. } => (z > 0.0).then_some(z),
            Self::Ou { .. } => Some(z),
        }
    }
}

/// First passage of an Euler–Maruyama path through the process barrier.
///
/// Hidden crossings inside a step use the bridge probability with the local
/// variance `σ(Z_k)²·dt`.
pub fn simulate_euler(process: &EulerProcess, cfg: &McConfig) -> Result<PassageSample> {
    cfg.validate()?;
    process.validate()?;
    let (n_steps, last) = cfg.steps(cfg.horizon);
    let results = cfg.run(|path, rng| -> Result<Option<f64>> {
        let mut z = process.start();
        let mut t = 0.0;
        for k in 0..n_steps {
            let h = if k + 1 == n_steps { last } else { cfg.dt };
            let sig = process.diffusion(z);
            let w: f64 = rng.sample(StandardNormal);
            let raw = z + process.drift(z) * h + sig * h.sqrt() * w;
            let next = process.admit(raw).ok_or_else(|| Error::Unstable {
                path: path as u64,
                step: k as u64,
                detail: format!("state {raw} left the domain of {process:?}"),
            })?;
            let t_next = t + h;
            let d0 = z - process.barrier(t);
            let d1 = next - process.barrier(t_next);
            let hit = if d0 * d1 <= 0.0 {
                true
            } else if cfg.bridge_correction && sig > 0.0 {
                rng.random::<f64>() < bridge_crossing_probability(d0, d1, sig * sig * h)
            } else {
                false
            };
            if hit {
                return Ok(Some(t + crossing_fraction(d0, d1) * h));
            }
            z = next;
            t = t_next;
        }
        Ok(None)
    });
    let paths = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(PassageSample::from_paths(paths, cfg.horizon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear_passage::first_passage_cdf;
    use crate::numerics::norm_cdf;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bridge_probability_examples() {
        assert_abs_diff_eq!(bridge_crossing_probability(1.0, 1.0, 1.0), (-2f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(bridge_crossing_probability(1.0, 1.0, 1.0), 0.1353, epsilon = 1e-4);
        assert_eq!(bridge_crossing_probability(1.0, -0.5, 1.0), 1.0);
        assert_eq!(bridge_crossing_probability(-2.0, -3.0, 1e-3), 0.0);
    }

    #[test]
    fn bridge_probability_matches_reflection() {
        // P(max of a standard bridge from 0 to 0 over [0,1] ≥ m) = e^{−2m²}
        let cfg = McConfig::new(20_000, 1e-3, 1.0, 11).unwrap();
        let m: f64 = 0.5;
        let flags = cfg.run(|_, rng| {
            let (mut w, mut hit) = (0.0f64, false);
            let n = 1000;
            let h = 1.0 / n as f64;
            for k in 0..n {
                let z: f64 = rng.sample(StandardNormal);
                // bridge from 0 to 0: increments of BM minus linear pull
                let rem = 1.0 - k as f64 * h;
                let next = w + (-w / rem) * h + (h * (rem - h) / rem).sqrt() * z;
                let (d0, d1) = (m - w, m - next);
                if d0 * d1 <= 0.0 || rng.random::<f64>() < bridge_crossing_probability(d0, d1, h) {
                    hit = true;
                    break;
                }
                w = next;
            }
            hit
        });
        let est = McEstimate::proportion(flags.iter().filter(|&&h| h).count(), cfg.n_paths);
        assert!(est.agrees_with((-2.0 * m * m).exp(), 4.0, 0.0), "{est:?}");
    }

    #[test]
    fn config_validation() {
        assert!(McConfig::new(0, 1e-3, 1.0, 1).is_err());
        assert!(McConfig::new(10, 0.0, 1.0, 1).is_err());
        assert!(McConfig::new(10, 1e-3, 1e-4, 1).is_err());
        let p = PassageProblem::new(0.0, 1.0, -1.0).unwrap();
        assert_eq!(McConfig::for_problem(&p, 10, 1).unwrap().horizon, 50.0);
        let p = PassageProblem::new(0.0, 2.0, 0.0).unwrap();
        assert_eq!(McConfig::for_problem(&p, 10, 1).unwrap().horizon, 200.0);
    }

    #[test]
    fn steps_cover_the_span() {
        let cfg = McConfig::new(1, 0.3, 1.0, 0).unwrap();
        let (n, last) = cfg.steps(1.0);
        assert_eq!(n, 4);
        assert_abs_diff_eq!(3.0 * 0.3 + last, 1.0, epsilon = 1e-12);
        let cfg = McConfig::new(1, 0.25, 1.0, 0).unwrap();
        assert_eq!(cfg.steps(1.0), (4, 0.25));
    }

    #[test]
    fn estimates() {
        let e = McEstimate::proportion(25, 100);
        assert_eq!(e.value, 0.25);
        assert_abs_diff_eq!(e.std_error, (0.25f64 * 0.75 / 100.0).sqrt(), epsilon = 1e-15);
        let m = McEstimate::mean(&[1.0, 2.0, 3.0]);
        assert_eq!(m.value, 2.0);
        assert_abs_diff_eq!(m.std_error, (1.0f64 / 3.0).sqrt(), epsilon = 1e-15);
        assert!(m.agrees_with(2.5, 1.0, 0.0));
        assert!(!m.agrees_with(3.5, 1.0, 0.0));
    }

    #[test]
    fn sample_statistics() {
        let s = PassageSample::from_paths(vec![Some(1.0), None, Some(3.0), Some(2.0)], 10.0);
        assert_eq!(s.n_censored(), 1);
        assert_eq!(s.ecdf(2.0).value, 0.5);
        assert_eq!(s.mean_uncensored().value, 2.0);
        assert_eq!(s.quantile(0.5), Some(2.0));
        assert_eq!(s.quantile(1.0), None);
    }

    #[test]
    fn reproducible_across_worker_counts() {
        let p = PassageProblem::new(0.0, 1.0, -1.0).unwrap();
        let cfg = McConfig::new(300, 1e-2, 20.0, 42).unwrap();
        let a = simulate_first_passage(&p, &cfg.with_workers(1)).unwrap();
        let b = simulate_first_passage(&p, &cfg.with_workers(3)).unwrap();
        let c = simulate_first_passage(&p, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        let d = simulate_first_passage(&p, &McConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn first_passage_cdf_matches() {
        let p = PassageProblem::new(0.0, 1.0, -1.0).unwrap();
        let cfg = McConfig::new(20_000, 2e-3, 20.0, 5).unwrap();
        let s = simulate_first_passage(&p, &cfg).unwrap();
        for t in [0.25, 0.5, 1.0, 2.0] {
            let e = s.ecdf(t);
            let exact = first_passage_cdf(&p, t).unwrap();
            assert!(e.agrees_with(exact, 3.0, 2e-3), "t={t}: {e:?} vs {exact}");
        }
        assert!(s.mean_uncensored().agrees_with(1.0, 3.0, 2e-3));
    }

    #[test]
    fn uncorrected_crossings_come_late() {
        let p = PassageProblem::new(0.0, 1.0, -1.0).unwrap();
        let cfg = McConfig::new(10_000, 1e-2, 20.0, 9).unwrap();
        let with = simulate_first_passage(&p, &cfg).unwrap();
        let without = simulate_first_passage(&p, &cfg.with_bridge_correction(false)).unwrap();
        let exact = first_passage_cdf(&p, 0.5).unwrap();
        let late = without.ecdf(0.5);
        assert!(late.value + 3.0 * late.std_error < exact, "{late:?} vs {exact}");
        assert!(with.ecdf(0.5).agrees_with(exact, 3.0, 5e-3));
    }

    #[test]
    fn transient_paths_are_censored() {
        let p = PassageProblem::new(0.0, 1.0, 1.0).unwrap();
        let cfg = McConfig::new(4000, 1e-2, 100.0, 3).unwrap();
        let s = simulate_first_passage(&p, &cfg).unwrap();
        let e = McEstimate::proportion(s.len() - s.n_censored(), s.len());
        assert!(e.agrees_with((-2f64).exp(), 3.0, 0.01), "{e:?}");
    }

    #[test]
    fn no_zero_arcsine() {
        let cfg = McConfig::new(10_000, 1e-3, 1.0, 7).unwrap();
        let e = estimate_no_zero_probability(0.0, 1.0, 3.0, &cfg).unwrap();
        assert!(e.agrees_with(1.0 / 3.0, 3.0, 0.0), "{e:?}");
        assert_eq!(estimate_no_zero_probability(0.0, 1.0, 0.0, &cfg).unwrap().value, 1.0);
    }

    #[test]
    fn no_zero_long_window_approaches_the_limit() {
        let cfg = McConfig::new(2000, 1e-2, 1.0, 8).unwrap();
        let e = estimate_no_zero_probability(-1.0, 1.0, 100.0, &cfg).unwrap();
        let limit = 2.0 * (norm_cdf(1.0) - 0.5);
        assert!(e.agrees_with(limit, 3.0, 0.0), "{e:?} vs {limit}");
    }

    #[test]
    fn last_passage_arcsine() {
        let cfg = McConfig::new(10_000, 1e-3, 1.0, 13).unwrap();
        let half = estimate_last_passage_cdf(0.0, 1.0, 0.5, &cfg).unwrap();
        assert!(half.agrees_with(0.5, 3.0, 0.0), "{half:?}");
        let quarter = estimate_last_passage_cdf(0.0, 1.0, 0.25, &cfg).unwrap();
        assert!(quarter.agrees_with(1.0 / 3.0, 3.0, 0.0), "{quarter:?}");
        assert!(estimate_last_passage_cdf(0.0, 1.0, 1.0, &cfg).is_err());
    }

    #[test]
    fn wright_fisher_stays_in_the_unit_interval() {
        let process = EulerProcess::WrightFisher { z: 0.02, barrier: 0.9 };
        let cfg = McConfig::new(200, 1e-3, 5.0, 1).unwrap();
        let s = simulate_euler(&process, &cfg).unwrap();
        assert_eq!(s.len(), 200);
        for z in [-0.1, 0.0, 0.5, 1.0, 1.1] {
            let admitted = process.admit(z).unwrap();
            assert!((0.0..=1.0).contains(&admitted));
        }
        assert!(process.admit(1.0 + 2.0 * DOMAIN_SLACK).is_none());
    }

    #[test]
    fn unstable_steps_are_reported() {
        let process = EulerProcess::Gbm { z: 1.0, r: 0.0, sigma: 3.0, s0: 10.0, mu_prime: 0.0 };
        let cfg = McConfig::new(100, 1.0, 50.0, 2).unwrap();
        assert!(matches!(simulate_euler(&process, &cfg), Err(Error::Unstable { .. })));
    }

    #[test]
    fn euler_domains_enforced() {
        let cfg = McConfig::new(1, 1e-3, 1.0, 0).unwrap();
        assert!(simulate_euler(&EulerProcess::Cir { z: -1.0, barrier: 1.0 }, &cfg).is_err());
        assert!(simulate_euler(&EulerProcess::Ou { z: 1.0, mu: 1.0, sigma: 1.0, s0: 0.5 }, &cfg).is_err());
    }

    #[test]
    fn euler_ou_matches_reduction() {
        // τ = ln(1 + τ_B)/2 with τ_B the BM(0 → 1) hitting time
        let process = EulerProcess::Ou { z: 0.0, mu: 1.0, sigma: std::f64::consts::SQRT_2, s0: 1.0 };
        let cfg = McConfig::new(4000, 1e-3, 10.0, 17).unwrap();
        let s = simulate_euler(&process, &cfg).unwrap();
        let q = PassageProblem::new(0.0, 1.0, 0.0).unwrap();
        for t in [0.2f64, 0.5, 1.0] {
            let exact = first_passage_cdf(&q, (2.0 * t).exp_m1()).unwrap();
            assert!(s.ecdf(t).agrees_with(exact, 3.0, 0.01), "t={t}");
        }
    }
}
