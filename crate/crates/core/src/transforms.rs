//! Reductions of time-changed and conjugated diffusions to Brownian passage
//! problems.
//!
//! A process `Z(t) = z + B(ρ(t))` crosses a constant barrier exactly when
//! the Brownian motion does, on the clock `ρ`; so `τ_n(Z) = ρ⁻¹(τ_n^B)`.
//! A process conjugated to BM, `Z = v⁻¹(B_t + v(z))`, crosses `a` exactly
//! when `B_t + v(z)` crosses `v(a)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{ensure, invalid, Result};
use std::f64::consts::PI;

use crate::linear_passage::{first_passage_cdf, first_passage_density_unchecked, hit_probability, PassageProblem};
use crate::numerics::{norm_cdf, QuadSpec};
use crate::successive::{nth_passage_law, DensityGrid, NthPassageLaw};

type RealMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Number of sample points used to validate user-supplied monotone maps.
const VALIDATION_POINTS: usize = 1000;

/// Upper end of the range on which custom clocks are validated.
const CLOCK_VALIDATION_HORIZON: f64 = 100.0;

/// Increasing clock `ρ` with `ρ(0) = 0`.
#[derive(Clone)]
pub enum TimeChange {
    Identity,
    /// `ρ(t) = c·t`
    Linear {
        c: f64,
    },
    /// `ρ(t) = t^p`
    Power {
        p: f64,
    },
    /// `ρ(t) = σ²/(2μ)·(e^{2μt} − 1)`, the clock of an Ornstein–Uhlenbeck
    /// process written as `e^{−μt}(z + B(ρ(t)))`.
    OrnsteinUhlenbeck {
        mu: f64,
        sigma: f64,
    },
    Custom(CustomClock),
}

/// User-supplied clock; the inverse is found by bisection.
#[derive(Clone)]
pub struct CustomClock {
    label: String,
    rho: RealMap,
    derivative: RealMap,
}

impl CustomClock {
    /// Checks `ρ(0) = 0` and strict increase on a 10³-point grid of
    /// `[0, 100]` before accepting the map.
    pub fn new(
        label: impl Into<String>,
        rho: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        ensure(rho(0.0) == 0.0, || format!("custom clock must satisfy rho(0) = 0, got {}", rho(0.0)))?;
        check_increasing(&rho, 0.0, CLOCK_VALIDATION_HORIZON, "custom clock rho")?;
        Ok(Self { label: label.into(), rho: Arc::new(rho), derivative: Arc::new(derivative) })
    }
}

impl TimeChange {
    pub fn linear(c: f64) -> Result<Self> {
        ensure(c.is_finite() && c > 0.0, || format!("linear clock needs c > 0, got {c}"))?;
        Ok(Self::Linear { c })
    }

    pub fn power(p: f64) -> Result<Self> {
        ensure(p.is_finite() && p > 0.0, || format!("power clock needs p > 0, got {p}"))?;
        Ok(Self::Power { p })
    }

    pub fn ornstein_uhlenbeck(mu: f64, sigma: f64) -> Result<Self> {
        ensure(mu.is_finite() && mu > 0.0, || format!("OU clock needs mu > 0, got {mu}"))?;
        ensure(sigma.is_finite() && sigma > 0.0, || format!("OU clock needs sigma > 0, got {sigma}"))?;
        Ok(Self::OrnsteinUhlenbeck { mu, sigma })
    }

    pub fn rho(&self, t: f64) -> f64 {
        match self {
            Self::Identity => t,
            Self::Linear { c } => c * t,
            Self::Power { p } => t.powf(*p),
            Self::OrnsteinUhlenbeck { mu, sigma } => sigma * sigma / (2.0 * mu) * (2.0 * mu * t).exp_m1(),
            Self::Custom(c) => (c.rho)(t),
        }
    }

    pub fn rho_inverse(&self, u: f64) -> f64 {
        match self {
            Self::Identity => u,
            Self::Linear { c } => u / c,
            Self::Power { p } => u.powf(p.recip()),
            Self::OrnsteinUhlenbeck { mu, sigma } => (2.0 * mu * u / (sigma * sigma)).ln_1p() / (2.0 * mu),
            Self::Custom(c) => invert_increasing(&*c.rho, u),
        }
    }

    /// `ρ′(t)`
    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            Self::Identity => 1.0,
            Self::Linear { c } => *c,
            Self::Power { p } => p * t.powf(p - 1.0),
            Self::OrnsteinUhlenbeck { mu, sigma } => sigma * sigma * (2.0 * mu * t).exp(),
            Self::Custom(c) => (c.derivative)(t),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Self::Identity)
    }

    /// Human-readable formula for `ρ`.
    pub fn label(&self) -> String {
        match self {
            Self::Identity => "rho(t) = t".into(),
            Self::Linear { c } => format!("rho(t) = {c}*t"),
            Self::Power { p } => format!("rho(t) = t^{p}"),
            Self::OrnsteinUhlenbeck { mu, sigma } => {
                let k = sigma * sigma / (2.0 * mu);
                let r = 2.0 * mu;
                if (k - 1.0).abs() < 1e-3 {
                    format!("rho(t) = e^({r}t) - 1")
                } else {
                    format!("rho(t) = {k}*(e^({r}t) - 1)")
                }
            }
            Self::Custom(c) => c.label.clone(),
        }
    }
}

impl fmt::Debug for TimeChange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Increasing state map `v` with `v(0) = 0` that turns a diffusion into
/// Brownian motion: `Z(t) = v⁻¹(B_t + v(z))`.
#[derive(Clone)]
pub enum Conjugation {
    /// `v(z) = 2√z` on `[0, ∞)`; `dZ = dt/4 + √(Z ∨ 0) dB`.
    Cir,
    /// `v(z) = 2·arcsin √z` on `[0, 1]`;
    /// `dZ = (1/4 − Z/2) dt + √(Z(1 − Z) ∨ 0) dB`.
    WrightFisher,
    Custom(CustomConjugation),
}

#[derive(Clone)]
pub struct CustomConjugation {
    label: String,
    v: RealMap,
    v_inverse: RealMap,
    domain: (f64, f64),
}

impl CustomConjugation {
    /// Validates `v(0) = 0`, strict increase on a 10³-point grid of the
    /// (finite) `domain`, and the round trip `v⁻¹(v(z)) = z` on that grid.
    pub fn new(
        label: impl Into<String>,
        v: impl Fn(f64) -> f64 + Send + Sync + 'static,
        v_inverse: impl Fn(f64) -> f64 + Send + Sync + 'static,
        domain: (f64, f64),
    ) -> Result<Self> {
        let (lo, hi) = domain;
        ensure(lo.is_finite() && hi.is_finite() && lo < hi, || {
            format!("custom conjugation needs a finite domain lo < hi, got [{lo}, {hi}]")
        })?;
        ensure(lo <= 0.0 && 0.0 <= hi, || "custom conjugation domain must contain 0".into())?;
        ensure(v(0.0) == 0.0, || format!("custom conjugation must satisfy v(0) = 0, got {}", v(0.0)))?;
        check_increasing(&v, lo, hi, "custom conjugation v")?;
        for k in 0..=VALIDATION_POINTS {
            let z = lo + (hi - lo) * k as f64 / VALIDATION_POINTS as f64;
            let back = v_inverse(v(z));
            ensure((back - z).abs() <= 1e-10 * z.abs().max(1.0), || {
                format!("v_inverse(v({z})) = {back} does not round-trip")
            })?;
        }
        Ok(Self { label: label.into(), v: Arc::new(v), v_inverse: Arc::new(v_inverse), domain })
    }
}

impl Conjugation {
    pub fn domain(&self) -> (f64, f64) {
        match self {
            Self::Cir => (0.0, f64::INFINITY),
            Self::WrightFisher => (0.0, 1.0),
            Self::Custom(c) => c.domain,
        }
    }

    pub fn v(&self, z: f64) -> f64 {
        match self {
            Self::Cir => 2.0 * z.sqrt(),
            Self::WrightFisher => 2.0 * z.sqrt().asin(),
            Self::Custom(c) => (c.v)(z),
        }
    }

    pub fn v_inverse(&self, y: f64) -> f64 {
        match self {
            Self::Cir => 0.25 * y * y,
            Self::WrightFisher => (0.5 * y).sin().powi(2),
            Self::Custom(c) => (c.v_inverse)(y),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Self::Cir => "CIR",
            Self::WrightFisher => "Wright-Fisher",
            Self::Custom(c) => &c.label,
        }
    }

    fn require_in_domain(&self, z: f64, what: &str) -> Result<()> {
        let (lo, hi) = self.domain();
        ensure(z.is_finite() && lo <= z && z <= hi, || {
            format!("{what} = {z} outside the {} domain [{lo}, {hi}]", self.name())
        })
    }
}

impl fmt::Debug for Conjugation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A Brownian passage problem together with the clock that maps its
/// passage times back to those of the original process.
#[derive(Clone, Debug)]
pub struct ReducedProblem {
    pub bm_problem: PassageProblem,
    pub time_map: TimeChange,
    pub description: String,
}

impl ReducedProblem {
    /// Passage time of the original process given the Brownian one.
    pub fn original_time(&self, bm_time: f64) -> f64 {
        self.time_map.rho_inverse(bm_time)
    }
}

/// `Z(t) = z + B(ρ(t))` against the constant barrier `a`.
pub fn reduce_time_changed(z: f64, a: f64, tc: TimeChange) -> Result<ReducedProblem> {
    let bm_problem = PassageProblem::new(z, a, 0.0)?;
    bm_problem.require_off_boundary()?;
    Ok(ReducedProblem { bm_problem, description: format!("time-changed BM, {}", tc.label()), time_map: tc })
}

/// Diffusion conjugated to BM by `v`, against the constant barrier `a`:
/// the Brownian problem starts at `v(z)` with barrier `v(a)`.
///
/// The built-in `v⁻¹` are not injective on all of ℝ (`y²/4` folds at 0,
/// `sin²(y/2)` is periodic), so the Brownian motion can also bring `Z` to `a`
/// through a second preimage of `a`. The reduction ignores those; for CIR
/// started below the barrier see [`cir_first_passage_cdf`].
pub fn reduce_conjugated(conj: &Conjugation, z: f64, a: f64) -> Result<ReducedProblem> {
    conj.require_in_domain(z, "start z")?;
    conj.require_in_domain(a, "barrier a")?;
    let bm_problem = PassageProblem::new(conj.v(z), conj.v(a), 0.0)?;
    ensure(bm_problem.x != bm_problem.a, || format!("v(z) = v(a) = {}: start lies on the barrier", bm_problem.a))?;
    Ok(ReducedProblem {
        bm_problem,
        time_map: TimeChange::Identity,
        description: format!("{} conjugated to BM", conj.name()),
    })
}

/// Drift `μ = r − σ²/2` of `ln Z` for geometric BM.
pub fn gbm_log_drift(r: f64, sigma: f64) -> f64 {
    r - 0.5 * sigma * sigma
}

/// Geometric BM `dZ = rZ dt + σZ dB` against `S(t) = exp(σS₀ + μ′t)`.
///
/// `ln Z/σ` is BM with drift `μ/σ` started at `ln z/σ`, so the passage is
/// that of `ln z/σ + B_t` through `S₀ + (μ′ − μ)t/σ`. No time change.
/// A start on the barrier is reduced as is; the passage laws reject it.
pub fn reduce_gbm(z: f64, r: f64, sigma: f64, s0: f64, mu_prime: f64) -> Result<ReducedProblem> {
    ensure(z.is_finite() && z > 0.0, || format!("GBM start must be positive, got z = {z}"))?;
    ensure(sigma.is_finite() && sigma > 0.0, || format!("GBM volatility must be positive, got sigma = {sigma}"))?;
    let mu = gbm_log_drift(r, sigma);
    let bm_problem = PassageProblem::new(z.ln() / sigma, s0, (mu_prime - mu) / sigma)?;
    Ok(ReducedProblem {
        bm_problem,
        time_map: TimeChange::Identity,
        description: format!("geometric BM, mu = r - sigma^2/2 = {mu}"),
    })
}

/// Ornstein–Uhlenbeck `dZ = −μZ dt + σ dB` against `S(t) = S₀e^{−μt}`,
/// `S₀ > z`: the Brownian problem is `z → S₀` on the clock
/// `ρ(t) = σ²/(2μ)(e^{2μt} − 1)`.
pub fn reduce_ou(z: f64, mu: f64, sigma: f64, s0: f64) -> Result<ReducedProblem> {
    ensure(z.is_finite() && s0.is_finite() && s0 > z, || format!("OU reduction needs S0 > z, got S0 = {s0}, z = {z}"))?;
    let tc = TimeChange::ornstein_uhlenbeck(mu, sigma)?;
    Ok(ReducedProblem {
        bm_problem: PassageProblem::new(z, s0, 0.0)?,
        description: format!("Ornstein-Uhlenbeck, {}", tc.label()),
        time_map: tc,
    })
}

/// Law of `τ_n` for the original process on `grid` (original time):
/// `f_Z(t) = f_B(ρ(t))·ρ′(t)`. The atom at `+∞` carries over unchanged.
///
/// For `n = 1` the Brownian density is closed-form, which also covers
/// transient problems (the atom is then `1 − P(hit)`); higher `n` goes
/// through the grid recursion and needs a recurrent problem.
pub fn pushforward_law(reduced: &ReducedProblem, n: usize, grid: &[f64], spec: &QuadSpec) -> Result<NthPassageLaw> {
    ensure(n >= 1, || "passage index n must be >= 1".into())?;
    ensure(!grid.is_empty(), || "output grid is empty".into())?;
    if let Some(bad) = grid.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(invalid(format!("grid points must be positive and finite, got {bad}")));
    }
    let tc = &reduced.time_map;
    let bm_grid: Vec<f64> = grid.iter().map(|&t| tc.rho(t)).collect();
    let q = reduced.bm_problem;
    let (bm_density, atom) = if n == 1 {
        q.require_off_boundary()?;
        let f = bm_grid.iter().map(|&u| first_passage_density_unchecked(&q, u)).collect::<Vec<_>>();
        (f, 1.0 - hit_probability(&q)?)
    } else {
        let law = nth_passage_law(&q, n, &bm_grid, spec)?;
        (law.density.values().to_vec(), law.atom_at_infinity)
    };
    // ρ′ can overflow where the Brownian density has already underflowed
    let values =
        bm_density.iter().zip(grid).map(|(&f, &t)| if f == 0.0 { 0.0 } else { f * tc.derivative(t) }).collect();
    Ok(NthPassageLaw { n, density: DensityGrid::new(grid.to_vec(), values, f64::INFINITY)?, atom_at_infinity: atom })
}

/// `P(exit of x + B from (lo, hi) by time t)`.
///
/// Method of images for `t ≤ (hi − lo)²`, the odd sine series beyond; both
/// converge geometrically in their range.
pub fn interval_exit_cdf(x: f64, lo: f64, hi: f64, t: f64) -> Result<f64> {
    ensure(lo < x && x < hi, || format!("start {x} must lie inside ({lo}, {hi})"))?;
    ensure(t >= 0.0, || format!("t must be >= 0, got {t}"))?;
    if t == 0.0 {
        return Ok(0.0);
    }
    if t == f64::INFINITY {
        return Ok(1.0);
    }
    let len = hi - lo;
    let y = x - lo;
    let survival = if t <= len * len {
        let st = t.sqrt();
        let mass = |c: f64| norm_cdf((len - c) / st) - norm_cdf(-c / st);
        (-8i32..=8)
            .map(|k| {
                let shift = 2.0 * k as f64 * len;
                mass(y + shift) - mass(-y + shift)
            })
            .sum::<f64>()
    } else {
        let mut sum = 0.0;
        for n in (1..200).step_by(2) {
            let k = n as f64 * PI / len;
            let decay = (-0.5 * k * k * t).exp();
            if decay < 1e-18 {
                break;
            }
            sum += 4.0 / (n as f64 * PI) * (k * y).sin() * decay;
        }
        sum
    };
    Ok((1.0 - survival).clamp(0.0, 1.0))
}

/// `P(τ₁ ≤ t)` for the CIR process `dZ = dt/4 + √(Z ∨ 0) dB` through the
/// level `a`.
///
/// `Z = (B_t + 2√z)²/4` reaches `a` when `B_t + 2√z` reaches `±2√a`; from
/// below (`z < a`) that is the exit of BM from `(−2√a, 2√a)`, not the
/// one-sided passage to `2√a` given by [`reduce_conjugated`]. From above the
/// two coincide.
pub fn cir_first_passage_cdf(z: f64, a: f64, t: f64) -> Result<f64> {
    let r = reduce_conjugated(&Conjugation::Cir, z, a)?;
    let q = r.bm_problem;
    if z < a {
        interval_exit_cdf(q.x, -q.a, q.a, t)
    } else {
        first_passage_cdf(&q, t)
    }
}

fn check_increasing(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, what: &str) -> Result<()> {
    let mut prev = f(lo);
    for k in 1..=VALIDATION_POINTS {
        let x = lo + (hi - lo) * k as f64 / VALIDATION_POINTS as f64;
        let y = f(x);
        ensure(y.is_finite() && y > prev, || format!("{what} is not strictly increasing near {x}"))?;
        prev = y;
    }
    Ok(())
}

/// Solves `f(t) = u` for increasing `f` with `f(0) = 0` by bracketing and
/// bisection to a relative width of 1e-12.
fn invert_increasing(f: &dyn Fn(f64) -> f64, u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while f(hi) < u {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return f64::INFINITY;
        }
    }
    while hi - lo > 1e-12 * hi.max(1e-300) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::integrate;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, SQRT_2};

    #[test]
    fn builtin_clocks_round_trip() {
        let clocks = [
            TimeChange::Identity,
            TimeChange::linear(3.0).unwrap(),
            TimeChange::power(2.0).unwrap(),
            TimeChange::ornstein_uhlenbeck(1.0, SQRT_2).unwrap(),
            TimeChange::ornstein_uhlenbeck(0.3, 0.7).unwrap(),
        ];
        for tc in &clocks {
            assert_eq!(tc.rho(0.0), 0.0);
            for k in 0..=1000 {
                let t = 0.1 * k as f64;
                let back = tc.rho_inverse(tc.rho(t));
                assert!((back - t).abs() <= 1e-10 * t.max(1.0), "{tc:?}: {t} -> {back}");
            }
        }
    }

    #[test]
    fn ou_clock_with_unit_prefactor() {
        let tc = TimeChange::ornstein_uhlenbeck(1.0, SQRT_2).unwrap();
        for t in [0.1, 1.0, 5.0] {
            assert_abs_diff_eq!(tc.rho(t), (2.0 * t).exp() - 1.0, epsilon = 1e-12 * (2.0 * t).exp());
            assert_abs_diff_eq!(tc.rho_inverse(tc.rho(t)), t, epsilon = 1e-12);
        }
        assert_eq!(tc.label(), "rho(t) = e^(2t) - 1");
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let clocks = [
            TimeChange::linear(0.5).unwrap(),
            TimeChange::power(2.5).unwrap(),
            TimeChange::ornstein_uhlenbeck(0.8, 1.3).unwrap(),
        ];
        for tc in &clocks {
            for t in [0.3, 1.0, 2.0] {
                let h = 1e-5;
                let fd = (tc.rho(t + h) - tc.rho(t - h)) / (2.0 * h);
                assert_abs_diff_eq!(tc.derivative(t), fd, epsilon = 1e-6 * fd.abs().max(1.0));
            }
        }
    }

    #[test]
    fn custom_clock_inverts_by_bisection() {
        let tc = TimeChange::Custom(CustomClock::new("t + t^3", |t| t + t * t * t, |t| 1.0 + 3.0 * t * t).unwrap());
        for k in 0..=200 {
            let t = 0.5 * k as f64;
            assert!((tc.rho_inverse(tc.rho(t)) - t).abs() <= 1e-10 * t.max(1.0));
        }
    }

    #[test]
    fn custom_clock_validation() {
        assert!(CustomClock::new("shifted", |t| t + 1.0, |_| 1.0).is_err());
        assert!(CustomClock::new("bump", |t: f64| (t - 1.0).powi(2) - 1.0, |t| 2.0 * (t - 1.0)).is_err());
    }

    #[test]
    fn conjugations_round_trip() {
        for k in 0..=1000 {
            let z = 50.0 * k as f64 / 1000.0;
            assert!((Conjugation::Cir.v_inverse(Conjugation::Cir.v(z)) - z).abs() <= 1e-10 * z.max(1.0));
            let w = k as f64 / 1000.0;
            let wf = Conjugation::WrightFisher;
            assert!((wf.v_inverse(wf.v(w)) - w).abs() <= 1e-10);
        }
    }

    #[test]
    fn conjugation_examples() {
        assert_eq!(Conjugation::Cir.v(1.0), 2.0);
        assert_abs_diff_eq!(Conjugation::WrightFisher.v(0.5), FRAC_PI_2, epsilon = 1e-15);
        let r = reduce_conjugated(&Conjugation::Cir, 0.25, 1.0).unwrap();
        assert_eq!((r.bm_problem.x, r.bm_problem.a, r.bm_problem.b), (1.0, 2.0, 0.0));
        assert!(r.time_map.is_identity());
    }

    #[test]
    fn conjugation_domains_enforced() {
        assert!(reduce_conjugated(&Conjugation::Cir, -0.1, 1.0).is_err());
        assert!(reduce_conjugated(&Conjugation::WrightFisher, 0.2, 1.5).is_err());
        assert!(reduce_conjugated(&Conjugation::Cir, 1.0, 1.0).is_err());
    }

    #[test]
    fn custom_conjugation_validation() {
        let cube = CustomConjugation::new("z^3", |z: f64| z * z * z, |y: f64| y.cbrt(), (-2.0, 2.0)).unwrap();
        let r = reduce_conjugated(&Conjugation::Custom(cube), 1.0, 2.0).unwrap();
        assert_eq!((r.bm_problem.x, r.bm_problem.a), (1.0, 8.0));
        assert!(CustomConjugation::new("square", |z: f64| z * z, |y: f64| y.sqrt(), (-1.0, 1.0)).is_err());
        assert!(CustomConjugation::new("off", |z: f64| z + 1.0, |y: f64| y - 1.0, (0.0, 1.0)).is_err());
    }

    #[test]
    fn cir_identity_is_algebraic() {
        let z: f64 = 0.37;
        let conj = Conjugation::Cir;
        for k in 0..200 {
            let b = -1.2 + 0.013 * k as f64;
            let lhs = conj.v_inverse(b + conj.v(z));
            let rhs = 0.25 * (b + 2.0 * z.sqrt()).powi(2);
            assert!((lhs - rhs).abs() <= 1e-12);
        }
    }

    #[test]
    fn interval_exit_forms_agree() {
        // images and series evaluated on both sides of the switch
        let (x, lo, hi) = (1.0, -2.0, 2.0);
        let len2 = 16.0;
        let below = interval_exit_cdf(x, lo, hi, len2 * (1.0 - 1e-12)).unwrap();
        let above = interval_exit_cdf(x, lo, hi, len2 * (1.0 + 1e-12)).unwrap();
        assert_abs_diff_eq!(below, above, epsilon = 1e-12);
        // far from the lower wall it is the one-sided law
        let one_sided = first_passage_cdf(&PassageProblem::new(0.0, 1.0, 0.0).unwrap(), 0.05).unwrap();
        assert_abs_diff_eq!(interval_exit_cdf(0.0, -50.0, 1.0, 0.05).unwrap(), one_sided, epsilon = 1e-14);
        // symmetric start: P(τ > t) ~ (4/π) e^{−π²t/(2L²)}
        let t = 40.0;
        let tail = 4.0 / PI * (-PI * PI * t / (2.0 * len2)).exp();
        assert_abs_diff_eq!(1.0 - interval_exit_cdf(0.0, lo, hi, t).unwrap(), tail, epsilon = 1e-12);
        assert!(interval_exit_cdf(3.0, lo, hi, 1.0).is_err());
    }

    #[test]
    fn cir_passage_from_below_is_two_sided() {
        let from_below = cir_first_passage_cdf(0.25, 1.0, 2.0).unwrap();
        let one_sided = first_passage_cdf(&PassageProblem::new(1.0, 2.0, 0.0).unwrap(), 2.0).unwrap();
        assert!(from_below > one_sided + 0.01);
        let from_above = cir_first_passage_cdf(4.0, 1.0, 2.0).unwrap();
        let reduced = first_passage_cdf(&PassageProblem::new(4.0, 2.0, 0.0).unwrap(), 2.0).unwrap();
        assert_eq!(from_above, reduced);
    }

    #[test]
    fn gbm_examples() {
        assert_abs_diff_eq!(gbm_log_drift(0.1, 0.2), 0.08, epsilon = 1e-15);
        let r = reduce_gbm(1.0, 0.1, 0.2, 0.5, 0.08).unwrap();
        assert_eq!(r.bm_problem.x, 0.0);
        assert_abs_diff_eq!(r.bm_problem.b, 0.0, epsilon = 1e-15);
        assert_eq!(r.bm_problem.a, 0.5);
        let r = reduce_gbm(2.0, 0.1, 0.5, 3.0, 0.5).unwrap();
        assert_abs_diff_eq!(r.bm_problem.x, 2f64.ln() / 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r.bm_problem.b, (0.5 - (0.1 - 0.125)) / 0.5, epsilon = 1e-15);
        assert!(reduce_gbm(0.0, 0.1, 0.2, 1.0, 0.0).is_err());
        assert!(reduce_gbm(1.0, 0.1, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn ou_reduction() {
        let r = reduce_ou(0.0, 1.0, SQRT_2, 1.0).unwrap();
        assert_eq!((r.bm_problem.x, r.bm_problem.a, r.bm_problem.b), (0.0, 1.0, 0.0));
        assert!(r.description.contains("e^(2t) - 1"));
        assert!(reduce_ou(1.0, 1.0, 1.0, 1.0).is_err());
        assert!(reduce_ou(0.0, -1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn time_changed_reduction() {
        let r = reduce_time_changed(0.0, 1.0, TimeChange::Identity).unwrap();
        assert_eq!(r.bm_problem, PassageProblem::new(0.0, 1.0, 0.0).unwrap());
        assert!(reduce_time_changed(1.0, 1.0, TimeChange::Identity).is_err());
    }

    #[test]
    fn pushforward_identity_is_unchanged() {
        let r = reduce_time_changed(0.0, 1.0, TimeChange::Identity).unwrap();
        let grid: Vec<f64> = (1..=50).map(|k| 0.1 * k as f64).collect();
        let law = pushforward_law(&r, 1, &grid, &QuadSpec::default()).unwrap();
        for (t, f) in grid.iter().zip(law.density.values()) {
            assert_eq!(*f, first_passage_density_unchecked(&r.bm_problem, *t));
        }
        assert_eq!(law.atom_at_infinity, 0.0);
    }

    #[test]
    fn pushforward_linear_clock_scales() {
        let c = 2.5;
        let r = reduce_time_changed(0.0, 1.0, TimeChange::linear(c).unwrap()).unwrap();
        let grid: Vec<f64> = (1..=40).map(|k| 0.05 * k as f64).collect();
        let law = pushforward_law(&r, 1, &grid, &QuadSpec::default()).unwrap();
        for (t, f) in grid.iter().zip(law.density.values()) {
            let expected = c * first_passage_density_unchecked(&r.bm_problem, c * t);
            assert_abs_diff_eq!(*f, expected, epsilon = 1e-14);
        }
    }

    #[test]
    fn pushforward_conserves_mass() {
        let spec = QuadSpec::default().singular_left();
        let r = reduce_ou(0.0, 1.0, SQRT_2, 1.0).unwrap();
        let tc = r.time_map.clone();
        let q = r.bm_problem;
        let fz = |t: f64| match first_passage_density_unchecked(&q, tc.rho(t)) {
            0.0 => 0.0,
            f => f * tc.derivative(t),
        };
        let mz = integrate(fz, 0.0, f64::INFINITY, &spec).into_result().unwrap();
        let fb = |u: f64| first_passage_density_unchecked(&q, u);
        let mb = integrate(fb, 0.0, f64::INFINITY, &spec.with_tail_scale(1.0)).into_result().unwrap();
        assert_abs_diff_eq!(mz, mb, epsilon = 1e-6);
        assert_abs_diff_eq!(mz, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn pushforward_keeps_the_atom() {
        let r = reduce_gbm(1.0, 0.1, 0.5, 1.0, 1.0).unwrap();
        let law = pushforward_law(&r, 1, &[0.5, 1.0, 2.0], &QuadSpec::default()).unwrap();
        let expected = 1.0 - hit_probability(&r.bm_problem).unwrap();
        assert!(expected > 0.0);
        assert_eq!(law.atom_at_infinity, expected);
    }

    #[test]
    fn pushforward_second_passage() {
        let r = reduce_conjugated(&Conjugation::Cir, 0.25, 1.0).unwrap();
        let grid = [0.5, 1.0, 2.0];
        let law = pushforward_law(&r, 2, &grid, &QuadSpec::default()).unwrap();
        for (t, f) in grid.iter().zip(law.density.values()) {
            let direct = crate::successive::tau2_density(&r.bm_problem, *t, &QuadSpec::default()).unwrap();
            assert_abs_diff_eq!(*f, direct, epsilon = 1e-4);
        }
    }
}
