//! First-passage and last-passage (excursion) laws of Brownian motion
//! against the line `S(t) = a + b·t`.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{ensure, invalid, Result};
use crate::numerics::{erf, integrate, integrate_with_breaks, log_norm_cdf, norm_cdf, norm_pdf, QuadSpec};

/// Start point `x` of `x + B_t` and the boundary `a + b·t`.
///
/// A drifted motion `x + μt + B_t` crossing zero is the same event as
/// `x + B_t` crossing the line `-μ·t`, so it is represented with `a = 0`,
/// `b = -μ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassageProblem {
    pub x: f64,
    pub a: f64,
    pub b: f64,
}

impl PassageProblem {
    pub fn new(x: f64, a: f64, b: f64) -> Result<Self> {
        ensure(x.is_finite() && a.is_finite() && b.is_finite(), || {
            format!("problem parameters must be finite, got x={x}, a={a}, b={b}")
        })?;
        Ok(Self { x, a, b })
    }

    /// Drifted motion `x + μt + B_t` against zero.
    pub fn drifted(x: f64, mu: f64) -> Result<Self> {
        Self::new(x, 0.0, -mu)
    }

    /// Signed distance `a - x` from the start to the boundary intercept.
    #[inline]
    pub fn gap(&self) -> f64 {
        self.a - self.x
    }

    /// `(a - x)·b ≤ 0`: the boundary drifts towards the start (or stays put),
    /// so the first passage happens almost surely.
    #[inline]
    pub fn is_recurrent(&self) -> bool {
        self.gap() * self.b <= 0.0
    }

    /// `(x, a, b) → (-x, -a, -b)`; every law is invariant under it.
    pub fn reflected(&self) -> Self {
        Self { x: -self.x, a: -self.a, b: -self.b }
    }

    /// Representative with the start below the boundary (`x < a`). Leaves
    /// the problem unchanged when `x ≤ a`.
    pub fn canonical(&self) -> Self {
        if self.x > self.a {
            self.reflected()
        } else {
            *self
        }
    }

    pub(crate) fn require_off_boundary(&self) -> Result<()> {
        ensure(self.x != self.a, || format!("start point x = {} lies on the boundary intercept a", self.x))
    }

    pub(crate) fn require_recurrent(&self) -> Result<()> {
        self.require_off_boundary()?;
        ensure(self.is_recurrent(), || {
            format!("problem (x={}, a={}, b={}) is not recurrent: (a - x)·b > 0", self.x, self.a, self.b)
        })
    }
}

/// Density of the first passage time `τ₁`:
/// `|a - x|·φ((a + bt - x)/√t) / t^{3/2}`.
///
/// In the non-recurrent case the same expression is the density of the
/// finite part of a defective law.
pub fn first_passage_density(p: &PassageProblem, t: f64) -> Result<f64> {
    p.require_off_boundary()?;
    ensure(t > 0.0, || format!("first_passage_density: t must be > 0, got {t}"))?;
    Ok(first_passage_density_unchecked(p, t))
}

#[inline]
pub(crate) fn first_passage_density_unchecked(p: &PassageProblem, t: f64) -> f64 {
    if t == f64::INFINITY {
        return 0.0;
    }
    let d = p.gap();
    let z = (d + p.b * t) / t.sqrt();
    let phi = norm_pdf(z);
    // near t = 0 both φ and t^{3/2} underflow
    if phi == 0.0 {
        return 0.0;
    }
    d.abs() * phi / (t * t.sqrt())
}

/// Bachelier–Lévy distribution function `P(τ₁ ≤ t)`. `t = +∞` returns the
/// hit probability.
pub fn first_passage_cdf(p: &PassageProblem, t: f64) -> Result<f64> {
    p.require_off_boundary()?;
    ensure(t >= 0.0, || format!("first_passage_cdf: t must be >= 0, got {t}"))?;
    if t == 0.0 {
        return Ok(0.0);
    }
    if t == f64::INFINITY {
        return hit_probability(p);
    }
    Ok(first_passage_cdf_unchecked(p, t))
}

pub(crate) fn first_passage_cdf_unchecked(p: &PassageProblem, t: f64) -> f64 {
    let q = p.canonical();
    let d = q.gap();
    let rt = t.sqrt();
    let direct = norm_cdf(-(d / rt + q.b * rt));
    // e^{-2bd}·Φ(b√t - d/√t) in log space; the exponential overflows for
    // steep boundaries while Φ underflows.
    let log_reflected = -2.0 * q.b * d + log_norm_cdf(q.b * rt - d / rt);
    (direct + log_reflected.exp()).clamp(0.0, 1.0)
}

/// `E(τ₁) = |a - x| / |b|`, infinite when `b = 0`.
pub fn first_passage_mean(p: &PassageProblem) -> Result<f64> {
    p.require_recurrent()?;
    if p.b == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(p.gap().abs() / p.b.abs())
    }
}

/// `P(τ₁ < ∞)`: `e^{-2b(a-x)}` when the boundary runs away, 1 otherwise.
pub fn hit_probability(p: &PassageProblem) -> Result<f64> {
    p.require_off_boundary()?;
    let e = p.gap() * p.b;
    Ok(if e > 0.0 { (-2.0 * e).exp() } else { 1.0 })
}

/// Closed-form density `ψ_t(u)` of the last zero before `t` of the distance
/// to the line, for a path started on the line. Depends on the slope only
/// through `b²` and `b·(2Φ(b·)-1)`, hence even in `b`.
pub fn last_passage_density(b: f64, t: f64, u: f64) -> Result<f64> {
    ensure(b.is_finite() && t.is_finite(), || format!("non-finite b={b} or t={t}"))?;
    ensure(u > 0.0 && u < t, || format!("last_passage_density: need 0 < u < t, got u={u}, t={t}"))?;
    Ok(last_passage_density_unchecked(b, t, u))
}

#[inline]
pub(crate) fn last_passage_density_unchecked(b: f64, t: f64, u: f64) -> f64 {
    let v = t - u;
    let b2 = b * b;
    let c = b * v.sqrt();
    // b·(2Φ(b√v) - 1) = |b|·erf(|b|√v/√2), evaluated without cancellation
    let bracket = (-0.5 * b2 * v).exp() + 0.5 * b.abs() * (2.0 * PI * v).sqrt() * erf(c.abs() / SQRT_2);
    (-0.5 * b2 * u).exp() / (PI * (u * v).sqrt()) * bracket
}

/// Salminen's integrand `ν_y(v, Ŝ)` for the time-reversed line, with the
/// dummy state `y` already shifted by the intercept.
fn salminen_integrand(b: f64, t: f64, v: f64, y: f64) -> f64 {
    let w = y - b * t;
    let exponent = -b * w - 0.5 * b * b * v - w * w / (2.0 * v);
    w.abs() / (2.0 * PI * v * v * v).sqrt() * exponent.exp()
}

/// `ψ_t(u)` evaluated from its integral representation
/// `(2πu)^{-1/2} e^{-b²u/2} ∫ ν_{y}(t-u, Ŝ) dy` by quadrature. Independent of
/// [`last_passage_density`], which it cross-checks.
pub fn salminen_density_numeric(b: f64, t: f64, u: f64, spec: &QuadSpec) -> Result<f64> {
    ensure(b.is_finite() && t.is_finite(), || format!("non-finite b={b} or t={t}"))?;
    ensure(u > 0.0 && u < t, || format!("salminen_density_numeric: need 0 < u < t, got u={u}, t={t}"))?;
    let v = t - u;
    let kink = b * t;
    // the Gaussian factor peaks at w = -b·v; split there and at the kink
    let peak = kink - b * v;
    let width = v.sqrt();
    let f = |y: f64| salminen_integrand(b, t, v, y);
    let lo = kink.min(peak) - 40.0 * width;
    let hi = kink.max(peak) + 40.0 * width;
    let spec = spec.smooth();
    let mut breaks = vec![kink, peak];
    breaks.extend((-8..=8).map(|k| peak + k as f64 * width));
    let body = integrate_with_breaks(f, lo, &breaks, hi, &spec).into_result()?;
    Ok((-0.5 * b * b * u).exp() / (2.0 * PI * u).sqrt() * body)
}

/// Closed-form limit `lim_{gap→∞} P(no zero in (s, s+gap))`:
/// `2·sgn(b)·(Φ(b√s) - 1/2)` with `sgn(0) = 0`.
pub fn never_return_probability(b: f64, s: f64) -> Result<f64> {
    ensure(b.is_finite(), || format!("non-finite slope {b}"))?;
    ensure(s > 0.0, || format!("never_return_probability: s must be > 0, got {s}"))?;
    Ok(never_return_unchecked(b, s))
}

#[inline]
pub(crate) fn never_return_unchecked(b: f64, s: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        // 2·sgn(b)·(Φ(b√s) - 1/2) = erf(|b|·√(s/2))
        erf(b.abs() * (0.5 * s).sqrt())
    }
}

/// Gap beyond which [`no_zero_probability`] returns the closed-form limit.
pub const NO_ZERO_LIMIT_RATIO: f64 = 1e8;

/// Probability that a path started on the line at time 0 has no zero of its
/// distance to the line in `(s, s + gap)`: `∫₀^s ψ_{s+gap}(y) dy`.
pub fn no_zero_probability(b: f64, s: f64, gap: f64, spec: &QuadSpec) -> Result<f64> {
    ensure(b.is_finite(), || format!("non-finite slope {b}"))?;
    ensure(s > 0.0 && s.is_finite(), || format!("no_zero_probability: s must be > 0, got {s}"))?;
    ensure(gap >= 0.0, || format!("no_zero_probability: gap must be >= 0, got {gap}"))?;
    if gap == 0.0 {
        return Ok(1.0);
    }
    if gap > NO_ZERO_LIMIT_RATIO * s {
        return Ok(never_return_unchecked(b, s));
    }
    let total = s + gap;
    let v = integrate(|y| last_passage_density_unchecked(b, total, y), 0.0, s, &spec.singular_both()).into_result()?;
    Ok(v.clamp(0.0, 1.0))
}

/// `P(λ_t ≤ u) = ∫₀^u ψ_t`, the distribution function of the last zero
/// before `t` for a path started on the line.
pub fn last_passage_cdf(b: f64, t: f64, u: f64, spec: &QuadSpec) -> Result<f64> {
    ensure(t > 0.0, || format!("last_passage_cdf: t must be > 0, got {t}"))?;
    if u <= 0.0 {
        return Ok(0.0);
    }
    if u >= t {
        return Err(invalid(format!("last_passage_cdf: need u < t, got u={u}, t={t}")));
    }
    no_zero_probability(b, u, t - u, spec)
}
