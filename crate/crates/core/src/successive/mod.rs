//! Inter-passage times `T_n = τ_n − τ_{n−1}` and successive passage times
//! `τ_n` of Brownian motion through the line `a + b·t`.
//!
//! After each passage the path restarts on the line, so the law of the next
//! inter-passage time given the restart epoch `s` is the no-zero law of the
//! excursion process. For `b ≠ 0` that law is defective: with probability
//! `erf(|b|·√(s/2))` the path never comes back.
//!
//! All operations take the problem in either orientation; it is reflected to
//! `x < a, b ≤ 0` first.

mod recursion;

use std::f64::consts::{FRAC_2_PI, PI};

pub use recursion::{nth_passage_law, tn_cdf, DensityGrid, NthPassageLaw, PassageRecursion, RecursionConfig};

use crate::error::{ensure, Result};
use crate::linear_passage::{
    first_passage_density_unchecked, never_return_unchecked, no_zero_probability, PassageProblem,
};
use crate::numerics::{erfc, integrate_fallible, integrate_with_breaks, QuadSpec, FRAC_1_SQRT_2PI};

/// Kernel `f_{T₂|τ₁}(t | s) = e^{−b²(s+t)/2}·√s / (π(s+t)√t)`.
pub fn t2_conditional_density(b: f64, s: f64, t: f64) -> Result<f64> {
    ensure(b.is_finite(), || format!("non-finite slope {b}"))?;
    ensure(s > 0.0 && t > 0.0, || format!("t2_conditional_density: need s, t > 0, got s={s}, t={t}"))?;
    Ok(conditional_kernel(b, s, t))
}

#[inline]
pub(crate) fn conditional_kernel(b: f64, s: f64, t: f64) -> f64 {
    (-0.5 * b * b * (s + t)).exp() * s.sqrt() / (PI * (s + t) * t.sqrt())
}

/// `P(r < T₂ < ∞ | τ₁ = s)`, the kernel integrated over `(r, ∞)`.
pub fn t2_conditional_survival(b: f64, s: f64, r: f64, spec: &QuadSpec) -> Result<f64> {
    ensure(b.is_finite(), || format!("non-finite slope {b}"))?;
    ensure(s > 0.0 && r >= 0.0, || format!("t2_conditional_survival: need s > 0, r >= 0, got s={s}, r={r}"))?;
    let spec = QuadSpec { singular_left: r == 0.0, singular_right: false, ..*spec }.with_tail_scale(s.max(r));
    integrate_with_breaks(|t| conditional_kernel(b, s, t), r, &[s, r + s], f64::INFINITY, &spec).into_result()
}

fn recurrent_canonical(p: &PassageProblem) -> Result<(PassageProblem, f64)> {
    p.require_recurrent()?;
    let q = p.canonical();
    Ok((q, q.gap()))
}

/// Break points that bracket the bulk of `f_{τ₁}` for a canonical problem.
fn tau1_scales(q: &PassageProblem) -> Vec<f64> {
    let d = q.gap();
    let mut v = vec![0.05 * d * d, 0.3 * d * d, d * d, 4.0 * d * d];
    if q.b != 0.0 {
        let m = d / q.b.abs();
        v.extend([0.5 * m, m, 2.0 * m, 5.0 * m]);
    }
    v
}

/// [`tau1_scales`] plus the point `t` and one break per decade between the
/// bulk and `t`, where a kernel in `s/(s+t)` keeps `1/s` structure.
fn outer_breaks(q: &PassageProblem, t: f64) -> Vec<f64> {
    let mut v = tau1_scales(q);
    let d = q.gap();
    let mut m = 10.0 * d * d;
    while m < t {
        v.push(m);
        m *= 10.0;
    }
    v.push(t);
    v
}

fn tau1_tail_scale(q: &PassageProblem) -> f64 {
    let d = q.gap();
    if q.b == 0.0 {
        10.0 * d * d
    } else {
        10.0 * (d / q.b.abs()).max(d * d)
    }
}

/// Density of `T₂ = τ₂ − τ₁`:
/// `∫₀^∞ f_{τ₁}(s)·e^{−b²(s+t)/2} √s / (π√t(s+t)) ds`.
pub fn t2_density(p: &PassageProblem, t: f64, spec: &QuadSpec) -> Result<f64> {
    let (q, _) = recurrent_canonical(p)?;
    ensure(t > 0.0, || format!("t2_density: t must be > 0, got {t}"))?;
    let breaks = outer_breaks(&q, t);
    let spec = spec.smooth().with_tail_scale(tau1_tail_scale(&q).max(2.0 * t));
    let v = integrate_with_breaks(
        |s| first_passage_density_unchecked(&q, s) * conditional_kernel(q.b, s, t),
        0.0,
        &breaks,
        f64::INFINITY,
        &spec,
    )
    .into_result()?;
    Ok(v.max(0.0))
}

/// Driftless density of `T₂` written out explicitly:
/// `∫₀^∞ 1/(π(s+t)√t) · |a−x|/(√(2π)s) · e^{−(a−x)²/2s} ds`.
pub fn t2_density_driftless(p: &PassageProblem, t: f64, spec: &QuadSpec) -> Result<f64> {
    require_driftless(p)?;
    let (q, d) = recurrent_canonical(p)?;
    ensure(t > 0.0, || format!("t2_density_driftless: t must be > 0, got {t}"))?;
    let breaks = outer_breaks(&q, t);
    let spec = spec.smooth().with_tail_scale(tau1_tail_scale(&q).max(2.0 * t));
    integrate_with_breaks(
        |s| 1.0 / (PI * (s + t) * t.sqrt()) * d * FRAC_1_SQRT_2PI / s * (-d * d / (2.0 * s)).exp(),
        0.0,
        &breaks,
        f64::INFINITY,
        &spec,
    )
    .into_result()
}

/// `P(T₂ ≤ t) = 1 − ∫₀^∞ f_{τ₁}(s) ∫₀^s ψ_{s+t}(y) dy ds`, by nested
/// quadrature. `t = +∞` gives `1 − P(T₂ = ∞)`.
pub fn t2_cdf(p: &PassageProblem, t: f64, spec: &QuadSpec) -> Result<f64> {
    let (q, _) = recurrent_canonical(p)?;
    ensure(t >= 0.0, || format!("t2_cdf: t must be >= 0, got {t}"))?;
    if t == 0.0 {
        return Ok(0.0);
    }
    if t == f64::INFINITY {
        return Ok(1.0 - t2_defect(p, spec)?);
    }
    let inner = spec.with_tolerances(spec.abs_tol * 1e-2, spec.rel_tol * 1e-2);
    let breaks = outer_breaks(&q, t);
    let outer = spec.smooth().with_tail_scale(tau1_tail_scale(&q));
    let survive = integrate_fallible(
        |s| {
            let f = first_passage_density_unchecked(&q, s);
            if f == 0.0 {
                return Ok(0.0);
            }
            Ok(f * no_zero_probability(q.b, s, t, &inner)?)
        },
        0.0,
        &breaks,
        f64::INFINITY,
        &outer,
    )?;
    Ok((1.0 - survive).clamp(0.0, 1.0))
}

/// Driftless survival function in arcsine form:
/// `P(T₂ > t) = ∫₀^∞ (2/π) arcsin√(s/(s+t)) · f_{τ₁}(s) ds`.
pub fn t2_survival_driftless(p: &PassageProblem, t: f64, spec: &QuadSpec) -> Result<f64> {
    require_driftless(p)?;
    let (q, _) = recurrent_canonical(p)?;
    ensure(t >= 0.0, || format!("t2_survival_driftless: t must be >= 0, got {t}"))?;
    if t == 0.0 {
        return Ok(1.0);
    }
    let breaks = outer_breaks(&q, t);
    let spec = spec.smooth().with_tail_scale(tau1_tail_scale(&q).max(t));
    integrate_with_breaks(
        |s| FRAC_2_PI * (s / (s + t)).sqrt().asin() * first_passage_density_unchecked(&q, s),
        0.0,
        &breaks,
        f64::INFINITY,
        &spec,
    )
    .into_result()
}

/// `P(T₂ = ∞) = 2·sgn(b)·E(Φ(b√τ₁) − 1/2)`; exactly 0 for `b = 0`.
pub fn t2_defect(p: &PassageProblem, spec: &QuadSpec) -> Result<f64> {
    let (q, _) = recurrent_canonical(p)?;
    if q.b == 0.0 {
        return Ok(0.0);
    }
    let spec = spec.smooth().with_tail_scale(tau1_tail_scale(&q));
    let v = integrate_with_breaks(
        |s| never_return_unchecked(q.b, s) * first_passage_density_unchecked(&q, s),
        0.0,
        &tau1_scales(&q),
        f64::INFINITY,
        &spec,
    )
    .into_result()?;
    Ok(v.clamp(0.0, 1.0))
}

/// Jensen upper bound on the defect, `γ(b) = 2·sgn(b)·(Φ(b√E τ₁) − 1/2)`.
/// Returns 0 at `b = 0`.
pub fn jensen_bound(p: &PassageProblem) -> Result<f64> {
    let (q, d) = recurrent_canonical(p)?;
    if q.b == 0.0 {
        return Ok(0.0);
    }
    // b·√(|d/b|) has modulus √|b·d|
    Ok(never_return_unchecked(1.0, (q.b * d).abs()))
}

/// Density of `τ₂`:
/// `e^{−b²t/2}/(πt) ∫₀^t |a−x| / (√(2π) s √(t−s)) · e^{−(a+bs−x)²/2s} ds`.
pub fn tau2_density(p: &PassageProblem, t: f64, spec: &QuadSpec) -> Result<f64> {
    let (q, d) = recurrent_canonical(p)?;
    ensure(t > 0.0, || format!("tau2_density: t must be > 0, got {t}"))?;
    let damp = -0.5 * q.b * q.b * t;
    if damp < -745.0 {
        return Ok(0.0);
    }
    let b = q.b;
    let integrand = |s: f64| {
        let z = d + b * s;
        d * FRAC_1_SQRT_2PI / (s * (t - s).sqrt()) * (-z * z / (2.0 * s)).exp()
    };
    // the 1/s decay beyond the bulk spans many decades when t is large
    let breaks = outer_breaks(&q, 0.5 * t);
    let spec = spec.smooth().singular_right();
    let v = integrate_with_breaks(integrand, 0.0, &breaks, t, &spec).into_result()?;
    Ok((damp.exp() / (PI * t) * v).max(0.0))
}

/// `∫₀^horizon P(T₂ > t) dt` for a constant barrier. Grows without bound in
/// the horizon (the mean of `T₂` is infinite).
pub fn t2_partial_mean(p: &PassageProblem, horizon: f64, spec: &QuadSpec) -> Result<f64> {
    require_driftless(p)?;
    let (_, d) = recurrent_canonical(p)?;
    ensure(horizon >= 0.0 && horizon.is_finite(), || {
        format!("t2_partial_mean: horizon must be finite and >= 0, got {horizon}")
    })?;
    if horizon == 0.0 {
        return Ok(0.0);
    }
    let mut breaks = Vec::new();
    let mut m = 0.01 * d * d;
    while m < horizon {
        breaks.push(m);
        m *= 10.0;
    }
    let inner = spec.with_tolerances(spec.abs_tol * 1e-2, spec.rel_tol * 1e-2);
    integrate_fallible(|t| t2_survival_driftless(p, t, &inner), 0.0, &breaks, horizon, &spec.smooth())
}

/// `P(T₁ ≤ t) = 2(1 − Φ((a − x)/√t))` for a constant barrier.
pub fn t1_cdf_driftless(p: &PassageProblem, t: f64) -> Result<f64> {
    require_driftless(p)?;
    p.require_off_boundary()?;
    ensure(t >= 0.0, || format!("t1_cdf_driftless: t must be >= 0, got {t}"))?;
    if t == 0.0 {
        return Ok(0.0);
    }
    // 2(1 − Φ(z)) = erfc(z/√2)
    Ok(erfc(p.gap().abs() / (2.0 * t).sqrt()))
}

fn require_driftless(p: &PassageProblem) -> Result<()> {
    ensure(p.b == 0.0, || format!("operation requires a constant barrier (b = 0), got b = {}", p.b))
}

/// Total mass of `f_{τ₂}` with the heavy tail handled by the quadrature map.
pub(crate) fn tau2_mass(p: &PassageProblem, spec: &QuadSpec) -> Result<f64> {
    let (q, _) = recurrent_canonical(p)?;
    let inner = spec.with_tolerances(spec.abs_tol * 1e-2, spec.rel_tol * 1e-2);
    let outer = spec.smooth().with_tail_scale(tau1_tail_scale(&q));
    integrate_fallible(|t| tau2_density(p, t, &inner), 0.0, &tau1_scales(&q), f64::INFINITY, &outer)
}

/// Total mass of `f_{T₂}`; the `t^{−1/2}` head is declared singular.
pub(crate) fn t2_mass(p: &PassageProblem, spec: &QuadSpec) -> Result<f64> {
    let (q, _) = recurrent_canonical(p)?;
    let inner = spec.with_tolerances(spec.abs_tol * 1e-2, spec.rel_tol * 1e-2);
    let outer = spec.smooth().singular_left().with_tail_scale(tau1_tail_scale(&q));
    integrate_fallible(|t| t2_density(p, t, &inner), 0.0, &tau1_scales(&q), f64::INFINITY, &outer)
}

/// Mode of a unimodal density by golden-section search on `[lo, hi]`.
pub fn density_peak<F: Fn(f64) -> Result<f64>>(f: F, lo: f64, hi: f64) -> Result<(f64, f64)> {
    // coarse scan first so a poor bracket cannot trap the search
    let n = 200;
    let mut best = (lo, f64::NEG_INFINITY);
    for k in 0..=n {
        let t = lo + (hi - lo) * k as f64 / n as f64;
        if t <= 0.0 {
            continue;
        }
        let v = f(t)?;
        if v > best.1 {
            best = (t, v);
        }
    }
    let step = (hi - lo) / n as f64;
    let (mut a, mut c) = ((best.0 - step).max(lo), (best.0 + step).min(hi));
    if a <= 0.0 {
        a = 0.5 * best.0;
    }
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = c - g * (c - a);
    let mut x2 = a + g * (c - a);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    while c - a > 1e-9 * (1.0 + best.0.abs()) {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (c - a);
            f2 = f(x2)?;
        } else {
            c = x2;
            x2 = x1;
            f2 = f1;
            x1 = c - g * (c - a);
            f1 = f(x1)?;
        }
    }
    let t = 0.5 * (a + c);
    Ok((t, f(t)?))
}
