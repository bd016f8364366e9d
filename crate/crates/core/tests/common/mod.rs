//! Reference values computed without the library.
#![allow(dead_code)]

use std::f64::consts::PI;

/// `erf(x) = 2/√π·e^{−x²}·Σ 2ⁿx^{2n+1}/(1·3·…·(2n+1))`; every term is
/// positive, so there is no cancellation for `x ≥ 0`.
pub fn erf_series(x: f64) -> f64 {
    if x < 0.0 {
        return -erf_series(-x);
    }
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    while term > 1e-17 * sum {
        n += 1.0;
        term *= 2.0 * x * x / (2.0 * n + 1.0);
        sum += term;
    }
    2.0 / PI.sqrt() * (-x * x).exp() * sum
}

pub fn phi(z: f64) -> f64 {
    0.5 * (1.0 + erf_series(z / std::f64::consts::SQRT_2))
}

/// Root of an increasing `f` on `[lo, hi]`.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `P(τ ≤ t)` for `x + B` hitting `a + bt`, `x < a`, by the reflection
/// principle for drifted BM.
pub fn bachelier_levy(x: f64, a: f64, b: f64, t: f64) -> f64 {
    let d = a - x;
    let st = t.sqrt();
    phi((-d - b * t) / st) + (-2.0 * b * d).exp() * phi((-d + b * t) / st)
}

pub fn inverse_gaussian(d: f64, b: f64, t: f64) -> f64 {
    d / (2.0 * PI * t * t * t).sqrt() * (-(d + b * t).powi(2) / (2.0 * t)).exp()
}

/// `P(exit of BM from (0, len) by t)` started at `y`, by the sine series.
pub fn interval_exit_series(y: f64, len: f64, t: f64) -> f64 {
    let mut survival = 0.0;
    for n in (1..2001).step_by(2) {
        let k = n as f64 * PI / len;
        survival += 4.0 / (n as f64 * PI) * (k * y).sin() * (-0.5 * k * k * t).exp();
    }
    1.0 - survival
}
