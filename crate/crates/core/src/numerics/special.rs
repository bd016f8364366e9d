use crate::error::{invalid, Result};

/// 1/√(2π)
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_677_939_946_059_934_381_87;

/// Error function (delegates to the msun port in `libm`, < 1 ulp).
#[inline]
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// Complementary error function, accurate in relative terms deep into the tail.
#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Standard normal density without input checking; NaN propagates.
#[inline]
pub fn norm_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Standard normal distribution function without input checking.
///
/// Evaluated through `erfc` on the side where the result is small, so the
/// lower tail keeps full relative precision.
#[inline]
pub fn norm_cdf(z: f64) -> f64 {
    if z < 0.0 {
        0.5 * erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
    } else {
        1.0 - 0.5 * erfc(z * std::f64::consts::FRAC_1_SQRT_2)
    }
}

/// `ln Φ(z)`, finite for all finite `z`.
pub fn log_norm_cdf(z: f64) -> f64 {
    if z > -35.0 {
        let p = norm_cdf(z);
        if z > 0.0 {
            // ln(1 - q) with q = Φ(-z)
            (-norm_cdf(-z)).ln_1p()
        } else {
            p.ln()
        }
    } else {
        // Mills-ratio expansion; the next term is below 1e-10 relative here.
        let z2 = z * z;
        let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
        -0.5 * z2 - (-z).ln() + FRAC_1_SQRT_2PI.ln() + series.ln()
    }
}

/// Checked standard normal density.
pub fn std_normal_pdf(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(invalid(format!("std_normal_pdf: non-finite input {z}")));
    }
    Ok(norm_pdf(z))
}

/// Checked standard normal distribution function.
pub fn std_normal_cdf(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(invalid(format!("std_normal_cdf: non-finite input {z}")));
    }
    Ok(norm_cdf(z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn pdf_values() {
        assert_abs_diff_eq!(std_normal_pdf(0.0).unwrap(), 0.398_942_280_4, epsilon = 1e-10);
        assert_abs_diff_eq!(std_normal_pdf(1.0).unwrap(), 0.241_970_724_5, epsilon = 1e-10);
        assert_eq!(std_normal_pdf(-1.0).unwrap(), std_normal_pdf(1.0).unwrap());
    }

    #[test]
    fn cdf_values() {
        assert_eq!(std_normal_cdf(0.0).unwrap(), 0.5);
        assert_abs_diff_eq!(std_normal_cdf(1.0).unwrap(), 0.841_344_746_1, epsilon = 1e-10);
        assert_abs_diff_eq!(std_normal_cdf(-1.0).unwrap(), 0.158_655_253_9, epsilon = 1e-10);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(std_normal_pdf(f64::NAN).is_err());
        assert!(std_normal_cdf(f64::INFINITY).is_err());
        assert!(std_normal_cdf(f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn symmetry_on_grid() {
        for k in 1..=50 {
            let z = 0.1 * k as f64;
            let s = norm_cdf(z) + norm_cdf(-z);
            assert!((s - 1.0).abs() <= 1e-12, "z = {z}: {s}");
        }
    }

    #[test]
    fn monotone_on_grid() {
        let mut prev = 0.0;
        for k in -4000..=4000 {
            let v = norm_cdf(k as f64 * 0.002);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn log_cdf_matches_direct_and_asymptotic() {
        for &z in &[-30.0, -10.0, -1.0, 0.0, 0.5, 2.0] {
            let direct: f64 = norm_cdf(z).ln();
            assert!((log_norm_cdf(z) - direct).abs() < 1e-12 * direct.abs());
        }
        // upper tail: ln Φ(z) ≈ -Φ(-z)
        let z = 9.0;
        assert!((log_norm_cdf(z) / -norm_cdf(-z) - 1.0).abs() < 1e-12);
        // continuity across the switch to the expansion
        let below = log_norm_cdf(-35.000_001);
        let above = log_norm_cdf(-34.999_999);
        assert!((below - above).abs() < 1e-4);
        assert!(log_norm_cdf(-100.0).is_finite());
    }
}
