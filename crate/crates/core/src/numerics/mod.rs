//! Special functions and a quadrature engine for integrands with
//! inverse-square-root endpoint singularities and semi-infinite ranges.

mod quad;
mod special;

pub use quad::{integrate, integrate_fallible, integrate_with_breaks, QuadResult, QuadSpec};
pub use special::{erf, erfc, log_norm_cdf, norm_cdf, norm_pdf, std_normal_cdf, std_normal_pdf, FRAC_1_SQRT_2PI};
