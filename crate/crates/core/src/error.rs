use thiserror::Error;

/// Errors raised by the passage-time library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "quadrature did not converge after {subdivisions} subdivisions \
         (value {value:e}, error estimate {error_estimate:e})"
    )]
    NotConverged { value: f64, error_estimate: f64, subdivisions: usize },

    #[error(
        "density grid too coarse for n = {n}: mass-based atom {mass_atom:.6} \
         disagrees with analytic atom {analytic_atom:.6}"
    )]
    GridTooCoarse { n: usize, mass_atom: f64, analytic_atom: f64 },

    #[error("simulation left the state domain on path {path} at step {step}: {detail}")]
    Unstable { path: u64, step: u64, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidArgument(msg()))
    }
}
