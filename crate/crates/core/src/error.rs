use num_complex::Complex64;
use thiserror::Error;

/// Failures raised by the numerical and physics layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("order {order} is outside the supported range 0..={max}")]
    UnsupportedOrder { order: usize, max: usize },

    #[error("delta = {delta:e} lies inside the infrared cutoff band |delta/a| < {cutoff:e}")]
    InfraredDivergence { delta: f64, cutoff: f64 },

    #[error("evaluation did not reach tolerance: estimate {estimate}, estimated error {est_error:e}")]
    NotConverged { estimate: Complex64, est_error: f64 },

    #[error("point-like profile is a distribution and has no pointwise or numeric-path values")]
    DistributionalProfile,

    #[error("Bessel kernel is degenerate: transverse mass M = 0 (massless field with k_perp = 0)")]
    KernelDegeneracy,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("inconsistent model: {0}")]
    Inconsistent(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg()))
    }
}
