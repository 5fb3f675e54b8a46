use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),

    #[error("raw moment of order {0} is not supported (only 1 and 2)")]
    UnsupportedMomentOrder(u32),

    #[error("unrealizable model: lethal probability is {p}, failure never occurs")]
    UnrealizableModel { p: f64 },

    #[error("{0} is undefined for this model")]
    Undefined(&'static str),

    #[error("quadrature did not converge: error estimate {estimate:e} above tolerance {tolerance:e}")]
    QuadratureNonConvergence { estimate: f64, tolerance: f64 },

    #[error("transform has a pole near s = {s}")]
    TransformPole { s: Complex64 },

    #[error("transform requested at s = {s} with negative real part")]
    OutsideHalfPlane { s: Complex64 },

    #[error("inversion at t = {t} did not converge: achieved error {achieved:e}, target {target:e}")]
    InversionNonConvergence { t: f64, achieved: f64, target: f64 },

    #[error("run exceeded {cap} gaps without failing")]
    RunLengthCap { cap: u64 },

    #[error("reference unavailable: {0}")]
    ReferenceUnavailable(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
