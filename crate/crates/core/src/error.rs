use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("anticorrelation parameter undefined: N1 = {n1}, N2 = {n2}")]
    UndefinedAlpha { n1: u64, n2: u64 },

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("fit failed ({reason}); last weighted residual {residual:.6e}")]
    FitFailure { reason: String, residual: f64 },

    #[error("grid clips the beam: {fraction:.3e} of the power falls outside (limit 1e-6)")]
    Clipping { fraction: f64 },

    #[error("sampling violates the anti-aliasing bound: {reason}; use at least {required_points} grid points")]
    Sampling { reason: String, required_points: usize },

    #[error("no fringes: found {extrema} extrema, need at least 3")]
    NoFringes { extrema: usize },

    #[error("observation distance is unidentifiable: SSE varies by {variation:.3e} (relative) over the scanned range")]
    UnidentifiableZ { variation: f64 },

    #[error("intensity pattern spans [{pattern_lo:.1}, {pattern_hi:.1}] um, narrower than the sensor [{sensor_lo:.1}, {sensor_hi:.1}] um")]
    Support {
        pattern_lo: f64,
        pattern_hi: f64,
        sensor_lo: f64,
        sensor_hi: f64,
    },
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
