use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unstable cavity: g1*g2 = {product:.6} is outside [0, 1]")]
    UnstableCavity { g1: f64, g2: f64, product: f64 },

    #[error("no wavefront-matching points: R = {roc:.6e} m is below 2*z_R = {limit:.6e} m")]
    NoMatchingPoints { roc: f64, limit: f64 },

    #[error("zero total round-trip loss gives infinite finesse")]
    InfiniteFinesse,

    #[error("no equilibrium: {0}")]
    NoEquilibrium(String),

    #[error("target radius {target:.6e} m outside achievable range [{min:.6e}, {max:.6e}] m")]
    UnachievableTarget { target: f64, min: f64, max: f64 },

    #[error("schedule validation failed: {0}")]
    Schedule(String),

    #[error("fit did not converge after {iterations} iterations: {detail}")]
    NonConvergence { iterations: usize, detail: String },

    #[error("rank-deficient design matrix: {0}")]
    RankDeficient(String),

    #[error("calibration impossible: {0}")]
    CalibrationImpossible(String),

    #[error("peak detection failed: {0}")]
    Peaks(String),

    #[error("wavelength mismatch: {0:.6e} m vs {1:.6e} m")]
    WavelengthMismatch(f64, f64),

    #[error("invalid profile: {0}")]
    Profile(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{0}")]
    Io(String),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

/// Rejects values that are not finite and strictly positive.
pub(crate) fn require_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(domain(format!("{name} must be positive and finite, got {value}")))
    }
}

pub(crate) fn require_non_negative(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(domain(format!("{name} must be non-negative and finite, got {value}")))
    }
}
