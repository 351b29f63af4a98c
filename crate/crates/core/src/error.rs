use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// Variants are grouped so the CLI can map them onto exit codes: parameter
/// and config problems, resource caps, and numerical diagnostics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("truncated tail mass {tail:.3e} exceeds tail_tol {tail_tol:.3e}; need R >= {min_radius}")]
    TailTooHeavy {
        tail: f64,
        tail_tol: f64,
        min_radius: u64,
    },

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("Green's function pole: |mu * D^(k)| = {modulus} >= 1 at k = {k:?}")]
    Pole { k: Vec<f64>, modulus: f64 },

    #[error("divergent regime: {0}")]
    Divergent(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("at or above criticality: tail ratio {ratio:.6} >= 1 - margin ({margin})")]
    Critical { ratio: f64, margin: f64 },

    #[error("bracket [{lo}, {hi}] does not straddle criticality: slopes {slope_lo:.3e}, {slope_hi:.3e}")]
    Bracket {
        lo: f64,
        hi: f64,
        slope_lo: f64,
        slope_hi: f64,
    },

    #[error("enumeration refused: {0}")]
    WorkCap(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::Parameter {
        name,
        reason: reason.into(),
    }
}
