use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected length {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("mass matrix is not positive definite at q = {q:?}")]
    NotPositiveDefinite { q: Vec<f64> },

    #[error("invalid gains: {0}")]
    Gains(String),

    /// P·M(q) failed the symmetry check the composite certificate relies on.
    #[error(
        "certificate invalid at t = {t}: P*M(q) asymmetry {asymmetry:e} exceeds {tolerance:e}"
    )]
    Certificate {
        t: f64,
        asymmetry: f64,
        tolerance: f64,
    },

    #[error("simulation diverged at t = {t}")]
    Divergence { t: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid model: {0}")]
    Model(String),

    #[error("invalid reference: {0}")]
    Reference(String),

    #[error("invalid simulation setup: {0}")]
    Setup(String),
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            got,
        })
    }
}

pub(crate) fn check_finite(what: &'static str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
