//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Structural misuse: mismatched grids, non-Hermitian data, bad mode index.
    #[error("structure: {0}")]
    Structure(String),

    /// Mathematical precondition violated (dispersion ratio out of range,
    /// non-mean-zero input where a mean-zero field is required, ...).
    #[error("domain: {0}")]
    Domain(String),

    /// A run configuration field failed validation.
    #[error("config field `{field}`: {msg}")]
    Config { field: String, msg: String },

    /// A spectral coefficient exceeded the blow-up threshold during time
    /// stepping. Carries the last state that was still finite.
    #[error("blow-up at t = {t}: max |coefficient| {max_coeff:.3e} exceeded {threshold:.1e}")]
    BlowUp {
        t: f64,
        max_coeff: f64,
        threshold: f64,
        last_good: Box<crate::dynamics::MBState>,
    },

    /// Fixed-point iteration failed to converge within the iteration budget.
    /// `iterate_norms` records the norm of each successive iterate.
    #[error("no convergence after {iterations} iterations (last step {last_step:.3e}, tol {tol:.1e})")]
    NoConvergence {
        iterations: usize,
        last_step: f64,
        tol: f64,
        iterate_norms: Vec<f64>,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    /// Command line usage error.
    #[error("usage: {0}")]
    Usage(String),
}

impl Error {
    pub fn structure(msg: impl Into<String>) -> Self {
        Error::Structure(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            msg: msg.into(),
        }
    }
}
