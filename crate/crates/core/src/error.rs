use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "quadrature did not reach tolerance: estimate {estimate:e}, error estimate {error:e}, \
         requested {tolerance:e}"
    )]
    Quadrature { estimate: f64, error: f64, tolerance: f64 },

    #[error("{what} did not converge: {detail}")]
    NonConvergence { what: &'static str, detail: String },

    #[error("mode {mode}: {source}")]
    Mode { mode: usize, source: Box<Error> },

    #[error("time {t} lies beyond the simulated subordinator horizon {last}")]
    HorizonExceeded { t: f64, last: f64 },

    #[error("tempered rejection sampler exhausted {proposals} proposals")]
    ProposalBudget { proposals: u64 },

    #[error("path step cap of {0} exceeded")]
    StepCap(usize),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Fails unless `value` is finite and strictly positive.
pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and > 0, got {value}")))
    }
}

pub(crate) fn require_nonnegative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and >= 0, got {value}")))
    }
}
