use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A precondition on argument shapes or values was violated.
    #[error("contract violation in `{argument}`: {reason}")]
    Contract {
        argument: &'static str,
        reason: String,
    },
    /// A point fell outside the domain where an object is defined.
    #[error("value {value} outside domain [{lo}, {hi}]")]
    Domain { value: f64, lo: f64, hi: f64 },
    /// The integrator produced a non-finite state.
    #[error("non-finite state at t = {t} (step {step})")]
    Overflow { t: f64, step: usize, state: Vec<f64> },
    /// Requested step exceeds the explicit stability limit of the system.
    #[error("step {step} exceeds stability limit {limit}")]
    Unstable { step: f64, limit: f64 },
    /// Local input fitting failed.
    #[error("input fit failed: {0}")]
    Fit(String),
    /// A network activation became non-finite.
    #[error("non-finite activation in layer {layer}")]
    NonFinite { layer: usize },
    /// Training produced a non-finite loss.
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    Divergence { epoch: usize, batch: usize },
    /// Requested index set exceeds the configured capacity.
    #[error("index set of size {size} exceeds cap {cap}")]
    Capacity { size: u128, cap: usize },
    /// The system carries no Lipschitz metadata.
    #[error("system `{0}` supplies no Lipschitz constants")]
    Unsupported(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn contract(argument: &'static str, reason: impl Into<String>) -> Error {
    Error::Contract {
        argument,
        reason: reason.into(),
    }
}
