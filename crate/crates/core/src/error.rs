use thiserror::Error;

/// Errors produced by the solvers, reduction pipelines and harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("argument error: {0}")]
    Argument(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("simulation aborted at step {step} (t = {t:.6}): {reason}")]
    Aborted { step: usize, t: f64, reason: String },

    #[error("dry state at node {node} (h = {h:.3e}) at t = {t:.6}")]
    DryState { node: usize, h: f64, t: f64 },

    #[error("EIM instability at step {step} (t = {t:.6}): {reason}")]
    EimInstability { step: usize, t: f64, reason: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for failures of the simulation itself, as opposed to bad input.
    pub fn is_simulation_failure(&self) -> bool {
        matches!(
            self,
            Error::Aborted { .. }
                | Error::DryState { .. }
                | Error::EimInstability { .. }
                | Error::Singular(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(name: &str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::arg(format!(
            "{name}: length {got} does not match expected {expected}"
        )));
    }
    Ok(())
}
