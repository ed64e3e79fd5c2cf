use thiserror::Error;

/// Errors surfaced by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A grid, solver, or scenario was set up inconsistently.
    #[error("configuration error: {0}")]
    Config(String),
    /// An argument fell outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// A run blew up numerically; names the module and step.
    #[error("numerical instability in {module} at step {step}: {detail}")]
    Instability {
        module: &'static str,
        step: usize,
        detail: String,
    },
    /// Input is degenerate for the requested operation (e.g. fully masked fields).
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// A quantity failed an accuracy requirement.
    #[error("accuracy violation: {0}")]
    Accuracy(String),
    /// A phase-loop residue exceeded its tolerance.
    #[error("inconsistent phase: {0}")]
    InconsistentPhase(String),
    /// Normalization was requested for a (numerically) zero state.
    #[error("zero norm: {0}")]
    ZeroNorm(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
