use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate adiabatic energies at R = {position:?} (gap {gap:.3e})")]
    Degenerate { position: Vec<f64>, gap: f64 },

    #[error("non-finite phase point at t = {time}: {what}")]
    NonFinite { time: f64, what: String },

    #[error("invalid gamma branch {branch} for a scheme with {available} branch(es)")]
    InvalidBranch { branch: usize, available: usize },

    #[error("empty ensemble: no successful trajectories")]
    EmptyEnsemble,

    #[error("oracle error: {0}")]
    Oracle(String),

    #[error("oracle not converged: {0}")]
    NotConverged(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
