use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("no detectable mode: |c_l| <= {tol:e} for every l <= {ell_max}")]
    NoDetectableMode { ell_max: usize, tol: f64 },

    #[error("state space too large: {sites} sites exceeds the cap of {cap}; {hint}")]
    TooLarge {
        sites: usize,
        cap: usize,
        hint: &'static str,
    },

    #[error("numerical failure in {routine}: {detail}")]
    Numerical { routine: &'static str, detail: String },

    #[error("requested tolerance {requested:e} unreachable; best certified bound is {achieved:e}")]
    UnreachableTolerance { requested: f64, achieved: f64 },

    #[error("mismatched state spaces: {0} vs {1} sites")]
    MismatchedSpaces(usize, usize),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
