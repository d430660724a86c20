use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExpError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("cannot parse {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },

    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Core(#[from] ssep_core::Error),
}

impl ExpError {
    /// Process exit status: 2 for anything the user can fix in the
    /// configuration or environment, 1 for a numerical failure during a run.
    pub fn exit_code(&self) -> u8 {
        use ssep_core::Error as E;
        match self {
            ExpError::Core(E::Numerical { .. }) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, ExpError>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(ExpError::Config(msg.into()))
}
