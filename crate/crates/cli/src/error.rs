use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] kinspread::Error),

    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("bad model file {path}: {source}")]
    ModelFile {
        path: PathBuf,
        source: toml::de::Error,
    },

    #[error("cannot encode JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for configuration problems, 3 for numerical failures, 4 when a
    /// simulated front leaves its domain.
    pub fn exit_code(&self) -> u8 {
        use kinspread::Error as E;
        match self {
            CliError::Core(e) => match e {
                E::QuadratureNotConverged { .. } | E::RootNotBracketed { .. } => 3,
                E::FrontLeftDomain { .. } => 4,
                _ => 2,
            },
            CliError::Json(_) => 3,
            _ => 2,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
