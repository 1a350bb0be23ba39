//! Command-line orchestration for the ASAF pipeline.

use std::path::PathBuf;

pub mod commands;
pub mod config;
pub mod rundir;

pub use commands::{run, Command};
pub use config::{Overrides, RunConfig};
pub use rundir::{Manifest, RunDir};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: asaf_core::Error,
    },

    #[error("missing input file {0}")]
    MissingInput(PathBuf),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("refusing to overwrite {0} with different contents")]
    OutputConflict(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl From<asaf_core::Error> for CliError {
    fn from(source: asaf_core::Error) -> Self {
        CliError::Stage {
            stage: "config",
            source,
        }
    }
}

impl CliError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for bad inputs, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Stage { source, .. } if !source.is_input_error() => 3,
            _ => 2,
        }
    }
}

/// Tags a core error with the stage it came from.
pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T> StageExt<T> for asaf_core::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Stage { stage, source })
    }
}
