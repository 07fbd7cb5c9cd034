use std::io;

use sdcfr_core::deep_cfr::DeepCfrError;
use sdcfr_core::eval::EvalError;
use sdcfr_core::sampling::SamplingError;
use sdcfr_core::sd_cfr::SdCfrError;
use sdcfr_core::GameError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// A configuration value failed validation.
    #[error("config error: {field}: {message}")]
    Config { field: String, message: String },
    #[error("config file is not valid: {0}")]
    Parse(String),
    /// Resume refused because the run's config no longer matches.
    #[error("config differs from the one the run started with:\n{0}")]
    ConfigMismatch(String),
    #[error("corrupt run directory: {0}")]
    CorruptRun(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Training(#[from] DeepCfrError),
}

impl CliError {
    pub fn config(field: &str, message: impl Into<String>) -> Self {
        CliError::Config { field: field.into(), message: message.into() }
    }

    /// Process exit code: 2 for configuration problems, 3 for damaged runs.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Parse(_) | CliError::ConfigMismatch(_) | CliError::Usage(_) => 2,
            CliError::CorruptRun(_) => 3,
            _ => 1,
        }
    }
}

impl From<SdCfrError> for CliError {
    fn from(e: SdCfrError) -> Self {
        match e {
            SdCfrError::CorruptCheckpoint { .. } | SdCfrError::Checkpoint(_) | SdCfrError::Manifest(_) => {
                CliError::CorruptRun(e.to_string())
            }
            other => CliError::Training(DeepCfrError::Models(other)),
        }
    }
}

impl From<SamplingError> for CliError {
    fn from(e: SamplingError) -> Self {
        match e {
            SamplingError::Io(e) => CliError::Io(e),
            other => CliError::CorruptRun(format!("buffer spill: {other}")),
        }
    }
}
