//! External-sampling traversals and the reservoir buffers they fill.

mod reservoir;
pub mod spill;
mod traverse;

use std::io;

use thiserror::Error;

use crate::game::GameError;
use crate::policy::PolicyError;

pub use reservoir::ReservoirBuffer;
pub use spill::{read_spill, write_spill};
pub use traverse::{
    external_sampling_traverse, run_traversals, AdvantageSample, StrategySample, StrategySource, TrainingSample,
    TraversalSamples,
};

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("not a sample spill file")]
    BadMagic,
    #[error("unsupported spill version {found}")]
    VersionMismatch { found: u32 },
    #[error("spill file is truncated")]
    Truncated,
    #[error("spill checksum mismatch")]
    ChecksumMismatch,
    #[error("inconsistent spill file: {0}")]
    Inconsistent(String),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}
