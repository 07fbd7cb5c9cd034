//! Experiment runner: configuration, training runs with resumable state,
//! and the evaluation subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod games;
pub mod logs;
pub mod run;

pub use config::ExperimentConfig;
pub use error::CliError;
pub use run::{resume, train, RunOptions};
