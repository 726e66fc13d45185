//! Experiment harness around `dynnet-core`: configuration, snapshot files,
//! replica pools and the subcommands behind the `dynnet` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod stats;

pub use config::{ExperimentConfig, Overrides, Stop};
pub use dynnet_core as core;
pub use error::Failure;
