//! Configuration, file formats and subcommand drivers for the `dch` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::{KeyValues, RunConfig, StudyConfig, StudyKind};
pub use error::{CliError, ConfigError};
pub use output::{FieldSnapshot, SnapshotFormat};
