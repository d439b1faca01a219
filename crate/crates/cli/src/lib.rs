//! Batch runner for the simulation lab: TOML configs in, CSV tables and
//! replayable manifests out.

pub mod config;
pub mod error;
pub mod manifest;
pub mod runner;
pub mod table;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
pub use manifest::{replay, run, Manifest, RunArtifacts};
pub use table::Table;
