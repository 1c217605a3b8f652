//! Config-driven experiment runs behind the command-line verbs.

mod commands;
mod config;

pub use commands::*;
pub use config::{DatasetSource, ExperimentConfig, Preset};
