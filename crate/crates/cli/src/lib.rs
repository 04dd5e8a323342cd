//! Command-line front end: per-stage subcommands and the config-driven
//! pipeline.

pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;

pub use config::{EventSource, PipelineConfig};
pub use error::{ErrorKind, StageError};
pub use pipeline::run_pipeline;
