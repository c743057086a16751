//! Library backing the `mqpulse` command-line tool: configuration
//! parsing, run orchestration, analysis tables, and shape export.

pub mod analyze;
pub mod config;
pub mod manifest;
pub mod orchestrate;
pub mod pulsefile;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("file format error: {0}")]
    Format(String),

    #[error(transparent)]
    Lib(#[from] mqpulse::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub use analyze::run_analyze;
pub use config::{validate_config, RunConfig};
pub use manifest::RunManifest;
pub use orchestrate::run_optimize;
pub use pulsefile::{export_shape, load_pulse, ExportFormat};
