//! Batch pipeline wiring the skytraffic stages together, plus the run
//! manifest and the error format used by the `skytraffic` binary.

mod config;
mod error;
mod manifest;
mod pipeline;

pub use config::{
    AnalyticsConfig, ClaheConfig, InputConfig, PipelineConfig, PreprocessConfig, Stage,
    OUTPUT_DIR_ENV,
};
pub use error::CliError;
pub use manifest::{sha256_hex, Manifest};
pub use pipeline::{evaluate, run, synth, RunSummary};
