//! Batch pipeline around `lcswitch-core`: configuration, resumable stages,
//! manifests and reports.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod manifest;
pub mod pipeline;
pub mod report;
pub mod scan;
pub mod seeds;
pub mod stages;

pub use config::{AnalysisOptions, EnsembleConfig, RunConfig};
pub use error::{CliError, CliResult};
pub use manifest::RunManifest;
pub use pipeline::{run_pipeline, run_until, Stage};
pub use report::{report, ReportSummary};
