//! Command-line front end for flat-limit experiments.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod output;

pub use commands::{emit, run, run_command, CliError, RunOutput};
pub use config::{CommandKind, ExperimentConfig, Grid, KernelFamily, ModelSpec, OutputFormat, UsageError};
pub use dataset::{parse_dataset, parse_points, write_dataset, Dataset, DatasetOptions, ParseError};

/// Size the global thread pool from FLATGP_THREADS, if set.
pub fn configure_threads() -> Result<(), UsageError> {
    let Ok(v) = std::env::var("FLATGP_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| UsageError(format!("FLATGP_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| UsageError(e.to_string()))
}
