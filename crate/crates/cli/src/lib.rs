//! Experiment runner behind the `xferqa` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod report;

pub use config::{ExperimentConfig, Manifest, Overrides, Strategy};
pub use error::{CliError, CliResult};

pub const THREADS_ENV: &str = "XFERQA_THREADS";

/// Sizes the global worker pool from `XFERQA_THREADS` when set.
pub fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Config(format!(
            "{THREADS_ENV} must be a positive integer, got `{raw}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))
}
