//! Batch runner for the partitioned-simulation emulator: TOML experiment
//! configs in, CSV tables and a JSON manifest out.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod presets;

pub use config::ExperimentConfig;
pub use error::CliError;
pub use experiment::{bound, run_experiment, run_oracle, BoundOutput, OracleRow, Row, RunOutput};
pub use output::{load_config, write_outputs, Manifest};

/// Runs `f` on a dedicated pool of `threads` workers (0 = all cores).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {threads} workers: {e}")))?;
    Ok(pool.install(f))
}
