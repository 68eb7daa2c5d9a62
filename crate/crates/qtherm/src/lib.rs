//! Runner for the `qtherm-core` numerics: configuration, parallel sampling,
//! the eigenstate cache, CSV tables and run manifests.

pub mod cache;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod sampling;

use std::fs;
use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub use config::{Experiment, ExperimentConfig, FileConfig, Overrides};
pub use error::{Result, RunError};

use output::Manifest;

/// Files produced by one run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub out: PathBuf,
    pub tables: Vec<PathBuf>,
    pub manifest: PathBuf,
}

/// Runs one experiment on a dedicated pool of `threads` workers and writes
/// its tables plus `manifest.json` into the output directory.
pub fn run(cfg: &ExperimentConfig, threads: usize) -> Result<RunReport> {
    let started = Instant::now();
    let started_unix_s = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| RunError::Config(format!("thread pool: {}", e)))?;
    let outcome = pool.install(|| experiments::run_experiment(cfg))?;

    fs::create_dir_all(&cfg.out).map_err(|e| RunError::io(&cfg.out, e))?;
    let tables = outcome
        .tables
        .iter()
        .map(|t| t.write(&cfg.out))
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        tool: "qtherm",
        version: env!("CARGO_PKG_VERSION"),
        experiment: cfg.experiment.to_string(),
        seed: cfg.seed(),
        threads,
        config: cfg,
        trials: &outcome.trials,
        outputs: outcome.tables.iter().map(|t| t.file_name()).collect(),
        started_unix_s,
        wall_time_s: started.elapsed().as_secs_f64(),
    }
    .write(&cfg.out)?;
    Ok(RunReport {
        out: cfg.out.clone(),
        tables,
        manifest,
    })
}
