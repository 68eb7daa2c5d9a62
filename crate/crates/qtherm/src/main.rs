use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qtherm::config::{resolve_threads, Experiment, ExperimentConfig, FileConfig, Overrides};

/// Resonant-level eigenstate thermalization experiments.
#[derive(Debug, Parser)]
#[command(name = "qtherm", version)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: QTHERM_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output directory for CSV tables and the manifest.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Sample cache: a file, or a directory (trailing '/') for sweeps.
    #[arg(long, global = true)]
    cache: Option<PathBuf>,

    /// Comma-separated list of level counts.
    #[arg(long, global = true, value_delimiter = ',')]
    k: Vec<usize>,

    /// Comma-separated list of coupling strengths.
    #[arg(long, global = true, value_delimiter = ',')]
    gamma: Vec<f64>,

    /// Number of accepted eigenstates.
    #[arg(long, global = true)]
    m: Option<usize>,

    /// Cap on uniform trials per sample set.
    #[arg(long, global = true)]
    budget: Option<u64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Eigenvalues of the single-particle Hamiltonian.
    Spectrum,
    /// Overlaps of the system level with every normal mode.
    Overlaps,
    /// System-level IPR against the coupling.
    IprScan,
    /// Static thermalization indicator from sampled eigenstates.
    StaticIndicator,
    /// Sample eigenstates only (fills the cache).
    Sample,
    /// System occupancy after a quench for individual eigenstates.
    QuenchSeries,
    /// Time-dependent IPR after a quench against the coupling.
    QuenchIprScan,
    /// Time-dependent indicator after a quench.
    QuenchIndicator,
    /// Infinite-time averages and temporal fluctuations after a quench.
    TimeAverage,
    /// Bath in an eigenstate, coupling switched on: time series.
    BathScenario,
    /// Bath scenario indicator at a fixed time.
    BathIndicator,
}

impl From<Command> for Experiment {
    fn from(c: Command) -> Self {
        match c {
            Command::Spectrum => Experiment::Spectrum,
            Command::Overlaps => Experiment::Overlaps,
            Command::IprScan => Experiment::IprScan,
            Command::StaticIndicator => Experiment::StaticIndicator,
            Command::Sample => Experiment::Sample,
            Command::QuenchSeries => Experiment::QuenchSeries,
            Command::QuenchIprScan => Experiment::QuenchIprScan,
            Command::QuenchIndicator => Experiment::QuenchIndicator,
            Command::TimeAverage => Experiment::TimeAverage,
            Command::BathScenario => Experiment::BathScenario,
            Command::BathIndicator => Experiment::BathIndicator,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = (|| {
        let file = match &cli.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let overrides = Overrides {
            experiment: cli.command.map(Experiment::from),
            seed: cli.seed,
            threads: cli.threads,
            out: cli.out.clone(),
            cache: cli.cache.clone(),
            k: cli.k.clone(),
            gamma: cli.gamma.clone(),
            m: cli.m,
            budget: cli.budget,
        };
        let cfg = ExperimentConfig::resolve(file, overrides)?;
        let threads = resolve_threads(cfg.threads)?;
        qtherm::run(&cfg, threads)
    })();
    match result {
        Ok(report) => {
            for t in &report.tables {
                println!("{}", t.display());
            }
            println!("{}", report.manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("qtherm: {}", e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
