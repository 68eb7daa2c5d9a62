//! Run configuration: a TOML file with fixed sections, overridden by flags.
//!
//! ```toml
//! experiment = "static-indicator"
//!
//! [params]            # one setup; omitted keys take the defaults below
//! k = 300             # total levels (system + bath)
//! w = 1.0             # bath bandwidth, the energy unit
//! eps0 = 0.2
//! gamma = 0.2
//! eps0_final = -0.2   # quench target; required by quench experiments
//! t_mid = 0.45
//! dt = 0.1
//! n = 150             # default: half filling of the sampled spectrum
//! m = 100
//! seed = 24301
//!
//! [sweep]             # each non-empty list replaces the matching param
//! k = [60, 120, 180, 240]
//! gamma = [0.1, 0.2, 0.5]
//!
//! [run]
//! out = "out"
//! threads = 4
//! cache = "cache/"    # file, or directory (trailing '/') for sweeps
//! budget = 8000000000
//! progress = true
//!
//! [time]
//! points = 240        # grid over [0, 12/gamma]
//! at = 10.0           # evaluation time in units of 1/gamma
//! series = 6          # samples shown as time series
//!
//! [observables]
//! levels = [0]        # levels reported by static-indicator
//! xi = 0.1            # deviation threshold
//! p0_init = 0.0       # bath scenario: initial system occupancy
//! gamma_points = 40   # ipr-scan / quench-ipr-scan grid when no gamma sweep
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use qtherm_core::model::SetupParams;

use crate::error::{Result, RunError};
use crate::sampling::DEFAULT_BUDGET;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Spectrum,
    Overlaps,
    IprScan,
    StaticIndicator,
    Sample,
    QuenchSeries,
    QuenchIprScan,
    QuenchIndicator,
    TimeAverage,
    BathScenario,
    BathIndicator,
}

impl Experiment {
    pub const ALL: [Experiment; 11] = [
        Experiment::Spectrum,
        Experiment::Overlaps,
        Experiment::IprScan,
        Experiment::StaticIndicator,
        Experiment::Sample,
        Experiment::QuenchSeries,
        Experiment::QuenchIprScan,
        Experiment::QuenchIndicator,
        Experiment::TimeAverage,
        Experiment::BathScenario,
        Experiment::BathIndicator,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Spectrum => "spectrum",
            Experiment::Overlaps => "overlaps",
            Experiment::IprScan => "ipr-scan",
            Experiment::StaticIndicator => "static-indicator",
            Experiment::Sample => "sample",
            Experiment::QuenchSeries => "quench-series",
            Experiment::QuenchIprScan => "quench-ipr-scan",
            Experiment::QuenchIndicator => "quench-indicator",
            Experiment::TimeAverage => "time-average",
            Experiment::BathScenario => "bath-scenario",
            Experiment::BathIndicator => "bath-indicator",
        }
    }

    pub fn needs_quench(self) -> bool {
        matches!(
            self,
            Experiment::QuenchSeries
                | Experiment::QuenchIprScan
                | Experiment::QuenchIndicator
                | Experiment::TimeAverage
        )
    }

    pub fn is_bath(self) -> bool {
        matches!(self, Experiment::BathScenario | Experiment::BathIndicator)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = RunError;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| RunError::Config(format!("unknown experiment {:?}", s)))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub k: Option<usize>,
    pub w: Option<f64>,
    pub eps0: Option<f64>,
    pub gamma: Option<f64>,
    pub eps0_final: Option<f64>,
    pub t_mid: Option<f64>,
    pub dt: Option<f64>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub k: Vec<usize>,
    #[serde(default)]
    pub gamma: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub cache: Option<PathBuf>,
    pub budget: Option<u64>,
    pub progress: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSection {
    pub points: usize,
    pub at: f64,
    pub series: usize,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self {
            points: 240,
            at: 10.0,
            series: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObservablesSection {
    pub levels: Vec<usize>,
    pub xi: f64,
    pub p0_init: f64,
    pub gamma_points: usize,
}

impl Default for ObservablesSection {
    fn default() -> Self {
        Self {
            levels: vec![0],
            xi: 0.1,
            p0_init: 0.0,
            gamma_points: 40,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub experiment: Option<Experiment>,
    #[serde(default)]
    pub params: ParamsSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub time: TimeSection,
    #[serde(default)]
    pub observables: ObservablesSection,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| RunError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            RunError::Config(msg) => RunError::Config(format!("{}: {}", path.display(), msg)),
            other => other,
        })
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub experiment: Option<Experiment>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub k: Vec<usize>,
    pub gamma: Vec<f64>,
    pub m: Option<usize>,
    pub budget: Option<u64>,
}

/// Fully resolved and validated configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub params: ParamsSection,
    pub sweep: SweepSection,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub cache: Option<PathBuf>,
    pub budget: u64,
    pub progress: bool,
    pub time: TimeSection,
    pub observables: ObservablesSection,
}

impl ExperimentConfig {
    pub fn resolve(file: FileConfig, over: Overrides) -> Result<Self> {
        let experiment = over
            .experiment
            .or(file.experiment)
            .ok_or_else(|| RunError::Config("no experiment given".into()))?;
        let mut params = file.params;
        if over.seed.is_some() {
            params.seed = over.seed;
        }
        if over.m.is_some() {
            params.m = over.m;
        }
        let mut sweep = file.sweep;
        if !over.k.is_empty() {
            sweep.k = over.k;
        }
        if !over.gamma.is_empty() {
            sweep.gamma = over.gamma;
        }
        let cfg = Self {
            experiment,
            params,
            sweep,
            out: over.out.or(file.run.out).unwrap_or_else(|| PathBuf::from("out")),
            threads: over.threads.or(file.run.threads),
            cache: over.cache.or(file.run.cache),
            budget: over.budget.or(file.run.budget).unwrap_or(DEFAULT_BUDGET),
            progress: file.run.progress.unwrap_or(true),
            time: file.time,
            observables: file.observables,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn seed(&self) -> u64 {
        self.params.seed.unwrap_or(SetupParams::default().seed)
    }

    /// Sampled particle number for a setup with `k` levels.
    fn default_particles(&self, k: usize) -> usize {
        if self.experiment.is_bath() {
            (k - 1) / 2
        } else {
            k / 2
        }
    }

    fn setup(&self, k: usize, gamma: f64) -> SetupParams {
        let d = SetupParams::default();
        let p = &self.params;
        SetupParams {
            k,
            w: p.w.unwrap_or(d.w),
            eps0: p.eps0.unwrap_or(if self.experiment.is_bath() { -0.2 } else { d.eps0 }),
            gamma,
            eps0_final: p.eps0_final,
            t_mid: p.t_mid.unwrap_or(d.t_mid),
            dt: p.dt.unwrap_or(d.dt),
            n: p.n.unwrap_or_else(|| self.default_particles(k)),
            m: p.m.unwrap_or(d.m),
            seed: self.seed(),
        }
    }

    pub fn ks(&self) -> Vec<usize> {
        if self.sweep.k.is_empty() {
            let default_k = if self.experiment.is_bath() { 301 } else { SetupParams::default().k };
            vec![self.params.k.unwrap_or(default_k)]
        } else {
            self.sweep.k.clone()
        }
    }

    /// Explicit coupling values, or `None` when the experiment should use its
    /// own default grid.
    pub fn gammas(&self) -> Option<Vec<f64>> {
        if !self.sweep.gamma.is_empty() {
            Some(self.sweep.gamma.clone())
        } else {
            self.params.gamma.map(|g| vec![g])
        }
    }

    pub fn gammas_or(&self, fallback: Vec<f64>) -> Vec<f64> {
        self.gammas().unwrap_or(fallback)
    }

    /// Cartesian product of the `K` and `gamma` lists, `K` outermost.
    pub fn setups(&self, gammas: &[f64]) -> Vec<SetupParams> {
        self.ks()
            .into_iter()
            .flat_map(|k| gammas.iter().map(move |&g| (k, g)))
            .map(|(k, g)| self.setup(k, g))
            .collect()
    }

    /// Single-coupling setup list (`gamma` from params or the default).
    pub fn default_setups(&self) -> Vec<SetupParams> {
        self.setups(&self.gammas_or(vec![SetupParams::default().gamma]))
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(RunError::Config(m));
        if self.ks().is_empty() {
            return err("empty K list".into());
        }
        let gammas = self.gammas_or(vec![SetupParams::default().gamma]);
        for p in self.setups(&gammas) {
            p.validate()
                .map_err(|e| RunError::Config(format!("K = {}, gamma = {}: {}", p.k, p.gamma, e)))?;
            if p.n == 0 || p.n >= p.k - usize::from(self.experiment.is_bath()) {
                return err(format!(
                    "N = {} must lie strictly between 0 and the sampled mode count",
                    p.n
                ));
            }
            if !(p.t_mid - 0.5 * p.dt > 0.0) {
                return err("temperature window must lie above zero".into());
            }
            if p.k > u32::MAX as usize {
                return err(format!("K = {} too large", p.k));
            }
        }
        if self.experiment.needs_quench() && self.params.eps0_final.is_none() {
            return err(format!("{} requires params.eps0_final", self.experiment));
        }
        if self.experiment.needs_quench() || self.experiment.is_bath() {
            if gammas.iter().any(|&g| !(g > 0.0)) {
                return err("time-dependent experiments need gamma > 0".into());
            }
        }
        if self.time.points < 8 {
            return err("time.points must be at least 8".into());
        }
        if !(self.time.at > 0.0) {
            return err("time.at must be positive".into());
        }
        if !(self.observables.xi > 0.0) {
            return err("observables.xi must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.observables.p0_init) {
            return err("observables.p0_init must lie in [0, 1]".into());
        }
        if self.observables.gamma_points < 2 {
            return err("observables.gamma_points must be at least 2".into());
        }
        for &k in &self.ks() {
            if let Some(&l) = self.observables.levels.iter().find(|&&l| l >= k) {
                return err(format!("observable level {} out of range for K = {}", l, k));
            }
        }
        if self.threads == Some(0) {
            return err("threads must be positive".into());
        }
        if self.budget == 0 {
            return err("budget must be positive".into());
        }
        Ok(())
    }
}

/// `--threads`, else `QTHERM_THREADS`, else the machine's parallelism.
pub fn resolve_threads(flag: Option<usize>) -> Result<usize> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var("QTHERM_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| RunError::Config(format!("QTHERM_THREADS = {:?} is not a positive integer", v))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}
