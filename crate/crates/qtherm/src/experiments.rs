//! The runnable experiments. Each one turns a validated configuration into a
//! set of CSV tables; nothing here writes files except the sample cache.

use std::path::PathBuf;

use rayon::prelude::*;

use qtherm_core::bath::{
    bath_spectrum, indicator_gc_bath_exact, indicator_ref_bath, localization_coefficient,
    system_occupancy_bath_reference, system_occupancy_bath_scenario, BathInitialState,
};
use qtherm_core::dynamics::{
    final_thermal_occupancy, indicator_ref_t, infinite_time_indicator, propagate_row, sigma_av,
    temporal_std, time_averaged_occupancy, time_grid, AmplitudeRow, QuenchPair, DEGENERACY_TOLERANCE,
};
use qtherm_core::ensemble::{thermal_state, ReferenceEnsemble, SampledEigenstate, WindowSampler};
use qtherm_core::model::{build_resonant_level, diagonalize, min_gap, SetupParams, Spectrum};
use qtherm_core::observables::{
    chebyshev_bound, deviation_fraction, equilibrium_band, indicator_ref, ipr,
    occupancy_gc, occupancy_static_level,
};

use crate::cache::{read_samples, write_samples, SampleKey, SampleKind};
use crate::config::{Experiment, ExperimentConfig};
use crate::error::{Result, RunError};
use crate::output::{Table, TrialRecord};
use crate::row;
use crate::sampling::sample_parallel;

pub struct Outcome {
    pub tables: Vec<Table>,
    pub trials: Vec<TrialRecord>,
}

/// Coupling grid `lo..=hi`, logarithmically spaced.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| lo * (hi / lo).powf(i as f64 / (points - 1) as f64))
        .collect()
}

fn samples_needed(cfg: &ExperimentConfig) -> usize {
    match cfg.experiment {
        Experiment::Spectrum | Experiment::Overlaps | Experiment::IprScan | Experiment::QuenchIprScan => 0,
        _ => cfg.default_setups().len(),
    }
}

fn dir_like(path: &std::path::Path) -> bool {
    path.is_dir() || path.as_os_str().to_string_lossy().ends_with('/')
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    trials: Vec<TrialRecord>,
}

impl<'a> Context<'a> {
    fn cache_path(&self, key: &SampleKey) -> Option<PathBuf> {
        let base = self.cfg.cache.as_ref()?;
        if dir_like(base) {
            let kind = match key.kind {
                SampleKind::System => "system",
                SampleKind::Bath => "bath",
            };
            Some(base.join(format!("samples-{}-K{}-{}.txt", kind, key.params.k, &key.hash()[..16])))
        } else {
            Some(base.clone())
        }
    }

    /// Accepted eigenstates for `key`, from the cache when it holds them.
    fn samples(&mut self, key: SampleKey, spectrum: &Spectrum) -> Result<Vec<SampledEigenstate>> {
        let p = key.params.clone();
        let label = format!("K={} gamma={}", p.k, p.gamma);
        let path = self.cache_path(&key);
        if let Some(path) = path.as_ref().filter(|p| p.exists()) {
            match read_samples(path, &key, spectrum, p.m) {
                Ok((samples, trials)) => {
                    self.record(&label, &p, samples.len(), trials, true);
                    return Ok(samples);
                }
                // per-point files in a cache directory are simply refreshed
                Err(RunError::Cache { .. }) if self.cfg.cache.as_deref().is_some_and(dir_like) => {}
                Err(e) => return Err(e),
            }
        }
        let sampler = WindowSampler::from_params(spectrum, &p, self.cfg.budget)?;
        let mut run = sample_parallel(&sampler, &label, self.cfg.progress)?;
        for s in &mut run.samples {
            // the exact form a cached record reproduces
            s.reference = ReferenceEnsemble::new(s.reference.beta(), s.reference.mu());
        }
        if let Some(path) = &path {
            write_samples(path, &key, spectrum, &run)?;
        }
        self.record(&label, &p, run.samples.len(), run.trials, false);
        Ok(run.samples)
    }

    fn record(&mut self, label: &str, p: &SetupParams, accepted: usize, trials: u64, from_cache: bool) {
        self.trials.push(TrialRecord {
            label: label.to_string(),
            k: p.k,
            gamma: p.gamma,
            accepted,
            trials,
            acceptance_rate: accepted as f64 / trials.max(1) as f64,
            from_cache,
        });
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome> {
    if let Some(cache) = &cfg.cache {
        if !dir_like(cache) && samples_needed(cfg) > 1 {
            return Err(RunError::Config(format!(
                "{} sample sets needed; give a cache directory (trailing '/') instead of a file",
                samples_needed(cfg)
            )));
        }
    }
    let mut ctx = Context {
        cfg,
        trials: Vec::new(),
    };
    let tables = match cfg.experiment {
        Experiment::Spectrum => spectrum(cfg)?,
        Experiment::Overlaps => overlaps(cfg)?,
        Experiment::IprScan => ipr_scan(cfg)?,
        Experiment::StaticIndicator => static_indicator(&mut ctx)?,
        Experiment::Sample => sample(&mut ctx)?,
        Experiment::QuenchSeries => quench_series(&mut ctx)?,
        Experiment::QuenchIprScan => quench_ipr_scan(cfg)?,
        Experiment::QuenchIndicator => quench_indicator(&mut ctx)?,
        Experiment::TimeAverage => time_average(&mut ctx)?,
        Experiment::BathScenario => bath_scenario(&mut ctx)?,
        Experiment::BathIndicator => bath_indicator(&mut ctx)?,
    };
    Ok(Outcome {
        tables,
        trials: ctx.trials,
    })
}

fn spectrum_of(p: &SetupParams) -> Result<Spectrum> {
    Ok(diagonalize(&build_resonant_level(p)?)?)
}

fn quench_of(p: &SetupParams) -> Result<QuenchPair> {
    let fin = p
        .quenched()
        .ok_or_else(|| RunError::Config("missing eps0_final".into()))?;
    Ok(QuenchPair::new(&build_resonant_level(p)?, &build_resonant_level(&fin)?)?
        .with_degeneracy_tolerance(DEGENERACY_TOLERANCE * p.w))
}

fn spectrum(cfg: &ExperimentConfig) -> Result<Vec<Table>> {
    let mut t = Table::new(
        "spectrum",
        &["K[-]", "gamma[W]", "mode[-]", "omega[W]", "min_gap[W]", "orthogonality_residual[-]"],
    );
    let setups = cfg.default_setups();
    let spectra: Vec<Spectrum> = setups.par_iter().map(spectrum_of).collect::<Result<_>>()?;
    for (p, s) in setups.iter().zip(&spectra) {
        let gap = min_gap(s);
        let resid = s.orthogonality_residual();
        for (l, &w) in s.omega().iter().enumerate() {
            t.push(row![p.k, p.gamma, l, w, gap, resid]);
        }
    }
    Ok(vec![t])
}

fn overlaps(cfg: &ExperimentConfig) -> Result<Vec<Table>> {
    let mut t = Table::new("overlaps", &["K[-]", "gamma[W]", "mode[-]", "omega[W]", "a0_sq[-]"]);
    let setups = cfg.setups(&cfg.gammas_or(vec![0.05, 0.2, 0.5]));
    let spectra: Vec<Spectrum> = setups.par_iter().map(spectrum_of).collect::<Result<_>>()?;
    for (p, s) in setups.iter().zip(&spectra) {
        for (l, (&w, a2)) in s.omega().iter().zip(s.overlaps(0)).enumerate() {
            t.push(row![p.k, p.gamma, l, w, a2]);
        }
    }
    Ok(vec![t])
}

fn scan_gammas(cfg: &ExperimentConfig) -> Vec<f64> {
    cfg.gammas_or(log_grid(0.01, 1.0, cfg.observables.gamma_points))
}

fn ipr_scan(cfg: &ExperimentConfig) -> Result<Vec<Table>> {
    let mut t = Table::new("ipr_scan", &["K[-]", "gamma[W]", "ipr0[-]"]);
    let setups = cfg.setups(&scan_gammas(cfg));
    let values: Vec<f64> = setups
        .par_iter()
        .map(|p| Ok(ipr(&spectrum_of(p)?, 0)))
        .collect::<Result<_>>()?;
    for (p, v) in setups.iter().zip(values) {
        t.push(row![p.k, p.gamma, v]);
    }
    Ok(vec![t])
}

fn quench_ipr_scan(cfg: &ExperimentConfig) -> Result<Vec<Table>> {
    let mut t = Table::new("quench_ipr_scan", &["K[-]", "gamma[W]", "t[1/W]", "ipr0_t[-]"]);
    let setups = cfg.setups(&scan_gammas(cfg));
    let values: Vec<(f64, f64)> = setups
        .par_iter()
        .map(|p| {
            let q = quench_of(p)?;
            let time = cfg.time.at / p.gamma;
            Ok((time, propagate_row(&q, 0, time)?.ipr()))
        })
        .collect::<Result<_>>()?;
    for (p, (time, v)) in setups.iter().zip(values) {
        t.push(row![p.k, p.gamma, time, v]);
    }
    Ok(vec![t])
}

fn static_indicator(ctx: &mut Context<'_>) -> Result<Vec<Table>> {
    let cfg = ctx.cfg;
    let mut per_sample = Table::new(
        "static_samples",
        &["K[-]", "gamma[W]", "level[-]", "i[-]", "E[W]", "T[W]", "mu[W]", "p[-]", "p_gc[-]"],
    );
    let mut summary = Table::new(
        "static_summary",
        &[
            "K[-]", "gamma[W]", "level[-]", "M[-]", "trials[-]", "I_ref[-]", "half_sqrt_ipr[-]",
            "ipr[-]", "band_lo[-]", "band_hi[-]", "band_monotone[-]", "xi[-]",
            "deviation_fraction[-]", "chebyshev_bound[-]",
        ],
    );
    for p in cfg.default_setups() {
        let s = spectrum_of(&p)?;
        let samples = ctx.samples(SampleKey::system(&p), &s)?;
        let trials = ctx.trials.last().map_or(0, |r| r.trials);
        let (t_lo, t_hi) = p.temperature_window();
        for &level in &cfg.observables.levels {
            let rows: Vec<(f64, f64)> = samples
                .par_iter()
                .map(|x| Ok((occupancy_static_level(&s, &x.occ, level)?, occupancy_gc(&s, &x.reference, level))))
                .collect::<Result<_>>()?;
            for (x, (pi, gc)) in samples.iter().zip(&rows) {
                per_sample.push(row![
                    p.k, p.gamma, level, x.sample_index, x.energy,
                    x.reference.temperature(), x.reference.mu(), *pi, *gc
                ]);
            }
            let rep = indicator_ref(&samples, &s, level)?;
            let ipr_k = ipr(&s, level);
            let band = equilibrium_band(&s, p.n as f64, t_lo, t_hi, level)?;
            if !band.monotone {
                eprintln!(
                    "warning: occupancy of level {} not monotone over [{}, {}] at K={}, gamma={}",
                    level, t_lo, t_hi, p.k, p.gamma
                );
            }
            let xi = cfg.observables.xi;
            summary.push(row![
                p.k, p.gamma, level, samples.len(), trials, rep.value, rep.bound.unwrap_or(f64::NAN),
                ipr_k, band.lo, band.hi, band.monotone, xi,
                deviation_fraction(&samples, &s, level, xi)?, chebyshev_bound(ipr_k, xi)?
            ]);
        }
    }
    Ok(vec![per_sample, summary])
}

fn sample(ctx: &mut Context<'_>) -> Result<Vec<Table>> {
    let mut t = Table::new(
        "samples",
        &["K[-]", "gamma[W]", "i[-]", "N[-]", "E[W]", "T[W]", "beta[1/W]", "mu[W]"],
    );
    let mut summary = Table::new(
        "sample_summary",
        &["K[-]", "gamma[W]", "M[-]", "trials[-]", "acceptance_rate[-]", "E_lo[W]", "E_hi[W]"],
    );
    for p in ctx.cfg.default_setups() {
        let s = spectrum_of(&p)?;
        let samples = ctx.samples(SampleKey::system(&p), &s)?;
        let rec = ctx.trials.last().cloned().expect("recorded");
        let (t_lo, t_hi) = p.temperature_window();
        let w = qtherm_core::ensemble::energy_window_for_temperature(&s, p.n, t_lo, t_hi)?;
        for x in &samples {
            t.push(row![
                p.k, p.gamma, x.sample_index, x.occ.count(), x.energy,
                x.reference.temperature(), x.reference.beta(), x.reference.mu()
            ]);
        }
        summary.push(row![p.k, p.gamma, samples.len(), rec.trials, rec.acceptance_rate, w.lo, w.hi]);
    }
    Ok(vec![t, summary])
}

/// Bath level (index `>= 1`) whose energy is closest to `e`.
fn bath_level_nearest(p: &SetupParams, e: f64) -> usize {
    let levels = p.bath_levels();
    1 + (0..levels.len())
        .min_by(|&a, &b| (levels[a] - e).abs().total_cmp(&(levels[b] - e).abs()))
        .unwrap_or(0)
}

fn rows_at(q: &QuenchPair, level: usize, times: &[f64]) -> Result<Vec<AmplitudeRow>> {
    times.par_iter().map(|&t| Ok(propagate_row(q, level, t)?)).collect()
}

fn quench_series(ctx: &mut Context<'_>) -> Result<Vec<Table>> {
    let cfg = ctx.cfg;
    let mut series = Table::new(
        "quench_series",
        &["K[-]", "gamma[W]", "i[-]", "t[1/W]", "p0[-]", "p0_ref[-]", "p0_gcf[-]"],
    );
    let mut bath = Table::new(
        "quench_bath_series",
        &["K[-]", "gamma[W]", "i[-]", "level[-]", "t[1/W]", "p[-]"],
    );
    let mut band_t = Table::new("quench_band", &["K[-]", "gamma[W]", "band_lo[-]", "band_hi[-]"]);
    let mut summary = Table::new(
        "quench_summary",
        &["K[-]", "gamma[W]", "t[1/W]", "M[-]", "mean_abs_dev_gcf[-]", "I_ref_t[-]", "half_sqrt_ipr0_t[-]"],
    );
    for p in cfg.default_setups() {
        let q = quench_of(&p)?;
        let samples = ctx.samples(SampleKey::system(&p), q.initial())?;
        let shown = &samples[..cfg.time.series.min(samples.len())];
        let times = time_grid(p.gamma, cfg.time.points)?;
        let omega = q.initial().omega();
        let gcf: Vec<f64> = samples.iter().map(|x| final_thermal_occupancy(&q, &x.reference)).collect();
        for (row, &t) in rows_at(&q, 0, &times)?.iter().zip(&times) {
            for (x, g) in shown.iter().zip(&gcf) {
                series.push(row![
                    p.k, p.gamma, x.sample_index, t, row.occupancy(&x.occ)?,
                    row.thermal_occupancy(omega, &x.reference), *g
                ]);
            }
        }
        let level = bath_level_nearest(&p, p.eps0_final.unwrap_or(p.eps0));
        for (row, &t) in rows_at(&q, level, &times)?.iter().zip(&times) {
            for x in shown {
                bath.push(row![p.k, p.gamma, x.sample_index, level, t, row.occupancy(&x.occ)?]);
            }
        }
        let (t_lo, t_hi) = p.temperature_window();
        let band = equilibrium_band(q.final_spectrum(), p.n as f64, t_lo, t_hi, 0)?;
        band_t.push(row![p.k, p.gamma, band.lo, band.hi]);

        let t_eval = cfg.time.at / p.gamma;
        let row0 = propagate_row(&q, 0, t_eval)?;
        let mut dev = 0.0;
        for (x, g) in samples.iter().zip(&gcf) {
            dev += (row0.occupancy(&x.occ)? - g).abs();
        }
        let rep = indicator_ref_t(&samples, &q, &row0)?;
        summary.push(row![
            p.k, p.gamma, t_eval, samples.len(), dev / samples.len() as f64,
            rep.value, rep.bound.unwrap_or(f64::NAN)
        ]);
    }
    Ok(vec![series, bath, band_t, summary])
}

fn quench_indicator(ctx: &mut Context<'_>) -> Result<Vec<Table>> {
    let cfg = ctx.cfg;
    let mut over_time = Table::new(
        "quench_indicator",
        &["K[-]", "gamma[W]", "t[1/W]", "I_ref_t[-]", "half_sqrt_ipr0_t[-]"],
    );
    let mut summary = Table::new(
        "quench_indicator_summary",
        &["K[-]", "gamma[W]", "t[1/W]", "M[-]", "I_ref_t[-]", "half_sqrt_ipr0_t[-]", "mean_abs_dev_gcf[-]"],
    );
    for p in cfg.default_setups() {
        let q = quench_of(&p)?;
        let samples = ctx.samples(SampleKey::system(&p), q.initial())?;
        let times = time_grid(p.gamma, cfg.time.points)?;
        for row in rows_at(&q, 0, &times)? {
            let rep = indicator_ref_t(&samples, &q, &row)?;
            over_time.push(row![p.k, p.gamma, row.t, rep.value, rep.bound.unwrap_or(f64::NAN)]);
        }
        let t_eval = cfg.time.at / p.gamma;
        let row0 = propagate_row(&q, 0, t_eval)?;
        let rep = indicator_ref_t(&samples, &q, &row0)?;
        let mut dev = 0.0;
        for x in &samples {
            dev += (row0.occupancy(&x.occ)? - final_thermal_occupancy(&q, &x.reference)).abs();
        }
        summary.push(row![
            p.k, p.gamma, t_eval, samples.len(), rep.value, rep.bound.unwrap_or(f64::NAN),
            dev / samples.len() as f64
        ]);
    }
    Ok(vec![over_time, summary])
}

fn time_average(ctx: &mut Context<'_>) -> Result<Vec<Table>> {
    let cfg = ctx.cfg;
    let mut per_sample = Table::new(
        "time_average_samples",
        &["K[-]", "gamma[W]", "i[-]", "p0_avg[-]", "p0_gcf[-]", "sigma[-]"],
    );
    let mut summary = Table::new(
        "time_average",
        &["K[-]", "gamma[W]", "M[-]", "I_ref_inf[-]", "sigma_av[-]"],
    );
    for p in cfg.default_setups() {
        let q = quench_of(&p)?;
        let samples = ctx.samples(SampleKey::system(&p), q.initial())?;
        let rows: Vec<(f64, f64)> = samples
            .par_iter()
            .map(|x| Ok((time_averaged_occupancy(&q, &x.occ)?, temporal_std(&q, &x.occ)?)))
            .collect::<Result<_>>()?;
        for (x, (avg, sigma)) in samples.iter().zip(&rows) {
            per_sample.push(row![
                p.k, p.gamma, x.sample_index, *avg, final_thermal_occupancy(&q, &x.reference), *sigma
            ]);
        }
        let inf = infinite_time_indicator(&samples, &q)?;
        summary.push(row![p.k, p.gamma, samples.len(), inf.value, sigma_av(&samples, &q)?]);
    }
    Ok(vec![per_sample, summary])
}

fn bath_states(
    ctx: &mut Context<'_>,
    p: &SetupParams,
) -> Result<(QuenchPair, Spectrum, Vec<BathInitialState>)> {
    let q = QuenchPair::switch_on(&build_resonant_level(p)?)?
        .with_degeneracy_tolerance(DEGENERACY_TOLERANCE * p.w);
    let bath = bath_spectrum(p)?;
    let samples = ctx.samples(SampleKey::bath(p), &bath)?;
    let p0 = ctx.cfg.observables.p0_init;
    let states = samples
        .into_iter()
        .map(|x| BathInitialState::new(p0, x.occ, x.reference))
        .collect::<qtherm_core::Result<_>>()?;
    Ok((q, bath, states))
}

/// `<p_k(t)>` of a level from its propagated row, bath-scenario initial state.
fn bath_level_occupancy(row: &AmplitudeRow, init: &BathInitialState) -> f64 {
    row.amps[0].norm_sqr() * init.p0_init
        + init.bath_occ.occupied().map(|l| row.amps[l + 1].norm_sqr()).sum::<f64>()
}

fn bath_scenario(ctx: &mut Context<'_>) -> Result<Vec<Table>> {
    let cfg = ctx.cfg;
    let mut loc = Table::new(
        "bath_localization",
        &["K[-]", "gamma[W]", "t[1/W]", "D[-]", "a00_sq[-]", "ipr0_t[-]"],
    );
    let mut traj = Table::new(
        "bath_trajectory",
        &["K[-]", "gamma[W]", "t[1/W]", "T1[W]", "mu1[W]", "p0[-]", "p0_ref[-]", "p0_eq[-]"],
    );
    let mut ind = Table::new(
        "bath_indicator_series",
        &["K[-]", "gamma[W]", "t[1/W]", "M[-]", "I_ref[-]", "half_sqrt_D[-]", "I_gc_exact[-]"],
    );
    let mut levels = Table::new(
        "bath_level_series",
        &["K[-]", "gamma[W]", "level[-]", "t[1/W]", "p[-]", "p_initial[-]"],
    );
    for p in cfg.default_setups() {
        let (q, bath, states) = bath_states(ctx, &p)?;
        let times = time_grid(p.gamma, cfg.time.points)?;
        let rows = rows_at(&q, 0, &times)?;
        let first = &states[0];
        let center = thermal_state(&bath, 1.0 / p.t_mid, p.n as f64)?;
        let eq = final_thermal_occupancy(&q, &first.reference);
        let level_energies = q.initial().omega();
        for row in &rows {
            let d = localization_coefficient(row);
            let a00 = row.amps[0].norm_sqr();
            loc.push(row![p.k, p.gamma, row.t, d, a00, row.ipr()]);
            traj.push(row![
                p.k, p.gamma, row.t, first.reference.temperature(), first.reference.mu(),
                system_occupancy_bath_scenario(row, first)?,
                system_occupancy_bath_reference(row, level_energies, &first.reference, first.p0_init),
                eq
            ]);
            let r = indicator_ref_bath(&states, &q, row)?;
            let exact = indicator_gc_bath_exact(&q, &center, row);
            ind.push(row![p.k, p.gamma, row.t, states.len(), r.value, r.bound.unwrap_or(f64::NAN), exact.value]);
        }
        let near = bath_level_nearest(&p, p.eps0);
        for level in [near.saturating_sub(1).max(1), near, (near + 1).min(p.k - 1)] {
            let initial = if first.bath_occ.get(level - 1) { 1.0 } else { 0.0 };
            for row in rows_at(&q, level, &times)? {
                levels.push(row![p.k, p.gamma, level, row.t, bath_level_occupancy(&row, first), initial]);
            }
        }
    }
    Ok(vec![loc, traj, ind, levels])
}

/// Smallest `|a_00(t)|^2` on a uniform grid over `[5/gamma, 20/gamma]`.
pub fn a00_floor(q: &QuenchPair, gamma: f64, points: usize) -> Result<f64> {
    let times: Vec<f64> = (0..points)
        .map(|i| (5.0 + 15.0 * i as f64 / (points - 1) as f64) / gamma)
        .collect();
    Ok(rows_at(q, 0, &times)?
        .iter()
        .map(|r| r.amps[0].norm_sqr())
        .fold(f64::INFINITY, f64::min))
}

fn bath_indicator(ctx: &mut Context<'_>) -> Result<Vec<Table>> {
    let cfg = ctx.cfg;
    let mut t = Table::new(
        "bath_indicator",
        &[
            "K[-]", "gamma[W]", "t[1/W]", "M[-]", "I_ref[-]", "half_sqrt_D[-]", "I_gc_exact[-]",
            "D[-]", "a00_sq[-]", "a00_sq_min_5_20[-]",
        ],
    );
    for p in cfg.default_setups() {
        let (q, bath, states) = bath_states(ctx, &p)?;
        let t_eval = cfg.time.at / p.gamma;
        let row = propagate_row(&q, 0, t_eval)?;
        let r = indicator_ref_bath(&states, &q, &row)?;
        let center = thermal_state(&bath, 1.0 / p.t_mid, p.n as f64)?;
        let exact = indicator_gc_bath_exact(&q, &center, &row);
        t.push(row![
            p.k, p.gamma, t_eval, states.len(), r.value, r.bound.unwrap_or(f64::NAN), exact.value,
            localization_coefficient(&row), row.amps[0].norm_sqr(), a00_floor(&q, p.gamma, 301)?
        ]);
    }
    Ok(vec![t])
}
