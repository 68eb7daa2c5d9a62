//! Bath prepared in an eigenstate of its own Hamiltonian, system level in an
//! arbitrary state, coupling switched on at `t = 0`.
//!
//! The initial basis is the uncoupled level basis, so `a(0) = 1` and the bath
//! modes are the bath levels `1..K` themselves.

use alloc::vec::Vec;

use crate::dynamics::{AmplitudeRow, QuenchPair};
use crate::ensemble::{OccupationVector, ReferenceEnsemble};
use crate::error::{Error, Result};
use crate::model::{build_resonant_level, SetupParams, Spectrum};
use crate::observables::{IndicatorKind, IndicatorReport};

/// Spectrum of the `K - 1` uncoupled bath levels (already ascending).
pub fn bath_spectrum(params: &SetupParams) -> Result<Spectrum> {
    params.validate()?;
    Ok(Spectrum::uncoupled(&params.bath_levels()))
}

/// Switch-on quench into the coupled resonant-level Hamiltonian of `params`.
pub fn bath_quench(params: &SetupParams) -> Result<QuenchPair> {
    QuenchPair::switch_on(&build_resonant_level(params)?)
}

/// Half filling of the bath, `(K - 1) / 2` rounded down.
pub fn default_bath_particles(params: &SetupParams) -> usize {
    (params.k - 1) / 2
}

#[derive(Debug, Clone, PartialEq)]
pub struct BathInitialState {
    /// Initial system occupancy.
    pub p0_init: f64,
    /// Occupations of bath levels `1..K`, bath level `k` at bit `k - 1`.
    pub bath_occ: OccupationVector,
    /// Grand-canonical state of the bath matched to this eigenstate.
    pub reference: ReferenceEnsemble,
}

impl BathInitialState {
    pub fn new(p0_init: f64, bath_occ: OccupationVector, reference: ReferenceEnsemble) -> Result<Self> {
        if !(0.0..=1.0).contains(&p0_init) {
            return Err(Error::InvalidParams(alloc::format!(
                "initial system occupancy {} outside [0, 1]",
                p0_init
            )));
        }
        Ok(Self {
            p0_init,
            bath_occ,
            reference,
        })
    }

    /// Bath energy `sum_k eps_k n_k`.
    pub fn energy(&self, bath: &Spectrum) -> f64 {
        self.bath_occ.occupied().map(|l| bath.omega()[l]).sum()
    }
}

fn check_row(row: &AmplitudeRow, bath_len: usize) -> Result<()> {
    if row.k != 0 {
        return Err(Error::InvalidParams("bath-scenario observables use row 0".into()));
    }
    if row.amps.len() != bath_len + 1 {
        return Err(Error::LengthMismatch {
            expected: row.amps.len() - 1,
            found: bath_len,
        });
    }
    Ok(())
}

/// `D(t) = sum_{l >= 1} |a_0l(t)|^4`.
pub fn localization_coefficient(row: &AmplitudeRow) -> f64 {
    row.amps[1..].iter().map(|z| z.norm_sqr() * z.norm_sqr()).sum()
}

/// `<p_0(t)> = |a_00(t)|^2 p0_init + sum_{k >= 1} |a_0k(t)|^2 n_k`.
pub fn system_occupancy_bath_scenario(row: &AmplitudeRow, init: &BathInitialState) -> Result<f64> {
    check_row(row, init.bath_occ.len())?;
    let bath: f64 = init.bath_occ.occupied().map(|l| row.amps[l + 1].norm_sqr()).sum();
    Ok(row.amps[0].norm_sqr() * init.p0_init + bath)
}

/// `<p_0(t)>` for the grand-canonical bath `reference`; `levels` are the
/// uncoupled level energies `(eps_0, eps_1, ...)`.
pub fn system_occupancy_bath_reference(
    row: &AmplitudeRow,
    levels: &[f64],
    reference: &ReferenceEnsemble,
    p0_init: f64,
) -> f64 {
    let bath: f64 = row.amps[1..]
        .iter()
        .zip(&levels[1..])
        .map(|(z, &e)| z.norm_sqr() * reference.occupation(e))
        .sum();
    row.amps[0].norm_sqr() * p0_init + bath
}

/// Reference indicator of `<p_0(t)>` over bath eigenstates, with bound field
/// `sqrt(D(t)) / 2`.
pub fn indicator_ref_bath(samples: &[BathInitialState], q: &QuenchPair, row: &AmplitudeRow) -> Result<IndicatorReport> {
    let first = samples.first().ok_or(Error::EmptySamples)?;
    let n_b = first.bath_occ.count();
    if samples
        .iter()
        .any(|s| s.bath_occ.count() != n_b || s.p0_init != first.p0_init)
    {
        return Err(Error::InvalidParams(
            "bath samples must share particle number and initial system occupancy".into(),
        ));
    }
    let levels = q.initial().omega();
    let mut sum = 0.0;
    for s in samples {
        let d = system_occupancy_bath_scenario(row, s)?
            - system_occupancy_bath_reference(row, levels, &s.reference, s.p0_init);
        sum += d * d;
    }
    Ok(IndicatorReport {
        value: libm::sqrt(sum / samples.len() as f64),
        kind: IndicatorKind::Reference,
        k: 0,
        m: samples.len(),
        bound: Some(0.5 * libm::sqrt(localization_coefficient(row))),
    })
}

/// Exact grand-canonical indicator `sqrt(sum_{k >= 1} |a_0k(t)|^4 f_k (1 - f_k))`.
/// The system's initial occupancy does not contribute.
pub fn indicator_gc_bath_exact(q: &QuenchPair, reference: &ReferenceEnsemble, row: &AmplitudeRow) -> IndicatorReport {
    let levels = q.initial().omega();
    let var: f64 = row.amps[1..]
        .iter()
        .zip(&levels[1..])
        .map(|(z, &e)| z.norm_sqr() * z.norm_sqr() * reference.occupation_variance(e))
        .sum();
    IndicatorReport {
        value: libm::sqrt(var),
        kind: IndicatorKind::GrandCanonicalExact,
        k: 0,
        m: 0,
        bound: Some(0.5 * libm::sqrt(localization_coefficient(row))),
    }
}

/// Bath level occupancies `<p_k(t)>`, `k >= 1`, for one initial state, from
/// the full amplitude matrix.
pub fn bath_occupancies(
    a_t: &crate::dynamics::AmplitudeMatrix,
    init: &BathInitialState,
) -> Result<Vec<f64>> {
    let k = a_t.len();
    if init.bath_occ.len() + 1 != k {
        return Err(Error::LengthMismatch {
            expected: k - 1,
            found: init.bath_occ.len(),
        });
    }
    Ok((1..k)
        .map(|i| {
            let row = a_t.a.row(i);
            row[0].norm_sqr() * init.p0_init
                + init.bath_occ.occupied().map(|l| row[l + 1].norm_sqr()).sum::<f64>()
        })
        .collect())
}
