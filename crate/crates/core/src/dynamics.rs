//! Sudden quenches `H -> H'`: exact amplitude propagation through the final
//! eigenbasis, time-dependent occupancies, and infinite-time statistics of the
//! system occupancy.
//!
//! With `a` the initial transform and `b` the final one, `G = a^T b` and
//! `a(t) = e^{iH't} a = b diag(e^{i nu t}) G^T`.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::ensemble::{OccupationVector, ReferenceEnsemble, SampledEigenstate};
use crate::error::{Error, Result};
use crate::model::{diagonalize, min_gap, SingleParticleHamiltonian, Spectrum};
use crate::observables::{IndicatorKind, IndicatorReport};

/// Default nondegeneracy tolerance for the final spectrum, in units of `W`.
pub const DEGENERACY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct QuenchPair {
    initial: Spectrum,
    final_: Spectrum,
    /// `G[(n, m)]`: overlap of initial mode `n` with final mode `m`.
    overlap: DMatrix<f64>,
    /// `b_0m^2`.
    weights: Vec<f64>,
    /// `P = G diag(b_0^2) G^T`, the system projector in the initial mode basis
    /// after dephasing.
    projector: DMatrix<f64>,
    degeneracy_tol: f64,
}

impl QuenchPair {
    pub fn from_spectra(initial: Spectrum, final_: Spectrum) -> Result<Self> {
        if initial.len() != final_.len() {
            return Err(Error::LengthMismatch {
                expected: initial.len(),
                found: final_.len(),
            });
        }
        let overlap = initial.transform().transpose() * final_.transform();
        let weights: Vec<f64> = (0..final_.len())
            .map(|m| final_.amplitude(0, m) * final_.amplitude(0, m))
            .collect();
        let mut scaled = overlap.clone();
        for (m, &w) in weights.iter().enumerate() {
            scaled.column_mut(m).scale_mut(w);
        }
        let projector = scaled * overlap.transpose();
        Ok(Self {
            initial,
            final_,
            overlap,
            weights,
            projector,
            degeneracy_tol: DEGENERACY_TOLERANCE,
        })
    }

    /// Quench between two Hamiltonians of equal size.
    pub fn new(h_initial: &SingleParticleHamiltonian, h_final: &SingleParticleHamiltonian) -> Result<Self> {
        Self::from_spectra(diagonalize(h_initial)?, diagonalize(h_final)?)
    }

    /// Coupling switched on at `t = 0`: the initial basis is the uncoupled
    /// level basis (`a = 1`, `omega_k = eps_k` in level order).
    pub fn switch_on(h_final: &SingleParticleHamiltonian) -> Result<Self> {
        Self::from_spectra(Spectrum::uncoupled(h_final.levels()), diagonalize(h_final)?)
    }

    pub fn with_degeneracy_tolerance(mut self, tol: f64) -> Self {
        self.degeneracy_tol = tol;
        self
    }

    pub fn initial(&self) -> &Spectrum {
        &self.initial
    }

    pub fn final_spectrum(&self) -> &Spectrum {
        &self.final_
    }

    pub fn overlap(&self) -> &DMatrix<f64> {
        &self.overlap
    }

    pub fn len(&self) -> usize {
        self.initial.len()
    }

    pub fn is_empty(&self) -> bool {
        self.initial.is_empty()
    }

    /// Largest entry of `|G^T G - I|`.
    pub fn overlap_orthogonality_residual(&self) -> f64 {
        let g = self.overlap.transpose() * &self.overlap;
        let mut worst: f64 = 0.0;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max(libm::fabs(g[(i, j)] - target));
            }
        }
        worst
    }

    /// Fails if two final eigenvalues are closer than the degeneracy tolerance.
    pub fn check_nondegenerate(&self) -> Result<()> {
        let gap = min_gap(&self.final_);
        if gap > self.degeneracy_tol {
            Ok(())
        } else {
            Err(Error::Degenerate {
                gap,
                tol: self.degeneracy_tol,
            })
        }
    }

    fn phased_row(&self, k: usize, t: f64) -> Vec<Complex64> {
        let b = self.final_.transform();
        self.final_
            .omega()
            .iter()
            .enumerate()
            .map(|(m, &nu)| {
                let (s, c) = libm::sincos(nu * t);
                Complex64::new(b[(k, m)] * c, b[(k, m)] * s)
            })
            .collect()
    }

    fn check_occ(&self, occ: &OccupationVector) -> Result<()> {
        if occ.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: occ.len(),
            });
        }
        Ok(())
    }
}

/// `a_kl(t)` for all levels `k` and initial modes `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeMatrix {
    pub t: f64,
    pub a: DMatrix<Complex64>,
}

impl AmplitudeMatrix {
    pub fn len(&self) -> usize {
        self.a.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.a.nrows() == 0
    }

    pub fn row(&self, k: usize) -> AmplitudeRow {
        AmplitudeRow {
            t: self.t,
            k,
            amps: self.a.row(k).iter().copied().collect(),
        }
    }

    /// Largest entry of `|a^dagger a - I|`.
    pub fn unitarity_residual(&self) -> f64 {
        let g = self.a.adjoint() * &self.a;
        let mut worst: f64 = 0.0;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).norm());
            }
        }
        worst
    }
}

/// A single row `a_k.(t)`; enough for every system-level observable.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeRow {
    pub t: f64,
    pub k: usize,
    pub amps: Vec<Complex64>,
}

impl AmplitudeRow {
    /// `|a_kl(t)|^2`.
    pub fn weights(&self) -> Vec<f64> {
        self.amps.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn occupancy(&self, occ: &OccupationVector) -> Result<f64> {
        if occ.len() != self.amps.len() {
            return Err(Error::LengthMismatch {
                expected: self.amps.len(),
                found: occ.len(),
            });
        }
        Ok(occ.occupied().map(|l| self.amps[l].norm_sqr()).sum())
    }

    /// `sum_l |a_kl(t)|^2 f(beta (omega_l - mu))` for initial energies `omega`.
    pub fn thermal_occupancy(&self, omega: &[f64], reference: &ReferenceEnsemble) -> f64 {
        self.amps
            .iter()
            .zip(omega)
            .map(|(z, &w)| z.norm_sqr() * reference.occupation(w))
            .sum()
    }

    pub fn ipr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr() * z.norm_sqr()).sum()
    }
}

/// Full `a(t)` in `O(K^3)`; `a(0)` is the initial transform exactly.
pub fn propagate_amplitudes(q: &QuenchPair, t: f64) -> AmplitudeMatrix {
    if t == 0.0 {
        return AmplitudeMatrix {
            t,
            a: q.initial.transform().map(|x| Complex64::new(x, 0.0)),
        };
    }
    let b = q.final_.transform();
    let k = q.len();
    let mut cos_b = b.clone();
    let mut sin_b = b.clone();
    for (m, &nu) in q.final_.omega().iter().enumerate() {
        let (s, c) = libm::sincos(nu * t);
        cos_b.column_mut(m).scale_mut(c);
        sin_b.column_mut(m).scale_mut(s);
    }
    let gt = q.overlap.transpose();
    let re = cos_b * &gt;
    let im = sin_b * &gt;
    AmplitudeMatrix {
        t,
        a: DMatrix::from_fn(k, k, |i, j| Complex64::new(re[(i, j)], im[(i, j)])),
    }
}

/// Row `k` of `a(t)` in `O(K^2)`.
pub fn propagate_row(q: &QuenchPair, k: usize, t: f64) -> Result<AmplitudeRow> {
    if k >= q.len() {
        return Err(Error::IndexOutOfRange { index: k, size: q.len() });
    }
    if t == 0.0 {
        let amps = (0..q.len())
            .map(|l| Complex64::new(q.initial.amplitude(k, l), 0.0))
            .collect();
        return Ok(AmplitudeRow { t, k, amps });
    }
    let c = q.phased_row(k, t);
    let amps = (0..q.len())
        .map(|l| {
            q.overlap
                .row(l)
                .iter()
                .zip(&c)
                .fold(Complex64::new(0.0, 0.0), |acc, (&g, &z)| acc + z * g)
        })
        .collect();
    Ok(AmplitudeRow { t, k, amps })
}

/// `<p_k(t)> = sum_l |a_kl(t)|^2 n_l` for every level.
pub fn occupancy_t(a_t: &AmplitudeMatrix, occ: &OccupationVector) -> Result<Vec<f64>> {
    if occ.len() != a_t.len() {
        return Err(Error::LengthMismatch {
            expected: a_t.len(),
            found: occ.len(),
        });
    }
    let mut p = alloc::vec![0.0; a_t.len()];
    for l in occ.occupied() {
        for (pk, z) in p.iter_mut().zip(a_t.a.column(l).iter()) {
            *pk += z.norm_sqr();
        }
    }
    Ok(p)
}

/// `IPR_k(t) = sum_l |a_kl(t)|^4`.
pub fn ipr_t(a_t: &AmplitudeMatrix, k: usize) -> f64 {
    a_t.a.row(k).iter().map(|z| z.norm_sqr() * z.norm_sqr()).sum()
}

/// `<f_l^dagger f_m>` of final modes in an initial eigenstate.
pub fn mode_correlator(q: &QuenchPair, occ: &OccupationVector, l: usize, m: usize) -> Result<f64> {
    q.check_occ(occ)?;
    for idx in [l, m] {
        if idx >= q.len() {
            return Err(Error::IndexOutOfRange { index: idx, size: q.len() });
        }
    }
    Ok(occ
        .occupied()
        .map(|n| q.overlap[(n, l)] * q.overlap[(n, m)])
        .sum())
}

fn mode_diagonal(q: &QuenchPair, occ: &OccupationVector) -> Vec<f64> {
    let mut c = alloc::vec![0.0; q.len()];
    for n in occ.occupied() {
        for (cm, &g) in c.iter_mut().zip(q.overlap.row(n).iter()) {
            *cm += g * g;
        }
    }
    c
}

/// Infinite-time average of `<p_0(t)>`: `sum_m b_0m^2 <f_m^dagger f_m>`.
pub fn time_averaged_occupancy(q: &QuenchPair, occ: &OccupationVector) -> Result<f64> {
    q.check_nondegenerate()?;
    q.check_occ(occ)?;
    Ok(mode_diagonal(q, occ)
        .iter()
        .zip(&q.weights)
        .map(|(c, w)| c * w)
        .sum())
}

/// Temporal standard deviation of `<p_0(t)>` around its infinite-time average,
/// `sqrt(sum_{l != m} b_0l^2 b_0m^2 <f_l^dagger f_m>^2)`.
pub fn temporal_std(q: &QuenchPair, occ: &OccupationVector) -> Result<f64> {
    q.check_nondegenerate()?;
    q.check_occ(occ)?;
    let modes: Vec<usize> = occ.occupied().collect();
    let mut all = 0.0;
    for &n in &modes {
        for &n2 in &modes {
            let p = q.projector[(n, n2)];
            all += p * p;
        }
    }
    let diag: f64 = mode_diagonal(q, occ)
        .iter()
        .zip(&q.weights)
        .map(|(c, w)| (w * c) * (w * c))
        .sum();
    Ok(libm::sqrt((all - diag).max(0.0)))
}

/// Thermal system occupancy of the final Hamiltonian at the reference
/// `(beta, mu)` of the initial one: `sum_m b_0m^2 f(beta (nu_m - mu))`.
pub fn final_thermal_occupancy(q: &QuenchPair, reference: &ReferenceEnsemble) -> f64 {
    q.final_
        .omega()
        .iter()
        .zip(&q.weights)
        .map(|(&nu, w)| w * reference.occupation(nu))
        .sum()
}

/// Reference indicator of the infinite-time averages against the final-
/// Hamiltonian thermal occupancy at each sample's own `(beta_i, mu_i)`.
pub fn infinite_time_indicator(samples: &[SampledEigenstate], q: &QuenchPair) -> Result<IndicatorReport> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut sum = 0.0;
    for s in samples {
        let d = time_averaged_occupancy(q, &s.occ)? - final_thermal_occupancy(q, &s.reference);
        sum += d * d;
    }
    Ok(IndicatorReport {
        value: libm::sqrt(sum / samples.len() as f64),
        kind: IndicatorKind::ReferenceInfiniteTime,
        k: 0,
        m: samples.len(),
        bound: None,
    })
}

/// Mean of `temporal_std` over the samples.
pub fn sigma_av(samples: &[SampledEigenstate], q: &QuenchPair) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut sum = 0.0;
    for s in samples {
        sum += temporal_std(q, &s.occ)?;
    }
    Ok(sum / samples.len() as f64)
}

/// Reference indicator of `<p_k(t)>` from a propagated row: each sample is
/// compared with its reference state evolved under the same quench. The bound
/// field is `sqrt(IPR_k(t)) / 2`.
pub fn indicator_ref_t(samples: &[SampledEigenstate], q: &QuenchPair, row: &AmplitudeRow) -> Result<IndicatorReport> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let omega = q.initial.omega();
    let mut sum = 0.0;
    for s in samples {
        let d = row.occupancy(&s.occ)? - row.thermal_occupancy(omega, &s.reference);
        sum += d * d;
    }
    Ok(IndicatorReport {
        value: libm::sqrt(sum / samples.len() as f64),
        kind: IndicatorKind::Reference,
        k: row.k,
        m: samples.len(),
        bound: Some(0.5 * libm::sqrt(row.ipr())),
    })
}

/// Time grid over `[0, 12/gamma]` with `points` entries: `t = 0`, a geometric
/// stretch from `0.01/gamma` to `1/gamma` on a sixth of the points, then a
/// linear stretch to `12/gamma`.
pub fn time_grid(gamma: f64, points: usize) -> Result<Vec<f64>> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParams(alloc::format!("gamma = {} must be positive", gamma)));
    }
    if points < 8 {
        return Err(Error::InvalidParams(alloc::format!("{} time points is too few", points)));
    }
    let geometric = points / 6;
    let linear = points - 1 - geometric;
    let mut t = Vec::with_capacity(points);
    t.push(0.0);
    let (g_lo, g_hi) = (0.01 / gamma, 1.0 / gamma);
    for i in 0..geometric {
        let x = i as f64 / (geometric - 1) as f64;
        t.push(g_lo * libm::pow(g_hi / g_lo, x));
    }
    let end = 12.0 / gamma;
    for i in 1..=linear {
        t.push(g_hi + (end - g_hi) * i as f64 / linear as f64);
    }
    Ok(t)
}
