//! Level occupancies, inverse participation ratios, equilibrium bands and the
//! eigenstate-thermalization indicators built on them.

use alloc::vec::Vec;

use crate::ensemble::{thermal_state, OccupationVector, ReferenceEnsemble, SampledEigenstate};
use crate::error::{Error, Result};
use crate::model::Spectrum;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndicatorKind {
    /// RMS deviation of sampled eigenstates from their own reference states.
    Reference,
    /// Closed-form grand-canonical standard deviation.
    GrandCanonicalExact,
    /// Reference indicator of infinite-time averages after a quench.
    ReferenceInfiniteTime,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndicatorReport {
    pub value: f64,
    pub kind: IndicatorKind,
    /// Level index the indicator refers to.
    pub k: usize,
    /// Number of samples used; 0 for exact kinds.
    pub m: usize,
    /// Companion bound (`sqrt(IPR)/2` or `sqrt(D)/2`) where one applies.
    pub bound: Option<f64>,
}

fn check_len(s: &Spectrum, occ: &OccupationVector) -> Result<()> {
    if occ.len() != s.len() {
        return Err(Error::LengthMismatch {
            expected: s.len(),
            found: occ.len(),
        });
    }
    Ok(())
}

fn check_level(s: &Spectrum, k: usize) -> Result<()> {
    if k >= s.len() {
        return Err(Error::IndexOutOfRange { index: k, size: s.len() });
    }
    Ok(())
}

/// `<p_k> = sum_l a_kl^2 n_l` for every level `k`.
pub fn occupancy_static(s: &Spectrum, occ: &OccupationVector) -> Result<Vec<f64>> {
    check_len(s, occ)?;
    let a = s.transform();
    let mut p = alloc::vec![0.0; s.len()];
    for l in occ.occupied() {
        let col = a.column(l);
        for (pk, &akl) in p.iter_mut().zip(col.iter()) {
            *pk += akl * akl;
        }
    }
    Ok(p)
}

/// `<p_k>` of a single level, `O(N)`.
pub fn occupancy_static_level(s: &Spectrum, occ: &OccupationVector, k: usize) -> Result<f64> {
    check_len(s, occ)?;
    check_level(s, k)?;
    Ok(occ
        .occupied()
        .map(|l| {
            let a = s.amplitude(k, l);
            a * a
        })
        .sum())
}

/// Grand-canonical `<p_k> = sum_l a_kl^2 f(beta (omega_l - mu))`.
pub fn occupancy_gc(s: &Spectrum, reference: &ReferenceEnsemble, k: usize) -> f64 {
    s.omega()
        .iter()
        .enumerate()
        .map(|(l, &w)| {
            let a = s.amplitude(k, l);
            a * a * reference.occupation(w)
        })
        .sum()
}

/// `IPR_k = sum_l a_kl^4`.
pub fn ipr(s: &Spectrum, k: usize) -> f64 {
    (0..s.len())
        .map(|l| {
            let a2 = s.amplitude(k, l) * s.amplitude(k, l);
            a2 * a2
        })
        .sum()
}

/// `sqrt((1/M) sum_i (<p_k>_i - <p_k>_gc,i)^2)` with each sample's own reference.
pub fn indicator_ref(samples: &[SampledEigenstate], s: &Spectrum, k: usize) -> Result<IndicatorReport> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    check_level(s, k)?;
    let mut sum = 0.0;
    for sample in samples {
        let d = occupancy_static_level(s, &sample.occ, k)? - occupancy_gc(s, &sample.reference, k);
        sum += d * d;
    }
    Ok(IndicatorReport {
        value: libm::sqrt(sum / samples.len() as f64),
        kind: IndicatorKind::Reference,
        k,
        m: samples.len(),
        bound: Some(0.5 * libm::sqrt(ipr(s, k))),
    })
}

/// Exact grand-canonical indicator `sqrt(sum_l a_kl^4 f_l (1 - f_l))`, bounded
/// by `sqrt(IPR_k) / 2`.
pub fn indicator_gc_exact(s: &Spectrum, reference: &ReferenceEnsemble, k: usize) -> IndicatorReport {
    let mut var = 0.0;
    let mut ipr_k = 0.0;
    for (l, &w) in s.omega().iter().enumerate() {
        let a2 = s.amplitude(k, l) * s.amplitude(k, l);
        var += a2 * a2 * reference.occupation_variance(w);
        ipr_k += a2 * a2;
    }
    IndicatorReport {
        value: libm::sqrt(var),
        kind: IndicatorKind::GrandCanonicalExact,
        k,
        m: 0,
        bound: Some(0.5 * libm::sqrt(ipr_k)),
    }
}

/// Chebyshev bound `IPR_k / (4 xi^2)` on the fraction of strongly deviating
/// eigenstates, clamped to `[0, 1]`.
pub fn chebyshev_bound(ipr_k: f64, xi: f64) -> Result<f64> {
    if !(xi > 0.0) {
        return Err(Error::InvalidParams(alloc::format!("xi = {} must be positive", xi)));
    }
    Ok((ipr_k / (4.0 * xi * xi)).clamp(0.0, 1.0))
}

/// Fraction of samples whose `<p_k>_i` deviates from the sample mean by at
/// least `xi`.
pub fn deviation_fraction(samples: &[SampledEigenstate], s: &Spectrum, k: usize, xi: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if !(xi > 0.0) {
        return Err(Error::InvalidParams(alloc::format!("xi = {} must be positive", xi)));
    }
    let values = samples
        .iter()
        .map(|x| occupancy_static_level(s, &x.occ, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(fraction_beyond(&values, xi))
}

pub(crate) fn fraction_beyond(values: &[f64], xi: f64) -> f64 {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let far = values.iter().filter(|&&v| libm::fabs(v - mean) >= xi).count();
    far as f64 / values.len() as f64
}

/// Range of equilibrium occupancies of level `k` across a temperature window
/// at fixed mean particle number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumBand {
    pub lo: f64,
    pub hi: f64,
    /// Whether the occupancy was monotone on a five-point temperature grid.
    pub monotone: bool,
}

pub fn equilibrium_band(s: &Spectrum, n: f64, t_lo: f64, t_hi: f64, k: usize) -> Result<EquilibriumBand> {
    check_level(s, k)?;
    if !(t_lo > 0.0 && t_hi >= t_lo) {
        return Err(Error::InvalidParams(alloc::format!(
            "temperature window [{}, {}] must be positive and ordered",
            t_lo, t_hi
        )));
    }
    let at = |t: f64| -> Result<f64> { Ok(occupancy_gc(s, &thermal_state(s, 1.0 / t, n)?, k)) };
    let grid = (0..5)
        .map(|i| at(t_lo + (t_hi - t_lo) * i as f64 / 4.0))
        .collect::<Result<Vec<_>>>()?;
    let rising = grid.windows(2).all(|w| w[1] >= w[0] - 1e-14);
    let falling = grid.windows(2).all(|w| w[1] <= w[0] + 1e-14);
    let (a, b) = (grid[0], grid[4]);
    Ok(EquilibriumBand {
        lo: a.min(b),
        hi: a.max(b),
        monotone: rising || falling,
    })
}
