//! Grand-canonical reference states matched to a target energy and particle
//! number.
//!
//! The chemical potential enters every formula through `eta = beta * mu`, so
//! the particle-number sum `sum_l f(beta omega_l - eta)` is strictly increasing
//! in `eta` for every real `beta`, including zero and negative values. The
//! energy at fixed mean particle number is strictly decreasing in `beta`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fermi::{bracketed_newton, fermi, fermi_variance};
use crate::model::Spectrum;

/// Iteration cap for each scalar solve.
pub const MAX_SOLVE_ITERATIONS: usize = 200;
/// Absolute tolerance on the particle-number residual.
pub const PARTICLE_TOLERANCE: f64 = 1e-10;
/// Tolerance on the energy residual, relative to the spectrum's energy scale.
pub const ENERGY_TOLERANCE: f64 = 1e-10;

/// Grand-canonical state `exp[-beta (H - mu N)] / Z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceEnsemble {
    beta: f64,
    mu: f64,
    eta: f64,
    temperature: f64,
}

impl ReferenceEnsemble {
    pub fn new(beta: f64, mu: f64) -> Self {
        Self {
            beta,
            mu,
            eta: beta * mu,
            temperature: 1.0 / beta,
        }
    }

    fn from_log_fugacity(beta: f64, eta: f64, mu: f64) -> Self {
        Self {
            beta,
            mu,
            eta,
            temperature: 1.0 / beta,
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `1 / beta`; infinite at `beta = 0`, negative above the infinite-temperature energy.
    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// `beta * mu`, finite even where `mu` alone is not.
    pub fn log_fugacity(&self) -> f64 {
        self.eta
    }

    /// Fermi-Dirac occupation of a mode at energy `omega`.
    #[inline]
    pub fn occupation(&self, omega: f64) -> f64 {
        fermi(self.beta * omega - self.eta)
    }

    #[inline]
    pub fn occupation_variance(&self, omega: f64) -> f64 {
        fermi_variance(self.beta * omega - self.eta)
    }

    pub fn particle_number(&self, omega: &[f64]) -> f64 {
        omega.iter().map(|&w| self.occupation(w)).sum()
    }

    pub fn energy(&self, omega: &[f64]) -> f64 {
        omega.iter().map(|&w| w * self.occupation(w)).sum()
    }
}

/// `f(beta (omega_l - mu))` for every mode.
pub fn grand_canonical_occupations(s: &Spectrum, reference: &ReferenceEnsemble) -> Vec<f64> {
    s.omega().iter().map(|&w| reference.occupation(w)).collect()
}

/// Smallest and largest energy reachable with (possibly fractional) mean
/// particle number `n`.
pub fn energy_bounds(omega: &[f64], n: f64) -> (f64, f64) {
    let mut sorted = omega.to_vec();
    sorted.sort_by(f64::total_cmp);
    let fill = |levels: &mut dyn Iterator<Item = f64>| {
        let mut left = n;
        let mut e = 0.0;
        for w in levels {
            if left <= 0.0 {
                break;
            }
            let take = left.min(1.0);
            e += take * w;
            left -= take;
        }
        e
    };
    let lo = fill(&mut sorted.iter().copied());
    let hi = fill(&mut sorted.iter().rev().copied());
    (lo, hi)
}

fn energy_scale(omega: &[f64]) -> f64 {
    omega.iter().fold(0.0_f64, |m, w| m.max(libm::fabs(*w))).max(1e-300)
}

/// Solves `sum_l f(beta omega_l - eta) = n` for `eta`. Returns `(eta, residual)`.
fn solve_log_fugacity(omega: &[f64], beta: f64, n: f64) -> (f64, f64) {
    let k = omega.len() as f64;
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &w in omega {
        x_min = x_min.min(beta * w);
        x_max = x_max.max(beta * w);
    }
    let margin = 40.0 + libm::log(k.max(1.0));
    let outcome = bracketed_newton(
        |eta| {
            let mut count = 0.0;
            let mut slope = 0.0;
            for &w in omega {
                let x = beta * w - eta;
                count += fermi(x);
                slope += fermi_variance(x);
            }
            (count - n, slope)
        },
        x_min - margin,
        x_max + margin,
        1e-13 * k.max(1.0),
        MAX_SOLVE_ITERATIONS,
    );
    (outcome.x, outcome.residual)
}

struct EnergyPoint {
    eta: f64,
    energy: f64,
    slope: f64,
}

fn energy_at(omega: &[f64], beta: f64, n: f64) -> EnergyPoint {
    let (eta, _) = solve_log_fugacity(omega, beta, n);
    let (mut e, mut sg, mut swg, mut sw2g) = (0.0, 0.0, 0.0, 0.0);
    for &w in omega {
        let x = beta * w - eta;
        let g = fermi_variance(x);
        e += w * fermi(x);
        sg += g;
        swg += w * g;
        sw2g += w * w * g;
    }
    let slope = if sg > 0.0 { -(sw2g - swg * swg / sg) } else { 0.0 };
    EnergyPoint { eta, energy: e, slope }
}

fn chemical_potential(omega: &[f64], beta: f64, eta: f64, n: f64) -> f64 {
    if beta != 0.0 {
        return eta / beta;
    }
    let k = omega.len() as f64;
    if libm::fabs(n - 0.5 * k) < 1e-9 {
        // Limit beta -> 0 at half filling: mu tends to the mean mode energy.
        omega.iter().sum::<f64>() / k
    } else if n > 0.5 * k {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    }
}

/// Grand-canonical state at inverse temperature `beta` whose mean particle
/// number is `n`.
pub fn thermal_state(s: &Spectrum, beta: f64, n: f64) -> Result<ReferenceEnsemble> {
    let omega = s.omega();
    check_filling(omega.len(), n)?;
    let (eta, residual) = solve_log_fugacity(omega, beta, n);
    if !(libm::fabs(residual) < PARTICLE_TOLERANCE) {
        return Err(Error::NonConvergence {
            iterations: MAX_SOLVE_ITERATIONS,
            residual_n: residual,
            residual_e: 0.0,
        });
    }
    Ok(ReferenceEnsemble::from_log_fugacity(
        beta,
        eta,
        chemical_potential(omega, beta, eta, n),
    ))
}

fn check_filling(k: usize, n: f64) -> Result<()> {
    if !(n > 0.0 && n < k as f64) {
        return Err(Error::InvalidParams(alloc::format!(
            "particle number {} must lie strictly between 0 and {}",
            n, k
        )));
    }
    Ok(())
}

/// Solves for `(beta, mu)` such that the grand-canonical state has mean energy
/// `e` and mean particle number `n`; `n` may be fractional.
pub fn solve_thermal(s: &Spectrum, e: f64, n: f64) -> Result<ReferenceEnsemble> {
    let omega = s.omega();
    check_filling(omega.len(), n)?;
    let (e_min, e_max) = energy_bounds(omega, n);
    if !(e > e_min && e < e_max) {
        return Err(Error::EnergyOutOfRange {
            energy: e,
            min: e_min,
            max: e_max,
        });
    }
    let scale = energy_scale(omega);
    let spread = (e_max - e_min).max(1e-300) / n.min(omega.len() as f64 - n).max(1.0);
    let tol = 1e-13 * scale;

    let at_zero = energy_at(omega, 0.0, n);
    let beta = if libm::fabs(at_zero.energy - e) <= tol {
        0.0
    } else {
        // E(beta) is decreasing: positive beta below the infinite-temperature energy.
        let direction = if e < at_zero.energy { 1.0 } else { -1.0 };
        let mut far = direction / spread;
        let mut doublings = 0;
        loop {
            let p = energy_at(omega, far, n);
            if (p.energy - e) * direction < 0.0 {
                break;
            }
            far *= 2.0;
            doublings += 1;
            if doublings > MAX_SOLVE_ITERATIONS {
                return Err(Error::NonConvergence {
                    iterations: doublings,
                    residual_n: 0.0,
                    residual_e: p.energy - e,
                });
            }
        }
        let outcome = bracketed_newton(
            |b| {
                let p = energy_at(omega, b, n);
                (p.energy - e, p.slope)
            },
            0.0,
            far,
            tol,
            MAX_SOLVE_ITERATIONS,
        );
        outcome.x
    };

    let point = energy_at(omega, beta, n);
    let reference = ReferenceEnsemble::from_log_fugacity(
        beta,
        point.eta,
        chemical_potential(omega, beta, point.eta, n),
    );
    let residual_n = reference.particle_number(omega) - n;
    let residual_e = reference.energy(omega) - e;
    if libm::fabs(residual_n) < PARTICLE_TOLERANCE
        && libm::fabs(residual_e) < ENERGY_TOLERANCE * scale.max(1.0)
    {
        Ok(reference)
    } else {
        Err(Error::NonConvergence {
            iterations: MAX_SOLVE_ITERATIONS,
            residual_n,
            residual_e,
        })
    }
}

/// Reference state for an eigenstate of energy `e` holding `n` particles.
pub fn solve_reference(s: &Spectrum, e: f64, n: usize) -> Result<ReferenceEnsemble> {
    solve_thermal(s, e, n as f64)
}

/// Closed energy interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyWindow {
    pub lo: f64,
    pub hi: f64,
}

impl EnergyWindow {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    #[inline]
    pub fn contains(&self, e: f64) -> bool {
        e >= self.lo && e <= self.hi
    }
}

/// Energies of the fixed-`n` thermal states at `t_lo` and `t_hi`. Because the
/// energy grows monotonically with temperature, an eigenstate's reference
/// temperature lies in `[t_lo, t_hi]` exactly when its energy lies in the
/// returned window.
pub fn energy_window_for_temperature(
    s: &Spectrum,
    n: usize,
    t_lo: f64,
    t_hi: f64,
) -> Result<EnergyWindow> {
    if !(t_lo > 0.0 && t_hi >= t_lo) {
        return Err(Error::InvalidParams(alloc::format!(
            "temperature window [{}, {}] must be positive and ordered",
            t_lo, t_hi
        )));
    }
    let lo = thermal_state(s, 1.0 / t_lo, n as f64)?.energy(s.omega());
    let hi = if t_hi == t_lo {
        lo
    } else {
        thermal_state(s, 1.0 / t_hi, n as f64)?.energy(s.omega())
    };
    Ok(EnergyWindow::new(lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_custom, build_resonant_level, diagonalize, SetupParams};

    fn symmetric_spectrum(k: usize) -> Spectrum {
        let p = SetupParams {
            k,
            eps0: 0.0,
            gamma: 0.1,
            n: k / 2,
            ..SetupParams::default()
        };
        diagonalize(&build_resonant_level(&p).unwrap()).unwrap()
    }

    #[test]
    fn occupations_limits() {
        let s = symmetric_spectrum(10);
        let hot = grand_canonical_occupations(&s, &ReferenceEnsemble::new(0.0, 0.3));
        assert!(hot.iter().all(|&f| f == 0.5));
        let mu = 0.5 * (s.omega()[4] + s.omega()[5]);
        let cold = grand_canonical_occupations(&s, &ReferenceEnsemble::new(1e6, mu));
        assert!(cold[..5].iter().all(|&f| f == 1.0));
        assert!(cold[5..].iter().all(|&f| f == 0.0));
        let r = ReferenceEnsemble::new(2.0, 0.0);
        assert!((r.occupation(0.5) - 0.268_941_421_369_995_1).abs() < 1e-15);
        // |beta (omega - mu)| far beyond exp overflow stays finite.
        let f = ReferenceEnsemble::new(1e4, 0.0).occupation(-0.5);
        assert_eq!(f, 1.0);
    }

    #[test]
    fn particle_hole_symmetric_infinite_temperature() {
        let s = symmetric_spectrum(12);
        let mean: f64 = s.omega().iter().sum::<f64>() * 0.5;
        let r = solve_reference(&s, mean, 6).unwrap();
        assert!(r.beta().abs() < 1e-8, "beta = {}", r.beta());
        assert!(r.mu().abs() < 1e-8, "mu = {}", r.mu());
    }

    #[test]
    fn ground_state_limit_drives_beta_up() {
        let s = symmetric_spectrum(10);
        let (e_min, _) = energy_bounds(s.omega(), 5.0);
        let mut last = 0.0;
        for gap in [1e-1, 1e-2, 1e-3] {
            let r = solve_reference(&s, e_min + gap, 5).unwrap();
            assert!(r.beta() > last);
            last = r.beta();
        }
        assert!(last > 10.0);
    }

    #[test]
    fn negative_temperature_is_returned() {
        let s = symmetric_spectrum(10);
        let (_, e_max) = energy_bounds(s.omega(), 5.0);
        let r = solve_reference(&s, e_max - 0.05, 5).unwrap();
        assert!(r.beta() < 0.0);
        assert!((r.particle_number(s.omega()) - 5.0).abs() < 1e-10);
    }

    #[test]
    fn round_trip_recovers_beta_mu() {
        let levels = [0.13, -0.41, -0.27, -0.05, 0.08, 0.22, 0.39, 0.47];
        let couplings = [0.11, 0.07, 0.15, 0.09, 0.12, 0.05, 0.1];
        let s = diagonalize(&build_custom(&levels, &couplings).unwrap()).unwrap();
        let truth = ReferenceEnsemble::new(2.0, 0.1);
        let e = truth.energy(s.omega());
        let n = truth.particle_number(s.omega());
        let r = solve_thermal(&s, e, n).unwrap();
        assert!((r.beta() - 2.0).abs() < 1e-8, "beta {}", r.beta());
        assert!((r.mu() - 0.1).abs() < 1e-8, "mu {}", r.mu());
    }

    #[test]
    fn range_errors() {
        let s = symmetric_spectrum(6);
        let (lo, hi) = energy_bounds(s.omega(), 3.0);
        assert!(matches!(solve_reference(&s, lo, 3), Err(Error::EnergyOutOfRange { .. })));
        assert!(matches!(solve_reference(&s, hi + 1.0, 3), Err(Error::EnergyOutOfRange { .. })));
        assert!(matches!(solve_reference(&s, 0.0, 0), Err(Error::InvalidParams(_))));
        assert!(matches!(solve_reference(&s, 0.0, 6), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn window_is_monotone_in_temperature() {
        let s = symmetric_spectrum(40);
        let temps: Vec<f64> = (1..=20).map(|i| 0.05 * i as f64).collect();
        let energies: Vec<f64> = temps
            .iter()
            .map(|&t| energy_window_for_temperature(&s, 20, t, t).unwrap().lo)
            .collect();
        for w in energies.windows(2) {
            assert!(w[1] > w[0]);
        }
        let flat = energy_window_for_temperature(&s, 20, 0.3, 0.3).unwrap();
        assert_eq!(flat.lo, flat.hi);
        assert!(energy_window_for_temperature(&s, 20, 0.0, 0.3).is_err());
    }
}
