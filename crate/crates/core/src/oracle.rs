//! Brute-force reference computations for tests: complete many-body
//! enumeration, Fock-space expectation values, and explicit Runge-Kutta
//! integration of the equations of motion. Deliberately naive and independent
//! of the spectral shortcuts used elsewhere.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dynamics::AmplitudeMatrix;
use crate::ensemble::{OccupationVector, ReferenceEnsemble};
use crate::error::{Error, Result};
use crate::model::{SingleParticleHamiltonian, Spectrum};

/// Largest mode count the enumeration accepts.
pub const ENUMERATION_CAP: usize = 14;

#[derive(Debug, Clone, PartialEq)]
pub struct EnumeratedState {
    pub occ: OccupationVector,
    pub energy: f64,
    pub particles: usize,
    /// Normalized Boltzmann weight `exp(-beta (E - mu N)) / Z`.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnumerationTable {
    pub states: Vec<EnumeratedState>,
    /// `ln Z` of the (grand-)canonical ensemble the weights belong to.
    pub log_partition: f64,
}

impl EnumerationTable {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// `sum_i w_i x_i`.
    pub fn mean<F: Fn(&EnumeratedState) -> f64>(&self, f: F) -> f64 {
        self.states.iter().map(|s| s.weight * f(s)).sum()
    }
}

/// Every many-body eigenstate (all `2^K`, or the `C(K, N)` with `N` particles),
/// weighted by `reference`.
pub fn enumerate(s: &Spectrum, filter: Option<usize>, reference: &ReferenceEnsemble) -> Result<EnumerationTable> {
    let k = s.len();
    if k > ENUMERATION_CAP {
        return Err(Error::EnumerationTooLarge {
            k,
            cap: ENUMERATION_CAP,
        });
    }
    let beta = reference.beta();
    let mu = reference.mu();
    let mut states = Vec::new();
    let mut log_w = Vec::new();
    for mask in 0u64..(1u64 << k) {
        let particles = mask.count_ones() as usize;
        if filter.map_or(false, |n| n != particles) {
            continue;
        }
        let mut energy = 0.0;
        for l in 0..k {
            if (mask >> l) & 1 == 1 {
                energy += s.omega()[l];
            }
        }
        // mu drops out at fixed N; skip it there so mu = inf is harmless
        let exponent = if filter.is_some() {
            -beta * energy
        } else {
            -beta * (energy - mu * particles as f64)
        };
        log_w.push(exponent);
        states.push(EnumeratedState {
            occ: OccupationVector::from_mask(k, mask),
            energy,
            particles,
            weight: 0.0,
        });
    }
    let peak = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = log_w.iter().map(|&x| libm::exp(x - peak)).sum();
    for (state, &x) in states.iter_mut().zip(&log_w) {
        state.weight = libm::exp(x - peak) / z;
    }
    Ok(EnumerationTable {
        states,
        log_partition: peak + libm::log(z),
    })
}

fn level_occupancy(s: &Spectrum, occ: &OccupationVector, k: usize) -> f64 {
    let mut p = 0.0;
    for l in 0..s.len() {
        if occ.get(l) {
            p += s.amplitude(k, l) * s.amplitude(k, l);
        }
    }
    p
}

/// Weighted mean of `<p_k>_i` over the table.
pub fn weighted_occupancy(table: &EnumerationTable, s: &Spectrum, k: usize) -> f64 {
    table.mean(|st| level_occupancy(s, &st.occ, k))
}

/// Weighted standard deviation of `<p_k>_i` over the table.
pub fn weighted_indicator(table: &EnumerationTable, s: &Spectrum, k: usize) -> f64 {
    let mean = weighted_occupancy(table, s, k);
    let var = table.mean(|st| {
        let d = level_occupancy(s, &st.occ, k) - mean;
        d * d
    });
    libm::sqrt(var)
}

/// Weight of states whose `<p_k>_i` deviates from the weighted mean by at least `xi`.
pub fn weighted_deviation_fraction(table: &EnumerationTable, s: &Spectrum, k: usize, xi: f64) -> f64 {
    let mean = weighted_occupancy(table, s, k);
    table
        .states
        .iter()
        .filter(|st| libm::fabs(level_occupancy(s, &st.occ, k) - mean) >= xi)
        .map(|st| st.weight)
        .sum()
}

/// A many-body state vector over the `2^K` Fock basis of the level operators
/// `c_k`, basis index bit `k` = occupation of level `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    k: usize,
    amps: Vec<f64>,
}

impl FockState {
    pub fn vacuum(k: usize) -> Result<Self> {
        if k > ENUMERATION_CAP {
            return Err(Error::EnumerationTooLarge {
                k,
                cap: ENUMERATION_CAP,
            });
        }
        let mut amps = alloc::vec![0.0; 1 << k];
        amps[0] = 1.0;
        Ok(Self { k, amps })
    }

    /// `prod_{l occupied} d_l^dagger |0>` with `d_l^dagger = sum_k a_kl c_k^dagger`.
    pub fn slater(s: &Spectrum, occ: &OccupationVector) -> Result<Self> {
        let mut psi = Self::vacuum(s.len())?;
        for l in 0..s.len() {
            if occ.get(l) {
                let column: Vec<f64> = (0..s.len()).map(|k| s.amplitude(k, l)).collect();
                psi = psi.create(&column);
            }
        }
        Ok(psi)
    }

    fn sign(state: usize, k: usize) -> f64 {
        // Jordan-Wigner string over levels below k
        if (state & ((1 << k) - 1)).count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// `sum_k u_k c_k^dagger |psi>`.
    pub fn create(&self, u: &[f64]) -> Self {
        let mut out = alloc::vec![0.0; self.amps.len()];
        for (state, &amp) in self.amps.iter().enumerate() {
            if amp == 0.0 {
                continue;
            }
            for (k, &uk) in u.iter().enumerate() {
                if state & (1 << k) == 0 {
                    out[state | (1 << k)] += Self::sign(state, k) * uk * amp;
                }
            }
        }
        Self { k: self.k, amps: out }
    }

    /// `c_k |psi>`.
    pub fn annihilate(&self, k: usize) -> Self {
        let mut out = alloc::vec![0.0; self.amps.len()];
        for (state, &amp) in self.amps.iter().enumerate() {
            if state & (1 << k) != 0 {
                out[state & !(1 << k)] += Self::sign(state, k) * amp;
            }
        }
        Self { k: self.k, amps: out }
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.dot(self)
    }

    /// `<psi| c_k^dagger c_k' |psi>` for all level pairs.
    pub fn one_body_density(&self) -> DMatrix<f64> {
        let lowered: Vec<Self> = (0..self.k).map(|k| self.annihilate(k)).collect();
        DMatrix::from_fn(self.k, self.k, |i, j| lowered[i].dot(&lowered[j]))
    }
}

/// `<f_l^dagger f_m>` in the initial eigenstate `occ`, computed in Fock space
/// with `f_m = sum_k b_km c_k`.
pub fn fock_mode_correlator(initial: &Spectrum, final_: &Spectrum, occ: &OccupationVector, l: usize, m: usize) -> Result<f64> {
    let rho = FockState::slater(initial, occ)?.one_body_density();
    let k = initial.len();
    let mut sum = 0.0;
    for i in 0..k {
        for j in 0..k {
            sum += final_.amplitude(i, l) * final_.amplitude(j, m) * rho[(i, j)];
        }
    }
    Ok(sum)
}

fn rk4<F>(mut y: DMatrix<Complex64>, t: f64, dt: f64, f: F) -> DMatrix<Complex64>
where
    F: Fn(&DMatrix<Complex64>) -> DMatrix<Complex64>,
{
    if t == 0.0 {
        return y;
    }
    let steps = libm::ceil(libm::fabs(t) / dt).max(1.0) as usize;
    let h = t / steps as f64;
    for _ in 0..steps {
        let k1 = f(&y);
        let k2 = f(&(&y + &k1 * Complex64::new(0.5 * h, 0.0)));
        let k3 = f(&(&y + &k2 * Complex64::new(0.5 * h, 0.0)));
        let k4 = f(&(&y + &k3 * Complex64::new(h, 0.0)));
        y += (k1 + (k2 + k3) * Complex64::new(2.0, 0.0) + k4) * Complex64::new(h / 6.0, 0.0);
    }
    y
}

fn complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Classic fourth-order Runge-Kutta integration of `da/dt = i H' a` from
/// `a(0) = initial.transform()`, with step at most `dt`.
pub fn ode_propagate(h_final: &SingleParticleHamiltonian, initial: &Spectrum, t: f64, dt: f64) -> Result<AmplitudeMatrix> {
    check_step(dt)?;
    let ih = complex(&h_final.to_dense()) * Complex64::new(0.0, 1.0);
    let a = rk4(complex(initial.transform()), t, dt, |y| &ih * y);
    Ok(AmplitudeMatrix { t, a })
}

fn check_step(dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt <= 1e-2) {
        return Err(Error::InvalidParams(alloc::format!("RK4 step {} outside (0, 1e-2]", dt)));
    }
    Ok(())
}

/// Single-particle density matrix `rho_kk' = <c_k^dagger c_k'>` evolved by
/// `d rho/dt = i [H', rho]`, starting from `rho0`.
pub fn density_matrix_propagate(
    h_final: &SingleParticleHamiltonian,
    rho0: &DMatrix<f64>,
    t: f64,
    dt: f64,
) -> Result<DMatrix<Complex64>> {
    check_step(dt)?;
    let ih = complex(&h_final.to_dense()) * Complex64::new(0.0, 1.0);
    Ok(rk4(complex(rho0), t, dt, |r| &ih * r - r * &ih))
}

/// `rho(0) = a diag(n) a^T` for a normal-mode eigenstate.
pub fn eigenstate_density(s: &Spectrum, occ: &OccupationVector) -> DMatrix<f64> {
    let k = s.len();
    DMatrix::from_fn(k, k, |i, j| {
        (0..k)
            .filter(|&l| occ.get(l))
            .map(|l| s.amplitude(i, l) * s.amplitude(j, l))
            .sum()
    })
}
