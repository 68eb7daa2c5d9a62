//! Resonant-level single-particle Hamiltonian and its spectral decomposition.
//!
//! Level `0` is the system; levels `1..K` form a boxcar bath of width `W` with
//! uniform couplings to the system. All matrices are real symmetric with an
//! arrowhead sparsity pattern, but they are diagonalized with a dense solver.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Every input of a simulation run. Energies are in units of `w` (normally 1).
#[derive(Debug, Clone, PartialEq)]
pub struct SetupParams {
    /// Total level count, system plus bath.
    pub k: usize,
    /// Bath bandwidth.
    pub w: f64,
    /// System level energy.
    pub eps0: f64,
    /// Coupling strength.
    pub gamma: f64,
    /// System level energy after a quench, if any.
    pub eps0_final: Option<f64>,
    /// Midpoint of the reference-temperature window.
    pub t_mid: f64,
    /// Width of the reference-temperature window.
    pub dt: f64,
    /// Total particle number of the sampled eigenstates.
    pub n: usize,
    /// Number of accepted samples requested.
    pub m: usize,
    pub seed: u64,
}

impl Default for SetupParams {
    fn default() -> Self {
        Self {
            k: 300,
            w: 1.0,
            eps0: 0.2,
            gamma: 0.2,
            eps0_final: None,
            t_mid: 0.45,
            dt: 0.1,
            n: 150,
            m: 100,
            seed: 0x5eed,
        }
    }
}

impl SetupParams {
    pub fn validate(&self) -> Result<()> {
        if self.k < 3 {
            return Err(Error::InvalidParams(format!("K = {} must be at least 3", self.k)));
        }
        if !(self.w > 0.0) || !self.w.is_finite() {
            return Err(Error::InvalidParams(format!("W = {} must be positive", self.w)));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidParams(format!(
                "gamma = {} must be non-negative",
                self.gamma
            )));
        }
        if !self.eps0.is_finite() || self.eps0_final.map_or(false, |e| !e.is_finite()) {
            return Err(Error::InvalidParams("system energies must be finite".into()));
        }
        if self.n > self.k {
            return Err(Error::InvalidParams(format!(
                "N = {} exceeds K = {}",
                self.n, self.k
            )));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidParams(format!("dT = {} must be positive", self.dt)));
        }
        if self.m == 0 {
            return Err(Error::InvalidParams("M must be at least 1".into()));
        }
        Ok(())
    }

    /// Bath interlevel spacing `W / (K - 2)`.
    pub fn level_spacing(&self) -> f64 {
        self.w / (self.k as f64 - 2.0)
    }

    /// Uniform tunnel coupling `sqrt(Gamma spacing / (2 pi))`, so that the
    /// golden-rule width `2 pi t^2 / spacing` of the system level is `Gamma`
    /// independently of `K`.
    pub fn coupling(&self) -> f64 {
        libm::sqrt(self.gamma * self.level_spacing() / (2.0 * core::f64::consts::PI))
    }

    /// Bath level energies `-W/2 + spacing (k - 1)` for `k = 1..K`.
    pub fn bath_levels(&self) -> Vec<f64> {
        let spacing = self.level_spacing();
        (1..self.k)
            .map(|k| -0.5 * self.w + spacing * (k as f64 - 1.0))
            .collect()
    }

    /// Reference-temperature window `[T_mid - dT/2, T_mid + dT/2]`.
    pub fn temperature_window(&self) -> (f64, f64) {
        (self.t_mid - 0.5 * self.dt, self.t_mid + 0.5 * self.dt)
    }

    /// Copy of the parameters with the system level moved to its post-quench value.
    pub fn quenched(&self) -> Option<SetupParams> {
        self.eps0_final.map(|e| SetupParams {
            eps0: e,
            eps0_final: None,
            ..self.clone()
        })
    }
}

/// Arrowhead matrix: diagonal `levels`, first row/column `couplings`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleParticleHamiltonian {
    levels: Vec<f64>,
    couplings: Vec<f64>,
}

impl SingleParticleHamiltonian {
    pub fn size(&self) -> usize {
        self.levels.len()
    }

    /// Diagonal entries; index 0 is the system level.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Couplings `t_k` for `k = 1..K`.
    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let k = self.size();
        let mut h = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.levels));
        for (j, &t) in self.couplings.iter().enumerate() {
            h[(0, j + 1)] = t;
            h[(j + 1, 0)] = t;
        }
        debug_assert_eq!(h.nrows(), k);
        h
    }
}

/// Builds the boxcar resonant-level Hamiltonian from `params`.
pub fn build_resonant_level(params: &SetupParams) -> Result<SingleParticleHamiltonian> {
    if params.k < 3 {
        return Err(Error::InvalidParams(format!("K = {} must be at least 3", params.k)));
    }
    if !(params.w > 0.0) {
        return Err(Error::InvalidParams(format!("W = {} must be positive", params.w)));
    }
    if !(params.gamma >= 0.0) {
        return Err(Error::InvalidParams(format!(
            "gamma = {} must be non-negative",
            params.gamma
        )));
    }
    let mut levels = Vec::with_capacity(params.k);
    levels.push(params.eps0);
    levels.extend(params.bath_levels());
    let t = params.coupling();
    Ok(SingleParticleHamiltonian {
        levels,
        couplings: alloc::vec![t; params.k - 1],
    })
}

/// Arbitrary arrowhead Hamiltonian, mostly for analytic test fixtures.
pub fn build_custom(levels: &[f64], couplings: &[f64]) -> Result<SingleParticleHamiltonian> {
    if levels.is_empty() {
        return Err(Error::InvalidParams("at least one level is required".into()));
    }
    if couplings.len() + 1 != levels.len() {
        return Err(Error::LengthMismatch {
            expected: levels.len() - 1,
            found: couplings.len(),
        });
    }
    Ok(SingleParticleHamiltonian {
        levels: levels.to_vec(),
        couplings: couplings.to_vec(),
    })
}

/// Eigenvalues `omega_l` and the real orthogonal transform `a`, where
/// `a[(k, l)]` is the `k`-th component of normal mode `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    omega: Vec<f64>,
    a: DMatrix<f64>,
}

impl Spectrum {
    /// Spectrum of a diagonal Hamiltonian in its own level order: the
    /// transform is the identity and `omega` is *not* re-sorted.
    pub fn uncoupled(levels: &[f64]) -> Spectrum {
        Spectrum {
            omega: levels.to_vec(),
            a: DMatrix::identity(levels.len(), levels.len()),
        }
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn transform(&self) -> &DMatrix<f64> {
        &self.a
    }

    #[inline]
    pub fn amplitude(&self, k: usize, l: usize) -> f64 {
        self.a[(k, l)]
    }

    /// Overlaps `|a_kl|^2` of level `k` with every normal mode.
    pub fn overlaps(&self, k: usize) -> Vec<f64> {
        (0..self.len()).map(|l| self.a[(k, l)] * self.a[(k, l)]).collect()
    }

    /// Largest entry of `|a^T a - I|`.
    pub fn orthogonality_residual(&self) -> f64 {
        let n = self.len();
        let g = self.a.transpose() * &self.a;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max(libm::fabs(g[(i, j)] - target));
            }
        }
        worst
    }

    /// Largest entry of `|a diag(omega) a^T - H|`.
    pub fn reconstruction_residual(&self, h: &DMatrix<f64>) -> f64 {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.omega));
        let r = &self.a * d * self.a.transpose() - h;
        r.iter().fold(0.0_f64, |m, x| m.max(libm::fabs(*x)))
    }
}

/// Dense symmetric eigendecomposition with ascending eigenvalues and the sign
/// of each eigenvector fixed so that its largest-magnitude component is
/// positive (first such component on near-ties).
pub fn diagonalize(h: &SingleParticleHamiltonian) -> Result<Spectrum> {
    let size = h.size();
    let dense = h.to_dense();
    let eig = dense
        .try_symmetric_eigen(f64::EPSILON, 1000 * size.max(10))
        .ok_or(Error::Eigensolver { size })?;

    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let mut omega = Vec::with_capacity(size);
    let mut a = DMatrix::zeros(size, size);
    for (l, &src) in order.iter().enumerate() {
        omega.push(eig.eigenvalues[src]);
        let col = eig.eigenvectors.column(src);
        let peak = col.iter().fold(0.0_f64, |m, x| m.max(libm::fabs(*x)));
        let pivot = col
            .iter()
            .position(|x| libm::fabs(*x) >= peak - 1e-12)
            .unwrap_or(0);
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..size {
            a[(k, l)] = sign * col[k];
        }
    }
    Ok(Spectrum { omega, a })
}

/// Smallest spacing between adjacent eigenvalues; `+inf` for fewer than two.
pub fn min_gap(s: &Spectrum) -> f64 {
    s.omega
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
}
