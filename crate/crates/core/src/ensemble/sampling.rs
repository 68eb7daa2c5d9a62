//! Uniform fixed-particle-number eigenstate sampling with an energy-window
//! acceptance test.
//!
//! Trials are grouped into blocks of [`TRIALS_PER_BLOCK`]; block `b` draws
//! from its own ChaCha stream `b` under the run seed, so every trial has a
//! global draw index independent of how blocks are scheduled. Accepted states
//! are merged in draw order and the first `M` are kept.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::occupation::OccupationVector;
use super::thermal::{energy_window_for_temperature, solve_reference, EnergyWindow, ReferenceEnsemble};
use crate::error::{Error, Result};
use crate::model::{SetupParams, Spectrum};

pub const TRIALS_PER_BLOCK: u64 = 1 << 16;

/// Generator for block `block` of a run seeded with `seed`.
pub fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

/// Reusable partial Fisher-Yates shuffle over mode indices.
///
/// Each draw selects a uniformly random subset of `min(n, k - n)` modes; when
/// `n > k / 2` the drawn subset is the set of *empty* modes.
#[derive(Debug, Clone)]
pub struct FixedNSampler {
    perm: Vec<u32>,
    n: usize,
    drawn: usize,
    complement: bool,
}

impl FixedNSampler {
    pub fn new(k: usize, n: usize) -> Self {
        assert!(n <= k, "particle number exceeds mode count");
        assert!(k <= u32::MAX as usize);
        let complement = 2 * n > k;
        Self {
            perm: (0..k as u32).collect(),
            n,
            drawn: if complement { k - n } else { n },
            complement,
        }
    }

    pub fn modes(&self) -> usize {
        self.perm.len()
    }

    pub fn particles(&self) -> usize {
        self.n
    }

    /// Draws a new subset and returns its energy `sum_l n_l omega_l`.
    /// `total` must be `sum_l omega_l`.
    #[inline]
    pub fn draw_energy<R: Rng + ?Sized>(&mut self, rng: &mut R, omega: &[f64], total: f64) -> f64 {
        let k = self.perm.len() as u32;
        let mut partial = 0.0;
        for i in 0..self.drawn {
            let j = rng.gen_range(i as u32..k) as usize;
            self.perm.swap(i, j);
            partial += omega[self.perm[i] as usize];
        }
        if self.complement {
            total - partial
        } else {
            partial
        }
    }

    /// Occupation vector of the most recent draw.
    pub fn current(&self) -> OccupationVector {
        let k = self.perm.len();
        let mut occ = if self.complement {
            OccupationVector::full(k)
        } else {
            OccupationVector::empty(k)
        };
        for &l in &self.perm[..self.drawn] {
            occ.set(l as usize, !self.complement);
        }
        occ
    }
}

/// Uniformly random occupation of `k` modes with exactly `n` particles.
pub fn sample_fixed_n<R: Rng + ?Sized>(k: usize, n: usize, rng: &mut R) -> Result<OccupationVector> {
    if n > k {
        return Err(Error::InvalidParams(alloc::format!("N = {} exceeds K = {}", n, k)));
    }
    let mut sampler = FixedNSampler::new(k, n);
    let zeros = alloc::vec![0.0; k];
    sampler.draw_energy(rng, &zeros, 0.0);
    Ok(sampler.current())
}

/// A draw that passed the energy window, before its reference state is solved.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub draw: u64,
    pub energy: f64,
    pub occ: OccupationVector,
}

/// Result of scanning one block of trials.
#[derive(Debug, Clone)]
pub struct BlockScan {
    pub block: u64,
    pub trials: u64,
    pub candidates: Vec<Candidate>,
}

/// An accepted eigenstate with its matched grand-canonical reference.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledEigenstate {
    pub occ: OccupationVector,
    pub energy: f64,
    pub reference: ReferenceEnsemble,
    /// Position in the accepted list.
    pub sample_index: usize,
    /// Global draw index of the trial that produced this state.
    pub draw: u64,
}

/// Output of a windowed sampling run.
#[derive(Debug, Clone)]
pub struct SampleRun {
    pub samples: Vec<SampledEigenstate>,
    /// Draw index of the last accepted sample plus one.
    pub trials: u64,
    pub window: EnergyWindow,
}

impl SampleRun {
    pub fn acceptance_rate(&self) -> f64 {
        self.samples.len() as f64 / self.trials.max(1) as f64
    }
}

/// Rejection sampler over uniform fixed-`n` eigenstates of `spectrum`.
#[derive(Debug, Clone)]
pub struct WindowSampler<'a> {
    spectrum: &'a Spectrum,
    n: usize,
    window: EnergyWindow,
    seed: u64,
    requested: usize,
    budget: u64,
    total: f64,
}

impl<'a> WindowSampler<'a> {
    pub fn new(
        spectrum: &'a Spectrum,
        n: usize,
        window: EnergyWindow,
        seed: u64,
        requested: usize,
        budget: u64,
    ) -> Result<Self> {
        if n > spectrum.len() {
            return Err(Error::InvalidParams(alloc::format!(
                "N = {} exceeds K = {}",
                n,
                spectrum.len()
            )));
        }
        if requested == 0 {
            return Err(Error::InvalidParams("M must be at least 1".into()));
        }
        if !(window.lo <= window.hi) {
            return Err(Error::InvalidParams("empty energy window".into()));
        }
        Ok(Self {
            spectrum,
            n,
            window,
            seed,
            requested,
            budget,
            total: spectrum.omega().iter().sum(),
        })
    }

    /// Sampler for the reference-temperature window of `params`.
    pub fn from_params(spectrum: &'a Spectrum, params: &SetupParams, budget: u64) -> Result<Self> {
        let (t_lo, t_hi) = params.temperature_window();
        let window = energy_window_for_temperature(spectrum, params.n, t_lo, t_hi)?;
        Self::new(spectrum, params.n, window, params.seed, params.m, budget)
    }

    pub fn window(&self) -> EnergyWindow {
        self.window
    }

    pub fn requested(&self) -> usize {
        self.requested
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    /// Number of blocks needed to cover the trial budget.
    pub fn block_count(&self) -> u64 {
        self.budget.div_ceil(TRIALS_PER_BLOCK)
    }

    /// Runs every trial of `block`, stopping early once `M` states are accepted.
    pub fn scan_block(&self, block: u64) -> BlockScan {
        let omega = self.spectrum.omega();
        let mut rng = block_rng(self.seed, block);
        let mut sampler = FixedNSampler::new(omega.len(), self.n);
        let mut candidates = Vec::new();
        let first = block * TRIALS_PER_BLOCK;
        let mut trials = 0;
        for i in 0..TRIALS_PER_BLOCK {
            let e = sampler.draw_energy(&mut rng, omega, self.total);
            trials += 1;
            if self.window.contains(e) {
                candidates.push(Candidate {
                    draw: first + i,
                    energy: e,
                    occ: sampler.current(),
                });
                if candidates.len() >= self.requested {
                    break;
                }
            }
        }
        BlockScan {
            block,
            trials,
            candidates,
        }
    }

    /// Merges block scans in draw order, keeps the first `M` candidates within
    /// the budget and solves their reference states.
    pub fn finish<I>(&self, scans: I) -> Result<SampleRun>
    where
        I: IntoIterator<Item = BlockScan>,
    {
        let mut scanned = 0u64;
        let mut candidates: Vec<Candidate> = Vec::new();
        for scan in scans {
            scanned += scan.trials;
            candidates.extend(scan.candidates.into_iter().filter(|c| c.draw < self.budget));
        }
        candidates.sort_by_key(|c| c.draw);
        if candidates.len() < self.requested {
            return Err(Error::BudgetExceeded {
                budget: self.budget,
                accepted: candidates.len(),
                requested: self.requested,
                rate: candidates.len() as f64 / scanned.max(1) as f64,
            });
        }
        candidates.truncate(self.requested);
        let trials = candidates.last().map_or(0, |c| c.draw + 1);
        let samples = candidates
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                let reference = solve_reference(self.spectrum, c.energy, self.n)?;
                Ok(SampledEigenstate {
                    occ: c.occ,
                    energy: c.energy,
                    reference,
                    sample_index: i,
                    draw: c.draw,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SampleRun {
            samples,
            trials,
            window: self.window,
        })
    }

    /// Single-threaded run, block by block.
    pub fn run(&self) -> Result<SampleRun> {
        let mut scans = Vec::new();
        let mut accepted = 0;
        for block in 0..self.block_count() {
            let scan = self.scan_block(block);
            accepted += scan.candidates.len();
            scans.push(scan);
            if accepted >= self.requested {
                break;
            }
        }
        self.finish(scans)
    }
}

/// Draws `params.m` eigenstates whose reference temperature lies in the window
/// of `params`, trying at most `budget` uniform fixed-`N` states.
pub fn sample_microcanonical_window(s: &Spectrum, params: &SetupParams, budget: u64) -> Result<SampleRun> {
    WindowSampler::from_params(s, params, budget)?.run()
}
