//! Many-body eigenstates as normal-mode occupations, their energies, and the
//! grand-canonical reference states matched to them.

mod occupation;
mod sampling;
mod thermal;

pub use occupation::OccupationVector;
pub use sampling::{
    block_rng, sample_fixed_n, sample_microcanonical_window, BlockScan, Candidate, FixedNSampler,
    SampleRun, SampledEigenstate, WindowSampler, TRIALS_PER_BLOCK,
};
pub use thermal::{
    energy_bounds, energy_window_for_temperature, grand_canonical_occupations, solve_reference,
    solve_thermal, thermal_state, EnergyWindow, ReferenceEnsemble, ENERGY_TOLERANCE,
    MAX_SOLVE_ITERATIONS, PARTICLE_TOLERANCE,
};

use crate::error::{Error, Result};
use crate::model::Spectrum;

/// `E_i = sum_l n_l omega_l`.
pub fn eigenstate_energy(s: &Spectrum, occ: &OccupationVector) -> Result<f64> {
    if occ.len() != s.len() {
        return Err(Error::LengthMismatch {
            expected: s.len(),
            found: occ.len(),
        });
    }
    Ok(occ.occupied().map(|l| s.omega()[l]).sum())
}
