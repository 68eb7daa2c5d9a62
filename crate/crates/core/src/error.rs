use alloc::string::String;

/// Failure modes shared by every numerical routine in the crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("index {index} out of range for size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("symmetric eigensolver did not converge for a {size}x{size} matrix")]
    Eigensolver { size: usize },

    #[error("energy {energy} outside the achievable open interval ({min}, {max})")]
    EnergyOutOfRange { energy: f64, min: f64, max: f64 },

    #[error(
        "thermal solve did not converge after {iterations} iterations \
         (particle residual {residual_n:e}, energy residual {residual_e:e})"
    )]
    NonConvergence {
        iterations: usize,
        residual_n: f64,
        residual_e: f64,
    },

    #[error(
        "trial budget of {budget} exhausted with {accepted} of {requested} samples accepted \
         (acceptance rate estimate {rate:e})"
    )]
    BudgetExceeded {
        budget: u64,
        accepted: usize,
        requested: usize,
        rate: f64,
    },

    #[error("empty sample list")]
    EmptySamples,

    #[error("final spectrum has a level gap {gap:e} below the degeneracy tolerance {tol:e}")]
    Degenerate { gap: f64, tol: f64 },

    #[error("enumeration of {k} modes exceeds the hard cap of {cap}")]
    EnumerationTooLarge { k: usize, cap: usize },

    #[error("malformed occupation string: {0}")]
    Parse(String),
}

pub type Result<T> = core::result::Result<T, Error>;
