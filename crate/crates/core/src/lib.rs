//! Resonant-level model, many-body eigenstate sampling and thermalization
//! diagnostics for non-interacting fermions.
#![no_std]

extern crate alloc;

pub mod bath;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod fermi;
pub mod model;
pub mod observables;
pub mod oracle;

pub use error::{Error, Result};
