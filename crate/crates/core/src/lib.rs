//! Optical pumping of the NV-center electronic spin: an eight-level Lindblad
//! model, the two-step polarization protocol, and a thermodynamic ledger of
//! work, heat and von Neumann entropy.
//!
//! Units throughout: frequencies, energies and rates in MHz (ħ = 1), times in
//! μs, fields in T, entropies in nats.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod lindblad;
pub mod linalg;
pub mod model;
pub mod thermo;

pub use error::{Error, Result};
pub use model::{build_model, Channel, Level, ModelParams, NvModel};
