//! Master-equation dynamics: dissipators, the exact population (rate-matrix)
//! path, the full density-matrix validation path, and steady states.

pub mod dissipator;
pub mod full;
pub mod propagate;
pub mod rates;
pub mod state;

pub use dissipator::{apply_adjoint_dissipator, apply_dissipator, rhs};
pub use full::{evolve_full, FullOptions, Liouvillian};
pub use propagate::{
    asymptotic_state, check_generator_spectrum, evolve_populations, steady_state,
    weak_drive_limit, Phase, PiecewisePath, PopulationPropagator,
};
pub use rates::{build_rate_matrix, RateMatrix};
pub use state::{DensityMatrix, PopulationVector, Trajectory, Vector8};
