//! The quantum Fokker-Planck master equation in the Hermite basis: model
//! description, the block generator `Q = Q_0 + Q_fb` acting on
//! `(M_0, …, M_{N-1})`, and solvers for its dynamics and steady states.

mod evolve;
mod generator;
mod model;
mod state;
mod steady;

pub use evolve::{evolve, evolve_sampled, EvolveOptions};
pub use generator::{assemble_generator, assemble_with_alphas, BlockGenerator};
pub use model::{FeedbackChannel, ModelSpec, Parameterization};
pub use state::{HermiteState, InitialDetector, SteadyContext};
pub use steady::{
    parameter_derivatives, perturbative_steady, steady_state_forward, steady_state_forward_auto,
    steady_state_full, steady_state_spectral, AutoTruncation, PerturbativeSolution,
};
