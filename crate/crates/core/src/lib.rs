//! Solver for the quantum Fokker-Planck master equation of a continuously
//! monitored quantum system jointly with its low-pass filtered measurement
//! signal.
//!
//! The joint state `rho_t(D)` is expanded in generalized Hermite functions of
//! the signal `D`; the coefficient matrices `M_n` are evolved or solved for in
//! steady state, and every signal statistic (moments, the full distribution,
//! mutual information, covariances, two-time correlations, Fisher
//! information) is read off from them. A stochastic-trajectory simulator
//! provides an independent Monte Carlo check.

// `!(x > y)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod hermite;
pub(crate) mod linalg;
pub mod models;
pub(crate) mod ode;
pub mod operators;
pub mod qfpme;
pub mod statistics;
pub mod trajectories;

pub use error::{QfpmeError, Result};
pub use linalg::{fidelity, hermitian_eigenvalues};
pub use hermite::{AlphaMatrix, BasisParams, FeedbackFunctionSpec};
pub use operators::{CMatrix, CVector, SuperOperator};
pub use qfpme::{BlockGenerator, FeedbackChannel, HermiteState, ModelSpec};

pub use num_complex::Complex64;
