//! Recovery of N-photon states from lower-order coincidence measurements at
//! the output of a coupled waveguide array, using the sparsity of the state in
//! a known basis.
//!
//! The pipeline is: [`lattice`] builds the single-particle propagator,
//! [`fock`] evaluates multi-photon amplitudes through permanents, [`basis`]
//! defines the sparsity basis, [`sensing`] assembles the coincidence sensing
//! matrix, [`simulate`] produces ground-truth states and noisy measurements,
//! [`solver`] recovers the coefficients and [`metrics`] scores the result.
//! [`harness`] ties the pieces into reproducible Monte Carlo experiments.

pub mod basis;
pub mod error;
pub mod fock;
pub mod harness;
pub mod lattice;
pub mod metrics;
pub mod sensing;
pub mod simulate;
pub mod solver;

pub use error::{Error, Result};
