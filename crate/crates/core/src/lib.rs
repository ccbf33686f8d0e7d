//! Relativistic bound states of the Klein-Gordon equation with the q-deformed
//! Hulthén potential, solved with the supersymmetric factorization hierarchy.
//!
//! The crate is organised bottom-up:
//!
//! * [`potential`]: parameters, branches and the energy-dependent effective potential.
//! * [`hierarchy`]: superpotential ansatz, level recurrence, partner potentials,
//!   Riccati residuals and ladder operators.
//! * [`spectra`]: the self-consistent level equation and its root finders.
//! * [`wavefunctions`]: ground states of the hierarchy on a grid.
//! * [`oracle`]: an independent finite-difference eigensolver used for cross-checks.
//! * [`cli`]: config parsing, serialization and the command runners behind the binary.
//!
//! Data-parallel loops (level batches, sweeps, grid sampling) go through [`par`],
//! which uses rayon when the `parallel` feature is enabled and runs sequentially
//! otherwise.

pub mod cli;
pub mod error;
pub mod grid;
pub mod hierarchy;
pub mod oracle;
pub mod par;
pub mod potential;
pub mod spectra;
pub mod wavefunctions;

pub use error::{Error, Result};
pub use grid::{GridFunction, UniformGrid};
pub use num_complex::Complex64;
pub use potential::{Branch, GammaPair, PotentialParams};
