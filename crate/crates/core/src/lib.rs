//! Reconstruction of Hamiltonian quantum theories from measures on histories of
//! two-dimensional gauge fields.
//!
//! The crate is layered bottom-up:
//!
//! * [`group`]: characters, Casimirs and Haar integration for U(1) and SU(2).
//! * [`lattice`]: the cylinder (or plane) lattice, loops, loop networks and foliations.
//! * [`action`]: single-plaquette Boltzmann weights and their character coefficients.
//! * [`measure`]: expectation values and inner products of loop-network functions.
//! * [`reconstruct`]: reflected inner products, the physical Hilbert space, the
//!   transfer semigroup, the Hamiltonian, and axiom checks.

pub mod action;
pub mod error;
pub mod extrapolate;
pub mod group;
pub mod lattice;
pub mod measure;
pub mod reconstruct;
pub mod sampling;

pub use error::{OsrError, Result};
