//! Relative equilibria of Hamiltonian systems with a linear torus symmetry.
//!
//! The crate follows the local pipeline: build a slice map at a known
//! relative equilibrium, reduce the critical point equation of the augmented
//! Hamiltonian h - J^xi to a bifurcation equation on the kernel of the second
//! variation, then continue, classify and switch branches.

pub mod branch;
pub mod error;
pub mod isotropy;
pub mod linalg;
pub mod model_config;
pub mod models;
pub mod polynomial;
pub mod reduction;
pub mod slice;
pub mod system;

pub use error::{Error, Result};
pub use system::{Hamiltonian, HamiltonianSystem, PhaseSpace, SymmetrySpec};
