//! Long-range Ising models on `ℤ^d` with periodic couplings: minimizers of
//! periodic and Dirichlet problems, plane-like interface diagnostics and the
//! nonlocal perimeter limit.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! and `*32` aliases fix the scalar.

pub mod configuration;
pub mod error;
pub mod hamiltonian;
pub mod kernels;
pub mod lattice;
pub mod perimeter;
pub mod planelike;
pub mod scalar;
pub mod solver;

pub use configuration::{Closure, Configuration, SpinField, Window};
pub use error::{Error, Result};
pub use kernels::{ContinuumKernel, CouplingSpec, CouplingTable, FieldSpec, Modulation, Quadrature};
pub use lattice::{Cube, Direction, Endpoints, QuotientLattice, Site, SlabSpec};
pub use scalar::{KahanSum, Scalar};

pub type CouplingSpec64 = CouplingSpec<f64>;
pub type CouplingSpec32 = CouplingSpec<f32>;
pub type FieldSpec64 = FieldSpec<f64>;
pub type FieldSpec32 = FieldSpec<f32>;
