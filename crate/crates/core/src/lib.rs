//! Numerical laboratory for partial-data stability of the first-order
//! perturbed biharmonic operator `lap^2 + A.D + q` under Navier boundary
//! conditions: forward solves, partial Dirichlet-to-Neumann maps on boundary
//! patches, complex geometric optics solutions, Fourier recovery of `dA` and
//! `q`, vector-field decomposition, Carleman and unique-continuation checks,
//! and a stability-curve experiment runner.

pub mod error;
pub mod par;

pub mod grid;

pub mod diff;
pub mod field;
pub mod norms;
pub mod spectral;

pub mod bumps;
pub mod cgo;
pub mod dtn;
pub mod pde;

pub use error::{Error, Result};
