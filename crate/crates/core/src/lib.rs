//! Finite-element solvers for fractional boundary-value problems of the form
//! S^alpha u = g, where S is the Dirichlet-to-Neumann map of a second-order
//! elliptic operator on a polygonal domain.
//!
//! The crate provides the mesh machinery (quarter-disk fan generator, uniform
//! refinement, text import/export), P1 assembly, a boundary Schur-complement
//! spectral reference solver, and two iteration-based solvers: sinc-quadrature
//! in the spectral parameter and a pseudo-parabolic time-stepping scheme.

pub mod assembly;
pub mod cli;
pub mod config;
pub mod error;
pub mod linalg;
pub mod mesh;
pub mod pseudo_parabolic;
pub mod quadrature;
pub mod report;
pub mod steklov;
pub mod study;
pub mod vtk;

pub use error::{Error, Result};

/// Command-line entry point; returns the process exit code.
pub fn run() -> i32 {
    cli::dispatch()
}
