//! Numerical laboratory for homoclinic orbits of first-order Hamiltonian
//! systems z' = J H_z(t,z).
//!
//! The library discretizes the operator F = -J d/dt + L(t) on a truncated
//! time grid, computes relative Morse index pairs both by matrix inertia and
//! by spectral flow, performs saddle point reduction to a finite-dimensional
//! functional a(x), searches for its critical points, and lifts them to
//! certified homoclinic orbits. Each capability has a runnable example under
//! `examples/`; the `hamlab` binary drives batch runs from a TOML config.

// Link the system BLAS/LAPACK.
extern crate openblas_src;

pub mod config;
pub mod discretize;
pub mod error;
pub mod index;
pub mod linalg;
pub mod linear;
pub mod model;
pub mod orbits;
pub mod pipeline;
pub mod potentials;
pub mod reduction;

pub use error::Error;
pub type Result<T> = std::result::Result<T, Error>;
