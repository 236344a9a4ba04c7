//! Energy-based description of lattice random fields.
//!
//! The crate works with configurations over finite windows of `Z^d`, one-point
//! transition energy fields and the objects they determine: finite-volume
//! transition energies, specifications, one-point kernels and Hamiltonians.
//! Everything is evaluated exhaustively at desk scale, so every structural
//! identity between these objects can be checked numerically.
//!
//! Module map:
//!
//! - [`lattice`]: sites, windows, configurations and boundary conditions.
//! - [`energy`]: transition energy tables, one-point energy models, the
//!   telescoping assembly of multi-site energies and their consistency checks.
//! - [`potential`]: finite-range potentials, Hamiltonians and Hamiltonian checks.
//! - [`specification`]: Gibbs-form conversions, kernels, reconstruction of
//!   finite-volume distributions and Dobrushin-type consistency checks.
//! - [`uniqueness`]: Dobrushin and transition-energy uniqueness coefficients.
//! - [`canonical`]: finite-dimensional distribution models and increasing-volume
//!   traces of log-probability ratios.
//! - [`models`]: built-in models and the model file loader.
//! - [`sampler`]: single-site heat-bath sampler.
//! - [`cli`]: the `tefield` command-line front end.

pub mod canonical;
pub mod cli;
pub mod energy;
pub mod error;
pub mod lattice;
pub mod models;
pub mod potential;
pub mod report;
pub mod sampler;
pub mod specification;
pub mod uniqueness;

pub use error::{Error, Result};
