//! Numerical verification of canonical transformations in a global
//! canonical chart: Poisson brackets, Hamiltonian flows, generating
//! functions, invariance and the Noether correspondence.

pub mod brackets;
pub mod canonicity;
pub mod cli;
pub mod error;
pub mod expr;
pub mod flows;
pub mod genfun;
pub mod numdiff;
pub mod phase;
pub mod quadrature;
pub mod report;
pub mod symmetry;

pub use error::{Error, Result};
