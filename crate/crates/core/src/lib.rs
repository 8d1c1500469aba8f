//! Numerical laboratory for the Sachdev–Ye–Kitaev model at finite `n`.
//!
//! Majorana words are handled symbolically as bitmasks with a phase, dense
//! Hamiltonians are assembled through a Jordan–Wigner Pauli representation,
//! and Monte Carlo ensembles of spectra are compared with the limiting
//! moments, covariances and Gaussian fluctuation laws of linear statistics.

pub mod clifford;
pub mod error;
pub mod hamiltonian;
pub mod harness;
pub mod moments;
pub mod output;
pub mod parallel;
pub mod quadrature;
pub mod setcomb;
pub mod smoothing;
pub mod spectrum;
pub mod stats;

pub use error::{Error, Result};
