//! Optimal-control design of triple-quantum excitation pulses for
//! spin-3/2 quadrupolar nuclei under magic-angle spinning.
//!
//! The crate builds the MAS spin Hamiltonian, propagates density
//! operators over piecewise-constant rf pulses, evaluates exact cost
//! gradients for both the per-step (GRAPE) and reduced Fourier-basis
//! (GROUP) parametrizations, and drives limited-memory quasi-Newton
//! multi-start optimization over powder/rf-inhomogeneity ensembles.

pub mod analysis;
pub mod error;
pub mod groupbasis;
pub mod hamiltonian;
pub mod linalg;
pub mod objective;
pub mod optimizer;
pub mod powder;
pub mod propagation;
pub mod spinops;

pub use error::{Error, Result};
