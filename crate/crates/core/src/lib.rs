//! Monte Carlo engine for the finite-matrix truncation of the harmonic
//! noncommutative gauge-Higgs model.
//!
//! The crate is organized bottom-up: [`linalg`] provides the dense complex
//! kernels, [`model`] evaluates the discretized action, [`sampler`] runs the
//! two-copy Metropolis chain, [`observables`] measures energies and order
//! parameters and [`stats`] turns time series into error bars.

pub mod error;
pub mod linalg;
pub mod model;
pub mod observables;
pub mod sampler;
pub mod stats;

pub use error::{Error, Result};
