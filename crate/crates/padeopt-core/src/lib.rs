//! Spectrally optimized compact finite-difference schemes.
//!
//! Derivation of the coefficients by an equality-constrained quadratic
//! program, spectral error analysis, time-integration stability, and a small
//! periodic PDE harness for checking schemes against exact solutions.
#![no_std]

extern crate alloc;

pub mod cost;
pub mod dd;
pub mod error;
pub mod optimize;
pub mod pde;
pub mod quadrature;
pub mod spectral;
pub mod stability;
pub mod stencil;
pub mod weight;

pub use error::{Error, Result};
