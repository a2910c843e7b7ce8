//! Pseudo-spectral simulation of the stochastic primitive equations on the
//! unit torus driven by Kraichnan-type transport noise, with the anisotropic
//! norms, exponent calculators and diagnostics used to check such runs.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::result_large_err)]

pub mod config;
pub mod diagnostics;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod exponents;
mod fft;
pub mod hydrostatics;
pub mod io;
pub mod noise;
pub mod rng;
pub mod spaces;
pub mod spectral;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
pub use spectral::{Axis, GridSpec, RealField, SpectralField};
