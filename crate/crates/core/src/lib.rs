//! Numerics and Monte Carlo for long-range oriented percolation on
//! `Z^d × Z_+`.
//!
//! * [`kernel`]: the heavy-tailed step distribution `D` and exact sampling.
//! * [`spectral`]: `D̂`, convolution powers, Green's functions and the
//!   random-walk diagram integrals behind the critical-point expansion.
//! * [`percolation`]: cluster growth with Poissonized bond sampling,
//!   two-point estimators, critical-point search and exact enumeration.
//! * [`analysis`]: growth, limit-shape and exponent fits.
//! * [`cli`]: configuration, run records and the experiment runner.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alias;
pub mod analysis;
pub mod cli;
pub mod error;
pub mod kernel;
pub mod numeric;
pub mod percolation;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
pub use kernel::{KernelSpec, Profile, StepKernel};
