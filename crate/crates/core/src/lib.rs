#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Numerical laboratory for scalar fields on Euclidean AdS (the hyperbolic
//! half-space): bulk and boundary propagators, boundary generating
//! functionals, a lattice-regularized :φ⁴: interaction and the diagnostics
//! of its infra-red behaviour.

pub mod error;
pub mod fit;
pub mod functionals;
pub mod geometry;
pub mod interaction;
pub mod kernels;
pub mod lattice;
pub mod params;
pub mod positivity;
pub mod quad;
pub mod special;

pub use error::{Error, Result};
pub use params::{spectral_params, Branch, BoundaryTestFunction, Bump, SpectralParams};
