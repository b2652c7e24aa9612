//! Numerical study of hot spots of Neumann eigenfunctions of drift Laplacians
//! on convex pairs, their high-dimensional barrel approximations, and the
//! heat-flow constructions that produce interior maxima.

// `!(x > 0.0)` is used on purpose to reject NaN along with nonpositive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// index loops mirror the stencil formulas and touch several arrays at once
#![allow(clippy::needless_range_loop)]

pub mod commands;
pub mod config;
pub mod error;
pub mod geometry;
pub mod heat;
pub mod io;
pub mod linalg;
pub mod perturbation;
pub mod pipeline;
pub mod potentials;
pub mod spectral;
pub mod stochastic;
pub mod transport;
pub mod wings;

pub use error::{Error, Result};
