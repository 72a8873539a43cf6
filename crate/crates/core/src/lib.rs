//! Numerical lab for inradius bounds on nodal domains of Laplace
//! eigenfunctions on flat tori and Dirichlet boxes.
//!
//! The pipeline runs [`spectral`] → [`sampling`] → [`nodal`] →
//! [`covering`] → [`rayleigh`] → [`bounds`]; [`pipeline`] strings the stages
//! together for the command-line tool.

// `!(x > 0.0)` is how NaN gets rejected alongside the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod config;
pub mod covering;
pub mod edt;
pub mod error;
pub mod fixtures;
pub mod grid;
pub mod nodal;
pub mod pipeline;
pub mod rayleigh;
pub mod sampling;
pub mod spectral;

pub use error::{Error, Result};
