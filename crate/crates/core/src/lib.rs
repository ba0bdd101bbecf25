//! Interrupted spatial point processes: a regular base process `Y` thinned
//! by a correlated random selection field `Π`, retaining `x ∈ Y` when
//! `Π(x) ≥ U(x)` for independent uniforms `U`.
//!
//! The crate provides samplers for the base processes (Poisson,
//! determinantal, Matérn hard-core I/II) and the selection fields
//! (χ²-transformed Gaussian, Boolean and complement-Boolean), closed-form
//! second-order characteristics of the retained, deleted and cross
//! processes, nonparametric summary statistics with simulation envelopes,
//! composite-likelihood and minimum-contrast estimation, and conditional
//! simulation of the selection field given retained and deleted points.

pub mod error;
pub mod rng;
pub mod geometry;
pub mod special;
pub mod linalg;
pub mod covariance;
pub mod field;
pub mod base;
pub mod selection;
pub mod thinning;
pub mod summaries;
pub mod optim;
pub mod inference;
pub mod condsim;
pub mod io;
pub mod stats;

pub use error::{Error, Result};
