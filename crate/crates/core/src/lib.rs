//! Numerical laboratory for a stochastic convex-integration scheme for the
//! surface quasi-geostrophic equation on the 2-torus.
//!
//! The crate is organised by concern: [`spectral`] fields and operators,
//! [`timeline`] time grids and the causal mollifier, [`sewing`] Young
//! integration, [`noise`] stochastic convolutions, [`controls`] the parameter
//! planner, [`scheme`] the iteration itself and [`diagnostics`] for the
//! inequalities and weak-form checks.

pub mod controls;
pub mod diagnostics;
pub mod error;
pub mod noise;
pub mod pipeline;
pub mod scheme;
pub mod sewing;
pub mod spectral;
pub mod stats;
pub mod timeline;

pub use error::{Error, Result};
pub use spectral::{NormKind, NormOpts, TorusField};
