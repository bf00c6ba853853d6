//! Geodesic mappings between pseudo-Riemannian metrics in local coordinates.
//!
//! A metric pair `(g, ḡ)` on a shared chart is a geodesic mapping when every
//! `g`-geodesic is, up to parametrisation, a `ḡ`-geodesic. This crate checks
//! that property pointwise through the Levi-Civita equations and the
//! equivalent linear Sinyukov system, evaluates the integrability hierarchy
//! and the curvature transfer identities as residuals on sample grids,
//! reconstructs `ḡ` from Sinyukov data by integrating the closed Cauchy
//! system, and compares geodesics directly.
//!
//! Conventions: `R^h_ijk = ∂_j Γ^h_ik − ∂_k Γ^h_ij + Γ^h_jα Γ^α_ik − Γ^h_kα Γ^α_ij`,
//! Ricci `R_ij = R^α_iαj`, and Einstein spaces are written
//! `R_ij = −K (n−1) g_ij`, which makes `K = −1` on the unit sphere.
//!
//! Grid sweeps run on rayon when the `parallel` feature is enabled (the
//! default); [`Execution::Sequential`] forces a single thread either way.

#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod exec;
pub mod expr;
pub mod geodesics;
pub mod geometry;
pub mod mapping;
pub mod metric_file;
pub mod sinyukov;
pub mod tensor;

mod taylor;

#[cfg(test)]
mod fixtures;

pub use error::{Error, Result};
pub use exec::Execution;
pub use expr::{parse, Expr};
pub use geometry::{Backend, Chart, CurvatureEval, Grid, MetricField, MetricJet};
pub use mapping::{Classification, MappingEval, PairSweep, ResidualReport};
pub use sinyukov::{PathSpec, SinyukovState};
pub use tensor::Tensor;
