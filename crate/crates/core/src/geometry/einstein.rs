use serde::Serialize;

use crate::error::Result;
use crate::exec::Execution;

use super::{curvature_sweep, Backend, CurvatureEval, Grid, MetricField};

/// Pointwise Einstein constant `K = −R_ij g^{ij} / (n(n−1))`.
pub fn einstein_constant(c: &CurvatureEval) -> f64 {
    let n = c.dim() as f64;
    -c.scalar / (n * (n - 1.0))
}

/// `max |R_ij + K (n−1) g_ij|` at one point with the pointwise `K`.
pub fn einstein_residual(c: &CurvatureEval) -> f64 {
    let k = einstein_constant(c);
    let n1 = c.dim() as f64 - 1.0;
    c.ricci.zip_with(&c.metric, |r, g| r + k * n1 * g).max_abs()
}

#[derive(Clone, Debug, Serialize)]
pub struct EinsteinReport {
    pub is_einstein: bool,
    /// Mean of the pointwise constants.
    pub k: f64,
    pub k_min: f64,
    pub k_max: f64,
    pub max_residual: f64,
    pub tolerance: f64,
    pub backend: Backend,
    pub points: usize,
    pub per_point_k: Vec<f64>,
    pub per_point_residual: Vec<f64>,
}

impl EinsteinReport {
    pub fn k_spread(&self) -> f64 {
        self.k_max - self.k_min
    }
}

/// Test `R_ij = −K (n−1) g_ij` with one constant `K` over the grid.
pub fn einstein_check(
    m: &MetricField,
    grid: &Grid,
    backend: Backend,
    tolerance: f64,
    exec: Execution,
) -> Result<EinsteinReport> {
    let evals = curvature_sweep(m, grid, backend, false, exec)?;
    Ok(summarize(&evals, backend, tolerance))
}

pub(crate) fn summarize(evals: &[CurvatureEval], backend: Backend, tolerance: f64) -> EinsteinReport {
    let per_point_k: Vec<f64> = evals.iter().map(einstein_constant).collect();
    let per_point_residual: Vec<f64> = evals.iter().map(einstein_residual).collect();
    let k_min = per_point_k.iter().copied().fold(f64::INFINITY, f64::min);
    let k_max = per_point_k.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let k = per_point_k.iter().sum::<f64>() / per_point_k.len().max(1) as f64;
    let max_residual = per_point_residual.iter().copied().fold(0.0, f64::max);
    let all_finite = per_point_k.iter().chain(&per_point_residual).all(|v| v.is_finite());
    EinsteinReport {
        is_einstein: all_finite && max_residual < tolerance && k_max - k_min < tolerance,
        k,
        k_min,
        k_max,
        max_residual,
        tolerance,
        backend,
        points: evals.len(),
        per_point_k,
        per_point_residual,
    }
}
