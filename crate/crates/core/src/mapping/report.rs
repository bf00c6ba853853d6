use serde::Serialize;

use crate::geometry::{Backend, Grid};

/// Pointwise residual norms of one identity over a grid.
#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub equation: String,
    pub backend: Backend,
    pub tolerance: f64,
    pub points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_axis: Option<usize>,
    /// Max-norm of the residual tensor at each grid point, in grid order.
    pub per_point: Vec<f64>,
    pub max: f64,
    pub rms: f64,
    /// `max < tolerance` with every value finite.
    pub pass: bool,
}

impl ResidualReport {
    pub fn new(equation: &str, backend: Backend, tolerance: f64, grid: &Grid, per_point: Vec<f64>) -> Self {
        let finite = per_point.iter().all(|v| v.is_finite());
        let max = if finite {
            per_point.iter().copied().fold(0.0, f64::max)
        } else {
            f64::NAN
        };
        let rms = (per_point.iter().map(|v| v * v).sum::<f64>() / per_point.len().max(1) as f64).sqrt();
        ResidualReport {
            equation: equation.to_string(),
            backend,
            tolerance,
            points: grid.len(),
            per_axis: grid.per_axis,
            per_point,
            max,
            rms,
            pass: finite && max < tolerance,
        }
    }
}
