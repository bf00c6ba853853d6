//! Pointwise tensor calculus for a single metric.

mod chart;
mod curvature;
mod einstein;
mod metric;

pub use chart::{Chart, Grid, DEFAULT_MARGIN};
pub use curvature::{christoffel, curvature, curvature_sweep, weyl_projective, CurvatureEval};
pub use einstein::{einstein_check, einstein_constant, einstein_residual, EinsteinReport};
pub use metric::{metric_jet, Backend, MetricField, MetricJet};

pub(crate) use curvature::MetricTaylor;
pub(crate) use einstein::summarize as summarize_einstein;
