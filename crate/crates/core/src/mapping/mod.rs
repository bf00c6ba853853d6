//! Quantities and residuals attached to a metric pair `(g, ḡ)` on one chart.
//!
//! Everything is evaluated pointwise from jets of both metrics. `Ψ`, `a_ij`,
//! `λ_i` and their covariant derivatives are carried as truncated Taylor
//! polynomials, so derivatives of derived fields come out of the same
//! algebra as their values for either derivative backend.

mod einstein;
mod reconstruct;
mod report;
mod residuals;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::{curvature, metric_jet, Backend, CurvatureEval, Grid, MetricField, MetricJet, MetricTaylor};
use crate::taylor::{self, Taylor};
use crate::tensor::Tensor;

pub use einstein::{einstein_suite, EinsteinSuite};
pub use reconstruct::{a_from, reconstruct_field, reconstruct_gbar, Reconstruction};
pub use report::ResidualReport;
pub use residuals::{curvature_transform_residual, levi_civita_residual, sinyukov_residual};

/// `max |ψ_i|` over a grid at or above which a geodesic mapping counts as
/// nontrivial.
pub const NONTRIVIAL_THRESHOLD: f64 = 1e-6;

/// Pointwise data of a metric pair.
///
/// Fields needing second derivatives of the metrics are `None` for
/// first-order evaluations; `mu_gradient` needs third derivatives.
/// `k` and `k_bar` are filled by the Einstein suite only.
#[derive(Clone, Debug, Serialize)]
pub struct MappingEval {
    pub point: Vec<f64>,
    /// `Ψ = ln |det ḡ / det g| / (2(n+1))`.
    pub psi: f64,
    /// `ψ_i = ∂_i Ψ`.
    pub psi_gradient: Vec<f64>,
    /// `ψ_ij = ψ_{i,j} − ψ_i ψ_j`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi_tensor: Option<Tensor<2>>,
    /// `a_ij = e^{2Ψ} ḡ^{αβ} g_αi g_βj`.
    pub a: Tensor<2>,
    /// `λ_i = −e^{2Ψ} ḡ^{αβ} g_βi ψ_α`.
    pub lambda_covector: Vec<f64>,
    /// `λ = ½ a_αβ g^{αβ}`.
    pub lambda: f64,
    /// `∂_i λ`, the second route to `λ_i`.
    pub lambda_gradient: Vec<f64>,
    /// `max_i |λ_i − ∂_i λ|`.
    pub lambda_discrepancy: f64,
    /// `λ^h = g^{hα} λ_α`.
    pub lambda_vector: Vec<f64>,
    /// `λ_{i,j}`, the source-covariant derivative of `λ_i`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_derivative: Option<Tensor<2>>,
    /// `μ = λ_{α,β} g^{αβ}`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// `∂_k μ`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_gradient: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_bar: Option<f64>,
    /// `Λ_ij = λ_{i,j} − K a_ij`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub big_lambda: Option<Tensor<2>>,
}

/// Everything a residual needs at one point.
#[derive(Clone, Debug)]
pub(crate) struct PairPoint {
    pub eval: MappingEval,
    pub source: MetricJet,
    pub target: MetricJet,
    /// `∂_k a_ij`, indexed `[i, j, k]`.
    pub a_partial: Tensor<3>,
    /// Source Christoffel symbols `[h, i, j]` (available at every order).
    pub source_christoffel: Tensor<3>,
    pub target_christoffel: Tensor<3>,
    pub source_curvature: Option<CurvatureEval>,
    pub target_curvature: Option<CurvatureEval>,
}

impl PairPoint {
    pub fn dim(&self) -> usize {
        self.source.dim()
    }
}

fn pair_point(g: &MetricField, gbar: &MetricField, p: &[f64], order: usize, backend: Backend) -> Result<PairPoint> {
    let n = g.dim();
    let space = taylor::space(n);
    let sj = metric_jet(g, p, order, backend)?;
    let tj = metric_jet(gbar, p, order, backend)?;
    let s = MetricTaylor::from_jet(&sj, order)?;
    let t = MetricTaylor::from_jet(&tj, order)?;

    let mut psi_t = t.logdet.clone();
    psi_t -= &s.logdet;
    let psi_t = psi_t.scale(1.0 / (2.0 * (n as f64 + 1.0)));
    let e2 = psi_t.scale(2.0).exp();
    let psi_d: Vec<Taylor> = (0..n).map(|i| psi_t.d(i)).collect();

    // m[α, j] = ḡ^{αβ} g_βj
    let m = t.ginv.matmul(&s.g);
    let gm = s.g.matmul(&m);
    let a_t: Vec<Taylor> = gm.e.iter().map(|x| x * &e2).collect();
    let lam_t: Vec<Taylor> = (0..n)
        .map(|i| {
            let mut acc = Taylor::zero(space, order - 1);
            for a in 0..n {
                acc.add_product(-1.0, m.at(a, i), &psi_d[a]);
            }
            &acc * &e2
        })
        .collect();
    let mut lam_scalar = Taylor::zero(space, order);
    for a in 0..n {
        for b in 0..n {
            lam_scalar.add_product(0.5, &a_t[a * n + b], s.ginv.at(a, b));
        }
    }

    let psi_gradient: Vec<f64> = psi_d.iter().map(Taylor::value).collect();
    let lambda_covector: Vec<f64> = lam_t.iter().map(Taylor::value).collect();
    let lambda_gradient: Vec<f64> = (0..n).map(|i| lam_scalar.derivative(&[i])).collect();
    let lambda_discrepancy = lambda_covector
        .iter()
        .zip(&lambda_gradient)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let lambda_vector = (0..n)
        .map(|h| (0..n).map(|a| sj.ginv[[h, a]] * lambda_covector[a]).sum())
        .collect();

    let (mut psi_tensor, mut lambda_derivative, mut mu, mut mu_gradient) = (None, None, None, None);
    if order >= 2 {
        // covariant derivative of a covector field carried as Taylor series
        let nabla = |w: &[Taylor]| -> Vec<Taylor> {
            (0..n * n)
                .map(|f| {
                    let (i, j) = (f / n, f % n);
                    let mut acc = w[i].d(j);
                    for a in 0..n {
                        acc.add_product(-1.0, s.gamma(a, i, j), &w[a]);
                    }
                    acc
                })
                .collect()
        };
        let psi_cd = nabla(&psi_d);
        psi_tensor = Some(Tensor::from_fn(n, |[i, j]| {
            psi_cd[i * n + j].value() - psi_gradient[i] * psi_gradient[j]
        }));
        let lam_cd = nabla(&lam_t);
        lambda_derivative = Some(Tensor::from_fn(n, |[i, j]| lam_cd[i * n + j].value()));
        let mut mu_t = Taylor::zero(space, order - 2);
        for a in 0..n {
            for b in 0..n {
                mu_t.add_product(1.0, &lam_cd[a * n + b], s.ginv.at(a, b));
            }
        }
        mu = Some(mu_t.value());
        if order >= 3 {
            mu_gradient = Some((0..n).map(|k| mu_t.derivative(&[k])).collect());
        }
    }

    let eval = MappingEval {
        point: p.to_vec(),
        psi: psi_t.value(),
        psi_gradient,
        psi_tensor,
        a: Tensor::from_fn(n, |[i, j]| a_t[i * n + j].value()),
        lambda_covector,
        lambda: lam_scalar.value(),
        lambda_gradient,
        lambda_discrepancy,
        lambda_vector,
        lambda_derivative,
        mu,
        mu_gradient,
        k: None,
        k_bar: None,
        big_lambda: None,
    };
    let a_partial = Tensor::from_fn(n, |[i, j, k]| a_t[i * n + j].derivative(&[k]));
    let source_christoffel = Tensor::from_fn(n, |[h, i, j]| s.gamma(h, i, j).value());
    let target_christoffel = Tensor::from_fn(n, |[h, i, j]| t.gamma(h, i, j).value());
    let (source_curvature, target_curvature) = if order >= 2 {
        (Some(curvature(&sj, order >= 3)?), Some(curvature(&tj, false)?))
    } else {
        (None, None)
    };
    Ok(PairPoint {
        eval,
        source: sj,
        target: tj,
        a_partial,
        source_christoffel,
        target_christoffel,
        source_curvature,
        target_curvature,
    })
}

/// All pair quantities at `p` from second-order jets.
pub fn mapping_eval(g: &MetricField, gbar: &MetricField, p: &[f64], backend: Backend) -> Result<MappingEval> {
    g.chart().check_compatible(gbar.chart())?;
    Ok(pair_point(g, gbar, p, 2, backend)?.eval)
}

/// A metric pair evaluated over a grid at one jet order. Residuals that need
/// a higher order than the sweep carries return [`Error::Unsupported`].
#[derive(Clone, Debug)]
pub struct PairSweep {
    backend: Backend,
    order: usize,
    grid: Grid,
    points: Vec<PairPoint>,
}

impl PairSweep {
    /// Evaluate at every grid point with jets of `order` (1..=3).
    pub fn new(
        g: &MetricField,
        gbar: &MetricField,
        grid: &Grid,
        backend: Backend,
        order: usize,
        exec: Execution,
    ) -> Result<Self> {
        g.chart().check_compatible(gbar.chart())?;
        if !(1..=3).contains(&order) {
            return Err(Error::Unsupported(format!(
                "pair sweeps use jet orders 1 to 3, got {order}"
            )));
        }
        let points = exec.try_map(&grid.points, |p| pair_point(g, gbar, p, order, backend))?;
        Ok(PairSweep {
            backend,
            order,
            grid: grid.clone(),
            points,
        })
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn evals(&self) -> impl Iterator<Item = &MappingEval> {
        self.points.iter().map(|p| &p.eval)
    }

    pub(crate) fn points(&self) -> &[PairPoint] {
        &self.points
    }

    pub(crate) fn require(&self, order: usize, what: &str) -> Result<()> {
        if self.order < order {
            return Err(Error::Unsupported(format!(
                "{what} needs jets of order {order}; this sweep has order {}",
                self.order
            )));
        }
        Ok(())
    }

    /// `max |ψ_i|` over the grid.
    pub fn max_psi(&self) -> f64 {
        self.evals()
            .flat_map(|e| e.psi_gradient.iter())
            .map(|v| v.abs())
            .fold(0.0, f64::max)
    }

    /// `max |λ_i − ∂_i λ|` over the grid.
    pub fn max_lambda_discrepancy(&self) -> f64 {
        self.evals().map(|e| e.lambda_discrepancy).fold(0.0, f64::max)
    }

    pub(crate) fn report(
        &self,
        equation: &str,
        tolerance: f64,
        per_point: impl Fn(&PairPoint) -> f64,
    ) -> ResidualReport {
        let values = self.points.iter().map(per_point).collect();
        ResidualReport::new(equation, self.backend, tolerance, &self.grid, values)
    }
}

/// Outcome of the geodesic-mapping test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    NotGeodesic,
    TrivialAffine,
    NontrivialGeodesic,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::NotGeodesic => "not_geodesic",
            Classification::TrivialAffine => "trivial_affine",
            Classification::NontrivialGeodesic => "nontrivial_geodesic",
        }
    }

    pub fn is_geodesic(self) -> bool {
        self != Classification::NotGeodesic
    }
}

impl std::str::FromStr for Classification {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "not_geodesic" => Ok(Classification::NotGeodesic),
            "trivial_affine" => Ok(Classification::TrivialAffine),
            "nontrivial_geodesic" => Ok(Classification::NontrivialGeodesic),
            other => Err(format!("unknown classification `{other}`")),
        }
    }
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Classify from the Levi-Civita report and `max |ψ_i|` over the same grid.
pub fn classify_mapping(levi_civita: &ResidualReport, max_psi: f64) -> Classification {
    if !levi_civita.pass {
        Classification::NotGeodesic
    } else if max_psi < NONTRIVIAL_THRESHOLD {
        Classification::TrivialAffine
    } else {
        Classification::NontrivialGeodesic
    }
}
