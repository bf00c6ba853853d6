use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::summarize_einstein as summarize;
use crate::geometry::{Backend, EinsteinReport, Grid, MetricField};
use crate::tensor::Tensor;

use super::{PairPoint, PairSweep, ResidualReport};

/// Einstein-transfer identities for a geodesic mapping out of an Einstein
/// space, with the constants of both sides.
#[derive(Clone, Debug, Serialize)]
pub struct EinsteinSuite {
    /// Einstein constant of the source (grid mean).
    pub k: f64,
    /// Target constant extracted pointwise, grid mean.
    pub k_bar: f64,
    pub k_bar_min: f64,
    pub k_bar_max: f64,
    pub per_point_k_bar: Vec<f64>,
    /// Curvature contraction `λ_α R^α_ijk − K(g_ij λ_k − g_ik λ_j)`,
    /// Hessian form `λ_{i,j} − ν g_ij − K a_ij` with `ν = (μ − 2Kλ)/n`,
    /// deformation form `ψ_ij − K̄ ḡ_ij + K g_ij`,
    /// target Einstein form `R̄_ij + (n−1) K̄ ḡ_ij`.
    pub blocks: [ResidualReport; 4],
    pub source: EinsteinReport,
    pub target: EinsteinReport,
    /// All blocks pass and `K̄` is constant to tolerance.
    pub pass: bool,
}

struct PointBlocks {
    k_bar: f64,
    residuals: [f64; 4],
    big_lambda: Tensor<2>,
}

fn blocks_at(p: &PairPoint, k: f64) -> PointBlocks {
    let n = p.dim();
    let nf = n as f64;
    let c = p.source_curvature.as_ref().expect("second-order sweep");
    let cb = p.target_curvature.as_ref().expect("second-order sweep");
    let e = &p.eval;
    let g = &p.source.g;
    let gb = &p.target.g;
    let gbinv = &p.target.ginv;
    let lam = &e.lambda_covector;
    let lam_d = e.lambda_derivative.as_ref().expect("second-order sweep");
    let psi2 = e.psi_tensor.as_ref().expect("second-order sweep");
    let mu = e.mu.expect("second-order sweep");

    let a_res = Tensor::<3>::from_fn(n, |[i, j, kk]| {
        let contraction: f64 = (0..n).map(|a| lam[a] * c.riemann[[a, i, j, kk]]).sum();
        contraction - k * (g[[i, j]] * lam[kk] - g[[i, kk]] * lam[j])
    });
    let nu = (mu - 2.0 * k * e.lambda) / nf;
    let big_lambda = Tensor::<2>::from_fn(n, |[i, j]| lam_d[[i, j]] - k * e.a[[i, j]]);
    let b_res = big_lambda.zip_with(g, |l, gij| l - nu * gij);
    let contract = |t: &Tensor<2>| -> f64 { t.indexed().map(|([i, j], v)| v * gbinv[[i, j]]).sum() };
    let k_bar = (contract(psi2) + k * contract(g)) / nf;
    let c_res = Tensor::<2>::from_fn(n, |[i, j]| psi2[[i, j]] - k_bar * gb[[i, j]] + k * g[[i, j]]);
    let d_res = cb.ricci.zip_with(gb, |r, gbij| r + (nf - 1.0) * k_bar * gbij);
    PointBlocks {
        k_bar,
        residuals: [a_res.max_abs(), b_res.max_abs(), c_res.max_abs(), d_res.max_abs()],
        big_lambda,
    }
}

impl PairSweep {
    /// Einstein-transfer suite. Fails with [`Error::SourceNotEinstein`] when
    /// the source metric is not Einstein on the grid. Fills `k`, `k_bar` and
    /// `big_lambda` of every stored [`super::MappingEval`].
    pub fn einstein_suite(&mut self, tolerance: f64) -> Result<EinsteinSuite> {
        self.require(2, "the Einstein suite")?;
        let (source, target) = {
            let sc: Vec<_> = self
                .points()
                .iter()
                .map(|p| p.source_curvature.clone().unwrap())
                .collect();
            let tc: Vec<_> = self
                .points()
                .iter()
                .map(|p| p.target_curvature.clone().unwrap())
                .collect();
            (
                summarize(&sc, self.backend(), tolerance),
                summarize(&tc, self.backend(), tolerance),
            )
        };
        if !source.is_einstein {
            return Err(Error::SourceNotEinstein {
                residual: source.max_residual,
                k_spread: source.k_spread(),
            });
        }
        let k = source.k;
        let per_point: Vec<PointBlocks> = self.points().iter().map(|p| blocks_at(p, k)).collect();
        let names = [
            "einstein-curvature-contraction",
            "einstein-hessian",
            "einstein-deformation",
            "einstein-target",
        ];
        let blocks: [ResidualReport; 4] = std::array::from_fn(|b| {
            ResidualReport::new(
                names[b],
                self.backend(),
                tolerance,
                self.grid(),
                per_point.iter().map(|v| v.residuals[b]).collect(),
            )
        });
        let per_point_k_bar: Vec<f64> = per_point.iter().map(|v| v.k_bar).collect();
        let k_bar_min = per_point_k_bar.iter().copied().fold(f64::INFINITY, f64::min);
        let k_bar_max = per_point_k_bar.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let k_bar = per_point_k_bar.iter().sum::<f64>() / per_point_k_bar.len().max(1) as f64;
        for (pt, blk) in self.points.iter_mut().zip(per_point) {
            pt.eval.k = Some(k);
            pt.eval.k_bar = Some(blk.k_bar);
            pt.eval.big_lambda = Some(blk.big_lambda);
        }
        let pass = blocks.iter().all(|b| b.pass) && k_bar_max - k_bar_min < tolerance;
        Ok(EinsteinSuite {
            k,
            k_bar,
            k_bar_min,
            k_bar_max,
            per_point_k_bar,
            blocks,
            source,
            target,
            pass,
        })
    }
}

/// Einstein-transfer suite for `(g, ḡ)` over `grid`.
pub fn einstein_suite(
    g: &MetricField,
    gbar: &MetricField,
    grid: &Grid,
    backend: Backend,
    tolerance: f64,
    exec: Execution,
) -> Result<EinsteinSuite> {
    PairSweep::new(g, gbar, grid, backend, 2, exec)?.einstein_suite(tolerance)
}
