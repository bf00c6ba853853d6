use crate::error::Result;
use crate::exec::Execution;
use crate::geometry::{Backend, Grid, MetricField};
use crate::tensor::Tensor;

use super::{PairPoint, PairSweep, ResidualReport};

fn delta(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// `ḡ_{ij,k} − 2ψ_k ḡ_ij − ψ_i ḡ_jk − ψ_j ḡ_ik` with `,` the source-covariant derivative.
fn levi_civita_at(p: &PairPoint) -> Tensor<3> {
    let n = p.dim();
    let gb = &p.target.g;
    let dgb = p.target.dg.as_ref().expect("first-order jet");
    let gam = &p.source_christoffel;
    let psi = &p.eval.psi_gradient;
    Tensor::from_fn(n, |[i, j, k]| {
        let mut cd = dgb[[i, j, k]];
        for a in 0..n {
            cd -= gam[[a, k, i]] * gb[[a, j]] + gam[[a, k, j]] * gb[[i, a]];
        }
        cd - 2.0 * psi[k] * gb[[i, j]] - psi[i] * gb[[j, k]] - psi[j] * gb[[i, k]]
    })
}

/// `Γ̄^h_ij − Γ^h_ij − ψ_i δ^h_j − ψ_j δ^h_i`.
fn deformation_at(p: &PairPoint) -> Tensor<3> {
    let psi = &p.eval.psi_gradient;
    Tensor::from_fn(p.dim(), |[h, i, j]| {
        p.target_christoffel[[h, i, j]] - p.source_christoffel[[h, i, j]] - psi[i] * delta(h, j) - psi[j] * delta(h, i)
    })
}

/// `a_{ij,k} − λ_i g_jk − λ_j g_ik`.
fn sinyukov_at(p: &PairPoint) -> Tensor<3> {
    let n = p.dim();
    let g = &p.source.g;
    let a = &p.eval.a;
    let gam = &p.source_christoffel;
    let lam = &p.eval.lambda_covector;
    Tensor::from_fn(n, |[i, j, k]| {
        let mut cd = p.a_partial[[i, j, k]];
        for al in 0..n {
            cd -= gam[[al, k, i]] * a[[al, j]] + gam[[al, k, j]] * a[[i, al]];
        }
        cd - lam[i] * g[[j, k]] - lam[j] * g[[i, k]]
    })
}

/// The three curvature-transfer residuals: Riemann, Ricci, projective Weyl.
fn curvature_transform_at(p: &PairPoint) -> [f64; 3] {
    let n = p.dim();
    let c = p.source_curvature.as_ref().expect("second-order sweep");
    let cb = p.target_curvature.as_ref().expect("second-order sweep");
    let psi2 = p.eval.psi_tensor.as_ref().expect("second-order sweep");
    let riemann = Tensor::<4>::from_fn(n, |[h, i, j, k]| {
        cb.riemann[[h, i, j, k]] - c.riemann[[h, i, j, k]] - delta(h, k) * psi2[[i, j]] + delta(h, j) * psi2[[i, k]]
    });
    let n1 = n as f64 - 1.0;
    let ricci = Tensor::<2>::from_fn(n, |[i, j]| cb.ricci[[i, j]] - c.ricci[[i, j]] + n1 * psi2[[i, j]]);
    [riemann.max_abs(), ricci.max_abs(), cb.weyl.max_abs_diff(&c.weyl)]
}

impl PairSweep {
    pub fn levi_civita(&self, tolerance: f64) -> ResidualReport {
        self.report("levi-civita", tolerance, |p| levi_civita_at(p).max_abs())
    }

    pub fn deformation(&self, tolerance: f64) -> ResidualReport {
        self.report("connection-deformation", tolerance, |p| deformation_at(p).max_abs())
    }

    pub fn sinyukov(&self, tolerance: f64) -> ResidualReport {
        self.report("sinyukov", tolerance, |p| sinyukov_at(p).max_abs())
    }

    /// Riemann transfer, Ricci transfer, and `W̄ − W`, in that order.
    pub fn curvature_transform(&self, tolerance: f64) -> Result<[ResidualReport; 3]> {
        self.require(2, "curvature transfer")?;
        let blocks: Vec<[f64; 3]> = self.points().iter().map(curvature_transform_at).collect();
        let names = ["riemann-transform", "ricci-transform", "weyl-invariance"];
        Ok(std::array::from_fn(|b| {
            ResidualReport::new(
                names[b],
                self.backend(),
                tolerance,
                self.grid(),
                blocks.iter().map(|v| v[b]).collect(),
            )
        }))
    }

    /// `max |W|` of the source and target over the grid.
    pub fn max_weyl(&self) -> Result<(f64, f64)> {
        self.require(2, "projective curvature")?;
        let fold = |f: &dyn Fn(&PairPoint) -> f64| self.points().iter().map(f).fold(0.0, f64::max);
        Ok((
            fold(&|p| p.source_curvature.as_ref().unwrap().weyl.max_abs()),
            fold(&|p| p.target_curvature.as_ref().unwrap().weyl.max_abs()),
        ))
    }
}

/// Levi-Civita criterion for `(g, ḡ)` over `grid`.
pub fn levi_civita_residual(
    g: &MetricField,
    gbar: &MetricField,
    grid: &Grid,
    backend: Backend,
    tolerance: f64,
    exec: Execution,
) -> Result<ResidualReport> {
    Ok(PairSweep::new(g, gbar, grid, backend, 1, exec)?.levi_civita(tolerance))
}

/// Linear Sinyukov form of the criterion over `grid`.
pub fn sinyukov_residual(
    g: &MetricField,
    gbar: &MetricField,
    grid: &Grid,
    backend: Backend,
    tolerance: f64,
    exec: Execution,
) -> Result<ResidualReport> {
    Ok(PairSweep::new(g, gbar, grid, backend, 1, exec)?.sinyukov(tolerance))
}

/// Riemann, Ricci and projective Weyl transfer residuals over `grid`.
pub fn curvature_transform_residual(
    g: &MetricField,
    gbar: &MetricField,
    grid: &Grid,
    backend: Backend,
    tolerance: f64,
    exec: Execution,
) -> Result<[ResidualReport; 3]> {
    PairSweep::new(g, gbar, grid, backend, 2, exec)?.curvature_transform(tolerance)
}
