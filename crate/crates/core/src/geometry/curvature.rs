use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::taylor::{self, JetMatrix, Taylor};
use crate::tensor::Tensor;

use super::{metric_jet, Backend, Grid, MetricField, MetricJet};

/// A metric expanded as Taylor polynomials around one point, with its
/// inverse, `ln |det g|` and Christoffel symbols carried to matching order.
#[derive(Clone, Debug)]
pub(crate) struct MetricTaylor {
    pub n: usize,
    pub order: usize,
    pub g: JetMatrix,
    pub ginv: JetMatrix,
    pub logdet: Taylor,
    /// `Γ^h_ij` at `(h·n + i)·n + j`, one order below the metric.
    pub gamma: Vec<Taylor>,
}

impl MetricTaylor {
    /// Expand `jet` truncated to `order`.
    pub fn from_jet(jet: &MetricJet, order: usize) -> Result<Self> {
        assert!(
            order <= jet.order,
            "jet of order {} cannot supply order {order}",
            jet.order
        );
        let n = jet.dim();
        let space = taylor::space(n);
        let g = JetMatrix::from_fn(n, |f| {
            let (i, j) = (f / n, f % n);
            Taylor::from_derivatives(space, order, |vars| jet.partial(i, j, vars))
        });
        let (ginv, logdet, det) = g.inverse_and_log_det().ok_or_else(|| Error::SingularMetric {
            point: jet.point.clone(),
            det: jet.det,
        })?;
        debug_assert!((det - jet.det).abs() <= 1e-9 * det.abs().max(1e-300));
        let gamma = if order == 0 {
            Vec::new()
        } else {
            // Γ_αij = ½ (∂_i g_αj + ∂_j g_αi − ∂_α g_ij)
            let dg: Vec<Vec<Taylor>> = g.e.iter().map(|t| (0..n).map(|k| t.d(k)).collect()).collect();
            let dgi = |i: usize, j: usize, k: usize| &dg[i * n + j][k];
            let mut lowered = Vec::with_capacity(n * n * n);
            for a in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let mut t = dgi(a, j, i) + dgi(a, i, j);
                        t -= dgi(i, j, a);
                        lowered.push(t.scale(0.5));
                    }
                }
            }
            let mut gamma = Vec::with_capacity(n * n * n);
            for h in 0..n {
                for ij in 0..n * n {
                    let mut acc = Taylor::zero(space, order - 1);
                    for a in 0..n {
                        acc.add_product(1.0, ginv.at(h, a), &lowered[a * n * n + ij]);
                    }
                    gamma.push(acc);
                }
            }
            gamma
        };
        Ok(MetricTaylor {
            n,
            order,
            g,
            ginv,
            logdet,
            gamma,
        })
    }

    pub fn gamma(&self, h: usize, i: usize, j: usize) -> &Taylor {
        &self.gamma[(h * self.n + i) * self.n + j]
    }

    /// `R^h_ijk` at `((h·n + i)·n + j)·n + k`, two orders below the metric.
    pub fn riemann(&self) -> Vec<Taylor> {
        let n = self.n;
        assert!(self.order >= 2, "curvature needs a second-order expansion");
        let mut out = Vec::with_capacity(n.pow(4));
        for h in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut t = self.gamma(h, i, k).d(j);
                        t -= &self.gamma(h, i, j).d(k);
                        for a in 0..n {
                            t.add_product(1.0, self.gamma(h, j, a), self.gamma(a, i, k));
                            t.add_product(-1.0, self.gamma(h, k, a), self.gamma(a, i, j));
                        }
                        out.push(t);
                    }
                }
            }
        }
        out
    }

    /// `R_ij = R^α_iαj` at `i·n + j`.
    pub fn ricci(&self, riemann: &[Taylor]) -> Vec<Taylor> {
        let n = self.n;
        let idx = |h: usize, i: usize, j: usize, k: usize| ((h * n + i) * n + j) * n + k;
        (0..n * n)
            .map(|f| {
                let (i, j) = (f / n, f % n);
                let mut t = riemann[idx(0, i, 0, j)].clone();
                for a in 1..n {
                    t += &riemann[idx(a, i, a, j)];
                }
                t
            })
            .collect()
    }
}

/// Curvature quantities of one metric at one point.
///
/// Index layout follows the written order of the indices, with derivative
/// indices last: `christoffel_derivative[[h, i, j, k]] = ∂_k Γ^h_ij`,
/// `nabla_riemann[[h, i, j, k, m]] = ∇_m R^h_ijk`, `nabla_ricci[[i, j, m]] = ∇_m R_ij`.
#[derive(Clone, Debug, Serialize)]
pub struct CurvatureEval {
    pub point: Vec<f64>,
    pub metric: Tensor<2>,
    pub metric_inverse: Tensor<2>,
    pub christoffel: Tensor<3>,
    pub christoffel_derivative: Tensor<4>,
    pub riemann: Tensor<4>,
    pub ricci: Tensor<2>,
    pub scalar: f64,
    /// `R^α_l = g^{αβ} R_βl`, indexed `[α, l]`.
    pub ricci_mixed: Tensor<2>,
    /// `g^{βk} R^α_ikl`, indexed `[α, i, l, β]`.
    pub riemann_mixed: Tensor<4>,
    pub weyl: Tensor<4>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nabla_riemann: Option<Tensor<5>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nabla_ricci: Option<Tensor<3>>,
    /// `g^{αi} g^{βm} ∇_m R_ik`, indexed `[α, k, β]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ricci_gradient_mixed: Option<Tensor<3>>,
    /// `g^{αi} g^{βj} ∇_k R_ij`, indexed `[α, β, k]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ricci_gradient_upper: Option<Tensor<3>>,
}

impl CurvatureEval {
    pub fn dim(&self) -> usize {
        self.metric.dim()
    }
}

/// `Γ^h_ij` from a jet of order ≥ 1, indexed `[h, i, j]`.
pub fn christoffel(jet: &MetricJet) -> Result<Tensor<3>> {
    if jet.order < 1 {
        return Err(Error::Unsupported("Christoffel symbols need a first-order jet".into()));
    }
    let mt = MetricTaylor::from_jet(jet, 1)?;
    Ok(Tensor::from_fn(jet.dim(), |[h, i, j]| mt.gamma(h, i, j).value()))
}

/// Projective curvature `W^h_ijk = R^h_ijk + (δ^h_k R_ij − δ^h_j R_ik)/(n−1)`.
pub fn weyl_projective(riemann: &Tensor<4>, ricci: &Tensor<2>) -> Tensor<4> {
    let n = riemann.dim();
    let c = 1.0 / (n as f64 - 1.0);
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    Tensor::from_fn(n, |[h, i, j, k]| {
        riemann[[h, i, j, k]] + c * (delta(h, k) * ricci[[i, j]] - delta(h, j) * ricci[[i, k]])
    })
}

/// Full curvature evaluation. `need_derivatives` adds the covariant
/// derivatives of the Riemann and Ricci tensors and requires a third-order jet.
pub fn curvature(jet: &MetricJet, need_derivatives: bool) -> Result<CurvatureEval> {
    let order = if need_derivatives { 3 } else { 2 };
    if jet.order < order {
        return Err(Error::Unsupported(format!(
            "curvature{} needs a jet of order {order}, got {}",
            if need_derivatives { " derivatives" } else { "" },
            jet.order
        )));
    }
    let n = jet.dim();
    let mt = MetricTaylor::from_jet(jet, order)?;
    let riem_t = mt.riemann();
    let ric_t = mt.ricci(&riem_t);
    let r4 = |h: usize, i: usize, j: usize, k: usize| ((h * n + i) * n + j) * n + k;

    let christoffel = Tensor::from_fn(n, |[h, i, j]| mt.gamma(h, i, j).value());
    let christoffel_derivative = Tensor::from_fn(n, |[h, i, j, k]| mt.gamma(h, i, j).derivative(&[k]));
    let riemann = Tensor::from_fn(n, |[h, i, j, k]| riem_t[r4(h, i, j, k)].value());
    let ricci = Tensor::from_fn(n, |[i, j]| ric_t[i * n + j].value());
    let ginv = &jet.ginv;
    let ricci_mixed = Tensor::from_fn(n, |[a, l]| (0..n).map(|b| ginv[[a, b]] * ricci[[b, l]]).sum());
    let scalar = (0..n).map(|a| ricci_mixed[[a, a]]).sum();
    let riemann_mixed = Tensor::from_fn(n, |[a, i, l, b]| {
        (0..n).map(|k| ginv[[b, k]] * riemann[[a, i, k, l]]).sum()
    });
    let weyl = weyl_projective(&riemann, &ricci);

    let (mut nabla_riemann, mut nabla_ricci, mut grad_mixed, mut grad_upper) = (None, None, None, None);
    if need_derivatives {
        let gam = &christoffel;
        let nr = Tensor::from_fn(n, |[h, i, j, k, m]| {
            let mut v = riem_t[r4(h, i, j, k)].derivative(&[m]);
            for a in 0..n {
                v += gam[[h, m, a]] * riemann[[a, i, j, k]]
                    - gam[[a, m, i]] * riemann[[h, a, j, k]]
                    - gam[[a, m, j]] * riemann[[h, i, a, k]]
                    - gam[[a, m, k]] * riemann[[h, i, j, a]];
            }
            v
        });
        let nric = Tensor::from_fn(n, |[i, j, m]| {
            let mut v = ric_t[i * n + j].derivative(&[m]);
            for a in 0..n {
                v -= gam[[a, m, i]] * ricci[[a, j]] + gam[[a, m, j]] * ricci[[i, a]];
            }
            v
        });
        // g^{αi} ∇_m R_ik, indexed [α, k, m]
        let raised = Tensor::from_fn(n, |[a, k, m]| (0..n).map(|i| ginv[[a, i]] * nric[[i, k, m]]).sum());
        grad_mixed = Some(Tensor::from_fn(n, |[a, k, b]| {
            (0..n).map(|m| ginv[[b, m]] * raised[[a, k, m]]).sum()
        }));
        grad_upper = Some(Tensor::from_fn(n, |[a, b, k]| {
            (0..n).map(|j| ginv[[b, j]] * raised[[a, j, k]]).sum()
        }));
        nabla_riemann = Some(nr);
        nabla_ricci = Some(nric);
    }

    Ok(CurvatureEval {
        point: jet.point.clone(),
        metric: jet.g.clone(),
        metric_inverse: jet.ginv.clone(),
        christoffel,
        christoffel_derivative,
        riemann,
        ricci,
        scalar,
        ricci_mixed,
        riemann_mixed,
        weyl,
        nabla_riemann,
        nabla_ricci,
        ricci_gradient_mixed: grad_mixed,
        ricci_gradient_upper: grad_upper,
    })
}

/// [`curvature`] at every grid point.
pub fn curvature_sweep(
    m: &MetricField,
    grid: &Grid,
    backend: Backend,
    need_derivatives: bool,
    exec: Execution,
) -> Result<Vec<CurvatureEval>> {
    let order = if need_derivatives { 3 } else { 2 };
    exec.try_map(&grid.points, |p| {
        curvature(&metric_jet(m, p, order, backend)?, need_derivatives)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{flat, gnomonic, klein, polar, warped};

    fn eval(m: &MetricField, p: &[f64], derivs: bool) -> CurvatureEval {
        let order = if derivs { 3 } else { 2 };
        curvature(&metric_jet(m, p, order, Backend::Analytic).unwrap(), derivs).unwrap()
    }

    /// Christoffel symbols straight from the textbook formula on a jet.
    fn christoffel_oracle(j: &MetricJet) -> Tensor<3> {
        let n = j.dim();
        let dg = j.dg.as_ref().unwrap();
        Tensor::from_fn(n, |[h, i, jj]| {
            (0..n)
                .map(|a| 0.5 * j.ginv[[h, a]] * (dg[[a, jj, i]] + dg[[a, i, jj]] - dg[[i, jj, a]]))
                .sum()
        })
    }

    #[test]
    fn polar_christoffels() {
        let m = polar();
        let jet = metric_jet(&m, &[2.0, 0.5], 1, Backend::Analytic).unwrap();
        let gam = christoffel(&jet).unwrap();
        assert!((gam[[0, 1, 1]] + 2.0).abs() < 1e-14);
        assert!((gam[[1, 0, 1]] - 0.5).abs() < 1e-14);
        assert!((gam[[1, 1, 0]] - 0.5).abs() < 1e-14);
        let fd = metric_jet(&m, &[2.0, 0.5], 1, Backend::FiniteDifference).unwrap();
        assert!(gam.max_abs_diff(&christoffel_oracle(&fd)) < 1e-8);
    }

    #[test]
    fn gnomonic_christoffels_vanish_at_origin() {
        let fd = metric_jet(&gnomonic(3), &[0.0; 3], 1, Backend::FiniteDifference).unwrap();
        assert!(christoffel_oracle(&fd).max_abs() < 1e-9);
        let jet = metric_jet(&gnomonic(3), &[0.0; 3], 1, Backend::Analytic).unwrap();
        assert!(christoffel(&jet).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn christoffels_match_oracle_off_axis() {
        let m = klein(3);
        let jet = metric_jet(&m, &[0.1, -0.2, 0.3], 1, Backend::Analytic).unwrap();
        let gam = christoffel(&jet).unwrap();
        assert!(gam.max_abs_diff(&christoffel_oracle(&jet)) < 1e-13);
        for ([h, i, j], v) in gam.indexed() {
            assert_eq!(v, gam[[h, j, i]]);
        }
    }

    #[test]
    fn polar_form_is_flat() {
        let c = eval(&polar(), &[1.7, 0.3], true);
        assert!(c.riemann.max_abs() < 1e-12);
        assert!(c.nabla_riemann.unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn unit_sphere_scalar_curvature_is_two() {
        let m = gnomonic(2);
        let pts = m.chart().grid(4).points;
        for p in pts.iter().take(10) {
            let c = eval(&m, p, false);
            assert!((c.scalar - 2.0).abs() < 1e-9, "{p:?}: {}", c.scalar);
        }
    }

    #[test]
    fn hyperbolic_scalar_curvature() {
        let c = eval(&klein(3), &[0.2, 0.1, -0.3], false);
        assert!((c.scalar + 6.0).abs() < 1e-9);
    }

    #[test]
    fn sphere_is_projectively_flat_and_parallel() {
        let c = eval(&gnomonic(3), &[0.3, -0.1, 0.2], true);
        assert!(c.weyl.max_abs() < 1e-9);
        assert!(c.nabla_ricci.as_ref().unwrap().max_abs() < 1e-9);
        assert!(c.nabla_riemann.as_ref().unwrap().max_abs() < 1e-9);
    }

    #[test]
    fn weyl_vanishes_in_dimension_two() {
        let c = eval(&warped(2), &[0.4, 0.2], false);
        assert!(c.riemann.max_abs() > 1e-3);
        assert!(c.weyl.max_abs() < 1e-10);
    }

    #[test]
    fn algebraic_symmetries() {
        for m in [warped(3), gnomonic(4), klein(3), warped(4)] {
            let n = m.dim();
            let p: Vec<f64> = (0..n).map(|i| 0.1 * (i as f64 + 1.0) - 0.15).collect();
            let c = eval(&m, &p, true);
            let r = &c.riemann;
            for ([h, i, j, k], v) in r.indexed() {
                assert!((v + r[[h, i, k, j]]).abs() < 1e-12);
                let bianchi = v + r[[h, j, k, i]] + r[[h, k, i, j]];
                assert!(bianchi.abs() < 1e-9);
            }
            assert!(c.ricci.asymmetry() < 1e-9);
            for i in 0..n {
                for j in 0..n {
                    let trace: f64 = (0..n).map(|a| c.weyl[[a, i, j, a]]).sum();
                    assert!(trace.abs() < 1e-9);
                }
            }
            // contracted second Bianchi: ∇^α R_αk = ½ ∂_k R
            let grad = c.ricci_gradient_mixed.as_ref().unwrap();
            let upper = c.ricci_gradient_upper.as_ref().unwrap();
            for k in 0..n {
                let div: f64 = (0..n)
                    .map(|a| (0..n).map(|b| c.metric[[a, b]] * upper[[a, b, k]]).sum::<f64>())
                    .sum();
                let lhs: f64 = (0..n)
                    .map(|a| (0..n).map(|b| c.metric[[a, b]] * grad[[a, k, b]]).sum::<f64>())
                    .sum();
                assert!((lhs - 0.5 * div).abs() < 1e-9, "{lhs} vs {div}");
            }
        }
    }

    #[test]
    fn curvature_is_scale_invariant() {
        let m = warped(3);
        let p = [0.3, -0.2, 0.5];
        let a = eval(&m, &p, false);
        let b = eval(&m.scaled(-2.5), &p, false);
        assert!(a.riemann.max_abs_diff(&b.riemann) < 1e-9);
        assert!(a.ricci.max_abs_diff(&b.ricci) < 1e-9);
    }

    #[test]
    fn flat_has_no_curvature() {
        let c = eval(&flat(4), &[0.1, 0.2, 0.3, 0.4], true);
        assert_eq!(c.riemann.max_abs(), 0.0);
        assert_eq!(c.scalar, 0.0);
    }

    #[test]
    fn insufficient_order_is_rejected() {
        let jet = metric_jet(&flat(2), &[0.0, 0.0], 2, Backend::Analytic).unwrap();
        assert!(curvature(&jet, true).is_err());
        assert!(curvature(&jet, false).is_ok());
    }
}
