use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::{Backend, Grid, MetricField};
use crate::mapping::{PairSweep, ResidualReport};
use crate::tensor::Tensor;

impl PairSweep {
    /// Integrability conditions of the Sinyukov system:
    /// `a_iα R^α_jkl + a_jα R^α_ikl − (g_ik λ_{j,l} + g_jk λ_{i,l} − g_il λ_{j,k} − g_jl λ_{i,k})`.
    pub fn integrability(&self, tolerance: f64) -> Result<ResidualReport> {
        self.require(2, "the integrability conditions")?;
        Ok(self.report("integrability", tolerance, |p| {
            let n = p.dim();
            let r = &p.source_curvature.as_ref().unwrap().riemann;
            let a = &p.eval.a;
            let g = &p.source.g;
            let ld = p.eval.lambda_derivative.as_ref().unwrap();
            Tensor::<4>::from_fn(n, |[i, j, k, l]| {
                let curv: f64 = (0..n)
                    .map(|al| a[[i, al]] * r[[al, j, k, l]] + a[[j, al]] * r[[al, i, k, l]])
                    .sum();
                curv - (g[[i, k]] * ld[[j, l]] + g[[j, k]] * ld[[i, l]]
                    - g[[i, l]] * ld[[j, k]]
                    - g[[j, l]] * ld[[i, k]])
            })
            .max_abs()
        }))
    }

    /// Second Sinyukov equations:
    /// `n λ_{i,l} − μ g_il + a_iα R^α_l − a_αβ g^{βk} R^α_ikl`.
    pub fn second_sinyukov(&self, tolerance: f64) -> Result<ResidualReport> {
        self.require(2, "the second Sinyukov equations")?;
        Ok(self.report("second-sinyukov", tolerance, |p| {
            let n = p.dim();
            let c = p.source_curvature.as_ref().unwrap();
            let a = &p.eval.a;
            let mu = p.eval.mu.unwrap();
            let ld = p.eval.lambda_derivative.as_ref().unwrap();
            Tensor::<2>::from_fn(n, |[i, l]| {
                let mut v = n as f64 * ld[[i, l]] - mu * p.source.g[[i, l]];
                for al in 0..n {
                    v += a[[i, al]] * c.ricci_mixed[[al, l]];
                    for be in 0..n {
                        v -= a[[al, be]] * c.riemann_mixed[[al, i, l, be]];
                    }
                }
                v
            })
            .max_abs()
        }))
    }

    /// Third Sinyukov equations:
    /// `(n−1) μ_,k + 2(n+1) λ_α R^α_k + a_αβ (2 R^α_k,^β − R^αβ_,k)`.
    /// Needs third metric derivatives, so finite-difference sweeps are refused.
    pub fn third_sinyukov(&self, tolerance: f64) -> Result<ResidualReport> {
        if self.backend() != Backend::Analytic {
            return Err(Error::Unsupported(
                "the third Sinyukov equations need third metric derivatives; finite differences are too coarse, use the analytic backend".into(),
            ));
        }
        self.require(3, "the third Sinyukov equations")?;
        Ok(self.report("third-sinyukov", tolerance, |p| {
            let n = p.dim();
            let nf = n as f64;
            let c = p.source_curvature.as_ref().unwrap();
            let grad_mixed = c.ricci_gradient_mixed.as_ref().unwrap();
            let grad_upper = c.ricci_gradient_upper.as_ref().unwrap();
            let a = &p.eval.a;
            let lam = &p.eval.lambda_covector;
            let dmu = p.eval.mu_gradient.as_ref().unwrap();
            (0..n)
                .map(|k| {
                    let mut v = (nf - 1.0) * dmu[k];
                    for al in 0..n {
                        v += 2.0 * (nf + 1.0) * lam[al] * c.ricci_mixed[[al, k]];
                        for be in 0..n {
                            v += a[[al, be]] * (2.0 * grad_mixed[[al, k, be]] - grad_upper[[al, be, k]]);
                        }
                    }
                    v.abs()
                })
                .fold(0.0, f64::max)
        }))
    }
}

/// Integrability conditions of the Sinyukov system over `grid`.
pub fn integrability_residual(
    g: &MetricField,
    gbar: &MetricField,
    grid: &Grid,
    backend: Backend,
    tolerance: f64,
    exec: Execution,
) -> Result<ResidualReport> {
    PairSweep::new(g, gbar, grid, backend, 2, exec)?.integrability(tolerance)
}

/// Second Sinyukov equations over `grid`.
pub fn second_sinyukov_residual(
    g: &MetricField,
    gbar: &MetricField,
    grid: &Grid,
    backend: Backend,
    tolerance: f64,
    exec: Execution,
) -> Result<ResidualReport> {
    PairSweep::new(g, gbar, grid, backend, 2, exec)?.second_sinyukov(tolerance)
}

/// Third Sinyukov equations over `grid` (analytic derivatives only).
pub fn third_sinyukov_residual(
    g: &MetricField,
    gbar: &MetricField,
    grid: &Grid,
    tolerance: f64,
    exec: Execution,
) -> Result<ResidualReport> {
    PairSweep::new(g, gbar, grid, Backend::Analytic, 3, exec)?.third_sinyukov(tolerance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{flat, gnomonic, klein, liouville, warped};

    fn sweep(g: &MetricField, gbar: &MetricField, order: usize) -> PairSweep {
        PairSweep::new(
            g,
            gbar,
            &g.chart().grid(3),
            Backend::Analytic,
            order,
            Execution::Sequential,
        )
        .unwrap()
    }

    fn all(s: &PairSweep, tol: f64) -> [ResidualReport; 3] {
        [
            s.integrability(tol).unwrap(),
            s.second_sinyukov(tol).unwrap(),
            s.third_sinyukov(tol).unwrap(),
        ]
    }

    #[test]
    fn identity_and_scaling_vanish() {
        let g = warped(3);
        for r in all(&sweep(&g, &g, 3), 1e-8) {
            assert!(r.max < 1e-12, "{}: {}", r.equation, r.max);
        }
        let f = flat(3);
        for r in all(&sweep(&f, &f.scaled(2.0), 3), 1e-8) {
            assert_eq!(r.max, 0.0);
        }
    }

    #[test]
    fn constant_curvature_pairs() {
        for n in 2..=4 {
            for g in [gnomonic(n), klein(n)] {
                for r in all(&sweep(&g, &flat(n), 3), 1e-7) {
                    assert!(r.pass, "n={n} {}: {}", r.equation, r.max);
                }
            }
        }
    }

    #[test]
    fn non_constant_curvature_pair() {
        let (g, gbar) = liouville();
        let s = sweep(&g, &gbar, 3);
        assert!(s.levi_civita(1e-8).pass, "{}", s.levi_civita(1e-8).max);
        assert!(s.max_psi() > 1e-2);
        for c in s.points() {
            let cur = c.source_curvature.as_ref().unwrap();
            assert!(cur.nabla_ricci.as_ref().unwrap().max_abs() > 1e-3);
        }
        for r in all(&s, 1e-7) {
            assert!(r.pass, "{}: {}", r.equation, r.max);
        }
    }

    #[test]
    fn negative_control_fails() {
        let s = sweep(&gnomonic(3), &warped(3), 3);
        for r in all(&s, 1e-8) {
            assert!(r.max > 1e-3, "{}: {}", r.equation, r.max);
        }
    }

    #[test]
    fn third_equations_refuse_finite_differences() {
        let g = flat(2);
        let s = PairSweep::new(
            &g,
            &g,
            &g.chart().grid(2),
            Backend::FiniteDifference,
            3,
            Execution::Sequential,
        )
        .unwrap();
        assert!(matches!(s.third_sinyukov(1e-4), Err(Error::Unsupported(_))));
    }
}
