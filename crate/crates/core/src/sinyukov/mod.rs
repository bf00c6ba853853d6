//! The Sinyukov hierarchy as residual checks, and the constructive side:
//! integrating the closed linear system in `(a_ij, λ_i, μ)` along paths.

mod residuals;
mod solve;

use std::ops::{Add, Mul};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{curvature, metric_jet, Backend, CurvatureEval, MetricField};
use crate::tensor::Tensor;

pub use residuals::{integrability_residual, second_sinyukov_residual, third_sinyukov_residual};
pub use solve::{solve_on_grid, GridSolution, SolveOptions};

/// Unknowns of the closed system: symmetric `a_ij` stored as its upper
/// triangle (row-major), the covector `λ_i`, and the scalar `μ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SinyukovState {
    pub a_upper: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mu: f64,
}

fn tri(n: usize, i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    a * n - a * (a + 1) / 2 + b
}

impl SinyukovState {
    pub fn zeros(n: usize) -> Self {
        SinyukovState {
            a_upper: vec![0.0; n * (n + 1) / 2],
            lambda: vec![0.0; n],
            mu: 0.0,
        }
    }

    /// From a symmetric `a`; the lower triangle is ignored.
    pub fn new(a: &Tensor<2>, lambda: Vec<f64>, mu: f64) -> Self {
        let n = a.dim();
        assert_eq!(lambda.len(), n);
        let a_upper = (0..n)
            .flat_map(|i| (i..n).map(move |j| (i, j)))
            .map(|(i, j)| a[[i, j]])
            .collect();
        SinyukovState { a_upper, lambda, mu }
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    pub fn a_entry(&self, i: usize, j: usize) -> f64 {
        self.a_upper[tri(self.dim(), i, j)]
    }

    pub fn a(&self) -> Tensor<2> {
        Tensor::from_fn(self.dim(), |[i, j]| self.a_entry(i, j))
    }

    /// The flat vector `(a_upper, λ, μ)` of length `n(n+1)/2 + n + 1`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.a_upper.clone();
        v.extend_from_slice(&self.lambda);
        v.push(self.mu);
        v
    }

    pub fn from_vec(n: usize, v: &[f64]) -> Self {
        let m = n * (n + 1) / 2;
        assert_eq!(v.len(), m + n + 1, "state vector length");
        SinyukovState {
            a_upper: v[..m].to_vec(),
            lambda: v[m..m + n].to_vec(),
            mu: v[m + n],
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.to_vec()
            .iter()
            .zip(other.to_vec())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|v| v.is_finite())
    }

    fn axpy(&self, k: f64, other: &Self) -> Self {
        let v: Vec<f64> = self
            .to_vec()
            .iter()
            .zip(other.to_vec())
            .map(|(a, b)| a + k * b)
            .collect();
        SinyukovState::from_vec(self.dim(), &v)
    }
}

impl Add for &SinyukovState {
    type Output = SinyukovState;
    fn add(self, rhs: &SinyukovState) -> SinyukovState {
        self.axpy(1.0, rhs)
    }
}

impl Mul<&SinyukovState> for f64 {
    type Output = SinyukovState;
    fn mul(self, rhs: &SinyukovState) -> SinyukovState {
        SinyukovState::zeros(rhs.dim()).axpy(self, rhs)
    }
}

/// A polyline through the chart with the RK4 step length used on it.
#[derive(Clone, Debug, Serialize)]
pub struct PathSpec {
    pub waypoints: Vec<Vec<f64>>,
    pub step: f64,
}

impl PathSpec {
    pub fn new(waypoints: Vec<Vec<f64>>, step: f64) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::Path("a path needs at least two waypoints".into()));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Path(format!("step must be positive, got {step}")));
        }
        let n = waypoints[0].len();
        if waypoints.iter().any(|w| w.len() != n) {
            return Err(Error::Path("waypoints have different dimensions".into()));
        }
        Ok(PathSpec { waypoints, step })
    }

    /// Axis-aligned square loop in the `(u, v)` coordinate plane with lower
    /// corner `corner`, traversed `+u, +v, −u, −v`.
    pub fn square_loop(corner: &[f64], u: usize, v: usize, side: f64, step: f64) -> Result<Self> {
        let mut pts = vec![corner.to_vec()];
        for (axis, sign) in [(u, 1.0), (v, 1.0), (u, -1.0), (v, -1.0)] {
            let mut next = pts.last().unwrap().clone();
            next[axis] += sign * side;
            pts.push(next);
        }
        // land exactly on the start point
        *pts.last_mut().unwrap() = corner.to_vec();
        PathSpec::new(pts, step)
    }

    pub fn is_closed(&self) -> bool {
        self.waypoints.first() == self.waypoints.last()
    }

    /// Total Euclidean coordinate length.
    pub fn length(&self) -> f64 {
        self.waypoints.windows(2).map(|w| dist(&w[0], &w[1])).sum()
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Derivative of the state along `direction` (a coordinate vector) given the
/// source curvature with derivatives at the point:
///
/// - `∂_k a_ij = λ_i g_jk + λ_j g_ik + Γ^α_ki a_αj + Γ^α_kj a_iα`
/// - `∂_k λ_i = λ_{i,k} + Γ^α_ki λ_α` with `n λ_{i,k} = μ g_ik − a_iα R^α_k + a_αβ g^{βl} R^α_ilk`
/// - `(n−1) ∂_k μ = −2(n+1) λ_α R^α_k − a_αβ (2 R^α_k,^β − R^αβ_,k)`
pub fn rhs_along(c: &CurvatureEval, direction: &[f64], s: &SinyukovState) -> SinyukovState {
    let n = c.dim();
    let nf = n as f64;
    let g = &c.metric;
    let gam = &c.christoffel;
    let a = s.a();
    let lam = &s.lambda;
    let grad_mixed = c.ricci_gradient_mixed.as_ref().expect("curvature with derivatives");
    let grad_upper = c.ricci_gradient_upper.as_ref().expect("curvature with derivatives");
    let mut out = SinyukovState::zeros(n);
    for (k, &t) in direction.iter().enumerate() {
        if t == 0.0 {
            continue;
        }
        for i in 0..n {
            for j in i..n {
                let mut v = lam[i] * g[[j, k]] + lam[j] * g[[i, k]];
                for al in 0..n {
                    v += gam[[al, k, i]] * a[[al, j]] + gam[[al, k, j]] * a[[i, al]];
                }
                out.a_upper[tri(n, i, j)] += t * v;
            }
            let mut cov = s.mu * g[[i, k]];
            for al in 0..n {
                cov -= a[[i, al]] * c.ricci_mixed[[al, k]];
                for be in 0..n {
                    cov += a[[al, be]] * c.riemann_mixed[[al, i, k, be]];
                }
            }
            let mut v = cov / nf;
            for al in 0..n {
                v += gam[[al, k, i]] * lam[al];
            }
            out.lambda[i] += t * v;
        }
        let mut v = 0.0;
        for al in 0..n {
            v -= 2.0 * (nf + 1.0) * lam[al] * c.ricci_mixed[[al, k]];
            for be in 0..n {
                v -= a[[al, be]] * (2.0 * grad_mixed[[al, k, be]] - grad_upper[[al, be, k]]);
            }
        }
        out.mu += t * v / (nf - 1.0);
    }
    out
}

fn source_curvature(g: &MetricField, p: &[f64]) -> Result<CurvatureEval> {
    curvature(&metric_jet(g, p, 3, Backend::Analytic)?, true)
}

/// `d(state)/dx^k` at `p` for the source metric `g`.
pub fn cauchy_rhs(g: &MetricField, p: &[f64], k: usize, s: &SinyukovState) -> Result<SinyukovState> {
    let mut dir = vec![0.0; g.dim()];
    dir[k] = 1.0;
    Ok(rhs_along(&source_curvature(g, p)?, &dir, s))
}

/// Fixed-step RK4 along the straight segment `from → to` in
/// `ceil(|to − from| / step)` steps. `arc0` offsets reported arc positions.
pub(crate) fn integrate_segment(
    g: &MetricField,
    from: &[f64],
    to: &[f64],
    step: f64,
    s0: &SinyukovState,
    arc0: f64,
) -> Result<SinyukovState> {
    let len = dist(from, to);
    if len == 0.0 {
        return Ok(s0.clone());
    }
    let steps = (len / step).ceil().max(1.0) as usize;
    let dir: Vec<f64> = from.iter().zip(to).map(|(a, b)| b - a).collect();
    let at = |t: f64| -> Vec<f64> { from.iter().zip(&dir).map(|(a, d)| a + t * d).collect() };
    let f =
        |t: f64, s: &SinyukovState| -> Result<SinyukovState> { Ok(rhs_along(&source_curvature(g, &at(t))?, &dir, s)) };
    let dt = 1.0 / steps as f64;
    let mut s = s0.clone();
    for m in 0..steps {
        let t = m as f64 * dt;
        let k1 = f(t, &s)?;
        let k2 = f(t + 0.5 * dt, &s.axpy(0.5 * dt, &k1))?;
        let k3 = f(t + 0.5 * dt, &s.axpy(0.5 * dt, &k2))?;
        let k4 = f(t + dt, &s.axpy(dt, &k3))?;
        s = s
            .axpy(dt / 6.0, &k1)
            .axpy(dt / 3.0, &k2)
            .axpy(dt / 3.0, &k3)
            .axpy(dt / 6.0, &k4);
        if !s.is_finite() {
            return Err(Error::BlowUp {
                arc: arc0 + (m + 1) as f64 * dt * len,
                point: at(t + dt),
            });
        }
    }
    Ok(s)
}

/// State at the end of `path`, starting from `s0` at its first waypoint.
pub fn integrate_along_path(g: &MetricField, path: &PathSpec, s0: &SinyukovState) -> Result<SinyukovState> {
    if s0.dim() != g.dim() || path.waypoints[0].len() != g.dim() {
        return Err(Error::Path("path, state and metric dimensions differ".into()));
    }
    if let Some(w) = path.waypoints.iter().find(|w| !g.chart().contains(w)) {
        return Err(Error::OutOfDomain { point: w.clone() });
    }
    let mut s = s0.clone();
    let mut arc = 0.0;
    for w in path.waypoints.windows(2) {
        s = integrate_segment(g, &w[0], &w[1], path.step, &s, arc)?;
        arc += dist(&w[0], &w[1]);
    }
    Ok(s)
}

/// `‖s_end − s0‖∞` after one traversal of a closed loop.
pub fn holonomy_defect(g: &MetricField, lp: &PathSpec, s0: &SinyukovState) -> Result<f64> {
    if !lp.is_closed() {
        return Err(Error::Path(
            "holonomy needs a closed loop (first waypoint = last)".into(),
        ));
    }
    Ok(integrate_along_path(g, lp, s0)?.max_abs_diff(s0))
}
