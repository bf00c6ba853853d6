use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{self, Expr};
use crate::taylor::{self, MAX_ORDER};
use crate::tensor::Tensor;

use super::Chart;

/// Source of metric derivatives.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    /// Exact symbolic derivatives of the component expressions.
    #[default]
    Analytic,
    /// Central differences of evaluated components.
    FiniteDifference,
}

impl Backend {
    /// Default residual tolerance for this backend.
    pub fn default_tolerance(self) -> f64 {
        match self {
            Backend::Analytic => 1e-8,
            Backend::FiniteDifference => 1e-4,
        }
    }
}

/// Base steps of the central stencils, per derivative order, before the
/// `(1 + |x_i|)` scaling. Higher orders use wider steps to keep roundoff,
/// which grows like `ε / h^k`, below the truncation error.
pub const FD_BASE_STEPS: [f64; MAX_ORDER + 1] = [0.0, 1e-5, 1e-4, 1e-3];

/// Index of `(i, j)` in the row-major upper triangle.
pub(crate) fn tri(n: usize, i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    a * n - a * (a + 1) / 2 + b
}

/// A metric given by symbolic components on a chart.
#[derive(Clone, Debug)]
pub struct MetricField {
    chart: Chart,
    name: Option<String>,
    /// Upper triangle, row-major.
    components: Vec<Expr>,
    /// `derivs[d-1][c][k]`: order-`d` derivative of component `c` along the
    /// `k`-th nondecreasing index tuple of length `d`.
    derivs: [OnceLock<Vec<Vec<Expr>>>; MAX_ORDER],
}

impl MetricField {
    /// Build from the upper triangle `g_11, g_12, …, g_1n, g_22, …, g_nn`.
    pub fn from_upper(chart: Chart, components: Vec<Expr>) -> Result<Self> {
        let n = chart.dim();
        if components.len() != n * (n + 1) / 2 {
            return Err(Error::Metric(format!(
                "expected {} upper-triangle components, got {}",
                n * (n + 1) / 2,
                components.len()
            )));
        }
        for (c, e) in components.iter().enumerate() {
            if let Some(v) = e.max_var() {
                if v >= n {
                    return Err(Error::Metric(format!(
                        "component {c} references coordinate {v} of a {n}-dimensional chart"
                    )));
                }
            }
        }
        Ok(MetricField {
            chart,
            name: None,
            components,
            derivs: Default::default(),
        })
    }

    /// Build from a full `n × n` array, which must be symmetric as expressions.
    pub fn from_full(chart: Chart, rows: Vec<Vec<Expr>>) -> Result<Self> {
        let n = chart.dim();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Metric(format!("component array is not {n}×{n}")));
        }
        let mut upper = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                if rows[i][j] != rows[j][i] {
                    return Err(Error::Metric(format!(
                        "g[{}][{}] and g[{}][{}] differ",
                        i + 1,
                        j + 1,
                        j + 1,
                        i + 1
                    )));
                }
                upper.push(rows[i][j].clone());
            }
        }
        Self::from_upper(chart, upper)
    }

    /// Parse upper-triangle component strings over the chart's coordinates.
    pub fn parse_upper(chart: Chart, components: &[&str]) -> Result<Self> {
        let parsed = components
            .iter()
            .map(|s| expr::parse(s, chart.coords()))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::from_upper(chart, parsed)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn component(&self, i: usize, j: usize) -> &Expr {
        &self.components[tri(self.dim(), i, j)]
    }

    /// The metric `c · g` on the same chart.
    pub fn scaled(&self, c: f64) -> MetricField {
        let components = self
            .components
            .iter()
            .map(|e| Expr::mul(Expr::constant(c), e.clone()))
            .collect();
        MetricField {
            chart: self.chart.clone(),
            name: self.name.as_ref().map(|n| format!("{c}*{n}")),
            components,
            derivs: Default::default(),
        }
    }

    fn derivative_table(&self, order: usize) -> &Vec<Vec<Expr>> {
        self.derivs[order - 1].get_or_init(|| {
            let space = taylor::space(self.dim());
            let (lo, hi) = (space.len(order - 1), space.len(order));
            let prev_lo = if order >= 2 { space.len(order - 2) } else { 0 };
            (0..self.components.len())
                .map(|c| {
                    (lo..hi)
                        .map(|m| {
                            let (parent, var) = space.parent(m);
                            let base = if order == 1 {
                                &self.components[c]
                            } else {
                                &self.derivative_table(order - 1)[c][parent - prev_lo]
                            };
                            base.differentiate(var)
                        })
                        .collect()
                })
                .collect()
        })
    }

    /// Upper-triangle component values at `p`.
    pub fn eval_upper(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.components.iter().map(|e| e.eval(p).map_err(Error::from)).collect()
    }

    /// Component matrix at `p`.
    pub fn eval(&self, p: &[f64]) -> Result<Tensor<2>> {
        let upper = self.eval_upper(p)?;
        let n = self.dim();
        Ok(Tensor::from_fn(n, |[i, j]| upper[tri(n, i, j)]))
    }
}

/// Values and partial derivatives of a metric at one point.
///
/// Derivative blocks carry the derivative indices last:
/// `dg[[i, j, k]] = ∂_k g_ij`, `ddg[[i, j, k, l]] = ∂_k ∂_l g_ij`, and so on.
#[derive(Clone, Debug, Serialize)]
pub struct MetricJet {
    pub point: Vec<f64>,
    pub order: usize,
    pub g: Tensor<2>,
    pub ginv: Tensor<2>,
    pub det: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dg: Option<Tensor<3>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ddg: Option<Tensor<4>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dddg: Option<Tensor<5>>,
}

impl MetricJet {
    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    /// `∂_{vars} g_ij`; `vars` may be empty.
    pub fn partial(&self, i: usize, j: usize, vars: &[usize]) -> f64 {
        assert!(
            vars.len() <= self.order,
            "jet of order {} lacks order {}",
            self.order,
            vars.len()
        );
        match *vars {
            [] => self.g[[i, j]],
            [k] => self.dg.as_ref().expect("order 1")[[i, j, k]],
            [k, l] => self.ddg.as_ref().expect("order 2")[[i, j, k, l]],
            [k, l, m] => self.dddg.as_ref().expect("order 3")[[i, j, k, l, m]],
            _ => unreachable!(),
        }
    }

    /// Assemble from upper-triangle derivative values keyed by sorted index
    /// tuples.
    fn assemble(
        point: &[f64],
        order: usize,
        n: usize,
        values: &[f64],
        mut derivative: impl FnMut(usize, &[usize]) -> f64,
    ) -> Result<MetricJet> {
        let g = Tensor::from_fn(n, |[i, j]| values[tri(n, i, j)]);
        let m = g.to_matrix();
        let det = m.determinant();
        let scale = g.max_abs().powi(n as i32);
        let singular = || Error::SingularMetric {
            point: point.to_vec(),
            det,
        };
        if !det.is_finite() || det.abs() < 1e-12 * scale || scale == 0.0 {
            return Err(singular());
        }
        let ginv = Tensor::from_matrix(&m.try_inverse().ok_or_else(singular)?);
        let sorted = |idx: &[usize]| {
            let mut v = idx.to_vec();
            v.sort_unstable();
            v
        };
        let mut at = |i: usize, j: usize, idx: &[usize]| derivative(tri(n, i, j), &sorted(idx));
        let dg = (order >= 1).then(|| Tensor::from_fn(n, |[i, j, k]| at(i, j, &[k])));
        let ddg = (order >= 2).then(|| Tensor::from_fn(n, |[i, j, k, l]| at(i, j, &[k, l])));
        let dddg = (order >= 3).then(|| Tensor::from_fn(n, |[i, j, k, l, p]| at(i, j, &[k, l, p])));
        Ok(MetricJet {
            point: point.to_vec(),
            order,
            g,
            ginv,
            det,
            dg,
            ddg,
            dddg,
        })
    }
}

/// Metric values and derivatives up to `order` (≤ 3) at `p`.
pub fn metric_jet(m: &MetricField, p: &[f64], order: usize, backend: Backend) -> Result<MetricJet> {
    if order > MAX_ORDER {
        return Err(Error::Unsupported(format!("jet order {order} exceeds {MAX_ORDER}")));
    }
    if !m.chart().contains(p) {
        return Err(Error::OutOfDomain { point: p.to_vec() });
    }
    let n = m.dim();
    let values = m.eval_upper(p)?;
    let space = taylor::space(n);
    // Derivatives per order, indexed by [component][tuple index in degree block].
    let mut blocks: Vec<Vec<Vec<f64>>> = Vec::with_capacity(order);
    for d in 1..=order {
        let (lo, hi) = (space.len(d - 1), space.len(d));
        let block = match backend {
            Backend::Analytic => {
                let table = m.derivative_table(d);
                table
                    .iter()
                    .map(|row| row.iter().map(|e| e.eval(p).map_err(Error::from)).collect())
                    .collect::<Result<Vec<Vec<f64>>>>()?
            }
            Backend::FiniteDifference => {
                let steps: Vec<f64> = p.iter().map(|x| FD_BASE_STEPS[d] * (1.0 + x.abs())).collect();
                let per_tuple = (lo..hi)
                    .map(|mono| {
                        let vars = space.tuple(mono);
                        nested_central(&|q: &[f64]| m.eval_upper(q), &mut p.to_vec(), &vars, &steps)
                    })
                    .collect::<Result<Vec<Vec<f64>>>>()?;
                (0..values.len())
                    .map(|c| per_tuple.iter().map(|v| v[c]).collect())
                    .collect()
            }
        };
        blocks.push(block);
    }
    MetricJet::assemble(p, order, n, &values, |c, vars| {
        let d = vars.len();
        let k = space.monomial(vars) - space.len(d - 1);
        blocks[d - 1][c][k]
    })
}

/// Nested central differences `D_{v1} D_{v2} … f` with per-axis steps.
fn nested_central(
    f: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    x: &mut Vec<f64>,
    vars: &[usize],
    steps: &[f64],
) -> Result<Vec<f64>> {
    let Some((&v, rest)) = vars.split_first() else {
        return f(x);
    };
    let orig = x[v];
    let h = steps[v];
    x[v] = orig + h;
    let plus = nested_central(f, x, rest, steps);
    x[v] = orig - h;
    let minus = nested_central(f, x, rest, steps);
    x[v] = orig;
    let (plus, minus) = (plus?, minus?);
    Ok(plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * h)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(n: usize) -> MetricField {
        let chart = Chart::cube(n, -1.0, 1.0).unwrap();
        let comps: Vec<String> = (0..n)
            .flat_map(|i| (i..n).map(move |j| if i == j { "1".to_string() } else { "0".to_string() }))
            .collect();
        let refs: Vec<&str> = comps.iter().map(String::as_str).collect();
        MetricField::parse_upper(chart, &refs).unwrap()
    }

    fn polar() -> MetricField {
        let chart = Chart::new(vec!["x1".into(), "x2".into()], vec![[0.5, 3.0], [-1.0, 1.0]], 0.1).unwrap();
        MetricField::parse_upper(chart, &["1", "0", "x1^2"]).unwrap()
    }

    fn gnomonic2() -> MetricField {
        let chart = Chart::cube(2, -0.45, 0.45).unwrap();
        MetricField::parse_upper(
            chart,
            &[
                "((1 + x1^2 + x2^2) - x1*x1) / (1 + x1^2 + x2^2)^2",
                "(-x1*x2) / (1 + x1^2 + x2^2)^2",
                "((1 + x1^2 + x2^2) - x2*x2) / (1 + x1^2 + x2^2)^2",
            ],
        )
        .unwrap()
    }

    #[test]
    fn triangle_index() {
        assert_eq!(tri(3, 0, 0), 0);
        assert_eq!(tri(3, 0, 2), 2);
        assert_eq!(tri(3, 2, 1), 4);
        assert_eq!(tri(3, 2, 2), 5);
    }

    #[test]
    fn flat_jet_is_trivial() {
        let j = metric_jet(&flat(2), &[0.3, -0.2], 3, Backend::Analytic).unwrap();
        assert_eq!(j.g, Tensor::identity(2));
        assert_eq!(j.det, 1.0);
        assert_eq!(j.dg.as_ref().unwrap().max_abs(), 0.0);
        assert_eq!(j.dddg.as_ref().unwrap().max_abs(), 0.0);
    }

    #[test]
    fn polar_radial_derivative() {
        let j = metric_jet(&polar(), &[2.0, 0.5], 2, Backend::Analytic).unwrap();
        assert_eq!(j.partial(1, 1, &[0]), 4.0);
        assert_eq!(j.partial(1, 1, &[0, 0]), 2.0);
        assert!(j.dddg.is_none());
    }

    #[test]
    fn gnomonic_determinant() {
        let m = gnomonic2();
        let p = [0.3, 0.4];
        // oracle: determinant of the evaluated component matrix
        let g = m.eval(&p).unwrap();
        let oracle = g[[0, 0]] * g[[1, 1]] - g[[0, 1]] * g[[1, 0]];
        assert!((oracle - 0.512).abs() < 1e-12);
        assert!((oracle - 1.25f64.powi(-3)).abs() < 1e-12);
        let j = metric_jet(&m, &p, 0, Backend::Analytic).unwrap();
        assert!((j.det - oracle).abs() < 1e-14);
        let prod = j.g.to_matrix() * j.ginv.to_matrix();
        assert!((prod - nalgebra::DMatrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn finite_differences_agree_with_analytic() {
        let m = gnomonic2();
        let p = [0.2, -0.31];
        let a = metric_jet(&m, &p, 3, Backend::Analytic).unwrap();
        let f = metric_jet(&m, &p, 3, Backend::FiniteDifference).unwrap();
        let scale = |t: f64| 1.0 + t;
        let d1 = a.dg.as_ref().unwrap();
        assert!(d1.max_abs_diff(f.dg.as_ref().unwrap()) < 1e-7 * scale(d1.max_abs()));
        let d2 = a.ddg.as_ref().unwrap();
        assert!(d2.max_abs_diff(f.ddg.as_ref().unwrap()) < 1e-5 * scale(d2.max_abs()));
        let d3 = a.dddg.as_ref().unwrap();
        assert!(d3.max_abs_diff(f.dddg.as_ref().unwrap()) < 1e-3 * scale(d3.max_abs()));
    }

    #[test]
    fn derivative_blocks_are_symmetric() {
        let m = gnomonic2();
        let j = metric_jet(&m, &[0.1, 0.25], 3, Backend::Analytic).unwrap();
        let d3 = j.dddg.unwrap();
        for ([i, jj, k, l, p], v) in d3.indexed() {
            assert_eq!(v, d3[[jj, i, k, l, p]]);
            assert_eq!(v, d3[[i, jj, p, k, l]]);
            assert_eq!(v, d3[[i, jj, l, k, p]]);
        }
    }

    #[test]
    fn singular_and_out_of_domain() {
        let chart = Chart::cube(2, -1.0, 1.0).unwrap();
        let m = MetricField::parse_upper(chart, &["x1^2", "0", "1"]).unwrap();
        assert!(matches!(
            metric_jet(&m, &[0.0, 0.3], 1, Backend::Analytic),
            Err(Error::SingularMetric { .. })
        ));
        assert!(matches!(
            metric_jet(&m, &[2.0, 0.3], 1, Backend::Analytic),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn asymmetric_full_array_is_rejected() {
        let chart = Chart::cube(2, -1.0, 1.0).unwrap();
        let rows = vec![
            vec![Expr::constant(1.0), Expr::var(0)],
            vec![Expr::var(1), Expr::constant(1.0)],
        ];
        assert!(MetricField::from_full(chart, rows).is_err());
    }
}
