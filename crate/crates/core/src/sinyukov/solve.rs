use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::{christoffel, metric_jet, Backend, Grid, MetricField};
use crate::mapping::{reconstruct_gbar, Classification, Reconstruction, ResidualReport};
use crate::tensor::Tensor;

use super::{integrate_segment, SinyukovState};

/// Threshold on `‖λ‖∞` and on `‖a − (g^{ij}a_ij/n) g‖∞` below which a grid
/// solution is the trivial parallel family.
pub const TRIVIAL_THRESHOLD: f64 = 1e-8;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SolveOptions {
    /// RK4 step along staircase segments.
    pub step: f64,
    /// Offset of the side integrations used to differentiate the
    /// reconstructed metric.
    pub verify_offset: f64,
    /// Tolerance of the Levi-Civita check on the reconstructed pair.
    pub tolerance: f64,
    #[serde(skip)]
    pub exec: Execution,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            step: 0.01,
            verify_offset: 1e-4,
            tolerance: 1e-6,
            exec: Execution::default(),
        }
    }
}

/// Solution of the closed system over a grid, the target metric rebuilt from
/// it, and the check that the rebuilt pair is a geodesic mapping.
#[derive(Clone, Debug, Serialize)]
pub struct GridSolution {
    pub base: Vec<f64>,
    pub step: f64,
    pub path_order: String,
    pub points: Vec<Vec<f64>>,
    pub states: Vec<SinyukovState>,
    pub reconstructions: Vec<Reconstruction>,
    /// Levi-Civita residual of `g` against the reconstructed values, with
    /// derivatives of `ḡ` and `Ψ` from side integrations.
    pub verification: ResidualReport,
    pub max_lambda: f64,
    pub max_a_deviation: f64,
    pub trivial: bool,
    pub classification: Classification,
}

fn key(p: &[f64]) -> Vec<u64> {
    p.iter().map(|x| x.to_bits()).collect()
}

/// `‖a − (g^{ij} a_ij / n) g‖∞`.
fn deviation_from_metric(g: &Tensor<2>, a: &Tensor<2>) -> Option<f64> {
    let n = g.dim();
    let ginv = Tensor::from_matrix(&g.to_matrix().try_inverse()?);
    let trace: f64 = a.indexed().map(|([i, j], v)| ginv[[i, j]] * v).sum();
    let c = trace / n as f64;
    Some(a.zip_with(g, |x, y| x - c * y).max_abs())
}

/// Integrate the closed system from `s0` at `base` to every grid node along
/// axis-ordered staircases (first coordinate first), rebuild `ḡ` at every
/// node, and check the rebuilt pair. Segments shared between staircases are
/// integrated once.
pub fn solve_on_grid(
    g: &MetricField,
    s0: &SinyukovState,
    base: &[f64],
    grid: &Grid,
    opts: &SolveOptions,
) -> Result<GridSolution> {
    let n = g.dim();
    if s0.dim() != n || base.len() != n {
        return Err(Error::Path("seed, base point and metric dimensions differ".into()));
    }
    if !g.chart().contains(base) {
        return Err(Error::OutOfDomain { point: base.to_vec() });
    }
    if let Some(p) = grid.points.iter().find(|p| !g.chart().contains(p)) {
        return Err(Error::OutOfDomain { point: p.clone() });
    }
    let corner = |p: &[f64], d: usize| -> Vec<f64> { p[..d].iter().chain(&base[d..]).copied().collect() };

    let mut level: BTreeMap<Vec<u64>, SinyukovState> = BTreeMap::new();
    level.insert(key(base), s0.clone());
    for d in 1..=n {
        let mut targets: BTreeMap<Vec<u64>, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for p in &grid.points {
            let (from, to) = (corner(p, d - 1), corner(p, d));
            targets.entry(key(&to)).or_insert((from, to));
        }
        let jobs: Vec<(Vec<u64>, Vec<f64>, Vec<f64>)> = targets.into_iter().map(|(k, (f, t))| (k, f, t)).collect();
        let states = opts.exec.try_map(&jobs, |(_, from, to)| {
            let start = &level[&key(from)];
            integrate_segment(g, from, to, opts.step, start, 0.0)
        })?;
        level = jobs.into_iter().map(|(k, _, _)| k).zip(states).collect();
    }
    let states: Vec<SinyukovState> = grid.points.iter().map(|p| level[&key(p)].clone()).collect();

    let node_data = |(p, s): (&Vec<f64>, &SinyukovState)| -> Result<(Reconstruction, f64, f64)> {
        let rebuild = |q: &[f64], st: &SinyukovState| -> Result<Reconstruction> {
            reconstruct_gbar(&g.eval(q)?, &st.a()).ok_or_else(|| Error::DegenerateSolution { point: q.to_vec() })
        };
        let centre = rebuild(p, s)?;
        let delta = opts.verify_offset;
        let mut dgb = Tensor::<3>::zeros(n);
        let mut psi = vec![0.0; n];
        for k in 0..n {
            let mut sides = Vec::with_capacity(2);
            for sign in [1.0, -1.0] {
                let mut q = p.clone();
                q[k] += sign * delta;
                let st = integrate_segment(g, p, &q, opts.step, s, 0.0)?;
                sides.push(rebuild(&q, &st)?);
            }
            for ([i, j], v) in sides[0].gbar.indexed() {
                dgb[[i, j, k]] = (v - sides[1].gbar[[i, j]]) / (2.0 * delta);
            }
            psi[k] = (sides[0].psi - sides[1].psi) / (2.0 * delta);
        }
        let gam = christoffel(&metric_jet(g, p, 1, Backend::Analytic)?)?;
        let gb = &centre.gbar;
        let residual = Tensor::<3>::from_fn(n, |[i, j, k]| {
            let mut cd = dgb[[i, j, k]];
            for a in 0..n {
                cd -= gam[[a, k, i]] * gb[[a, j]] + gam[[a, k, j]] * gb[[i, a]];
            }
            cd - 2.0 * psi[k] * gb[[i, j]] - psi[i] * gb[[j, k]] - psi[j] * gb[[i, k]]
        })
        .max_abs();
        let deviation = deviation_from_metric(&g.eval(p)?, &s.a()).ok_or_else(|| Error::SingularMetric {
            point: p.clone(),
            det: 0.0,
        })?;
        Ok((centre, residual, deviation))
    };
    let pairs: Vec<(&Vec<f64>, &SinyukovState)> = grid.points.iter().zip(&states).collect();
    let per_node = opts.exec.try_map(&pairs, |&pair| node_data(pair))?;

    let mut reconstructions = Vec::with_capacity(per_node.len());
    let mut residuals = Vec::with_capacity(per_node.len());
    let mut max_a_deviation: f64 = 0.0;
    for (r, res, dev) in per_node {
        reconstructions.push(r);
        residuals.push(res);
        max_a_deviation = max_a_deviation.max(dev);
    }
    let verification = ResidualReport::new(
        "levi-civita-reconstructed",
        Backend::Analytic,
        opts.tolerance,
        grid,
        residuals,
    );
    let max_lambda = states
        .iter()
        .flat_map(|s| s.lambda.iter())
        .map(|v| v.abs())
        .fold(0.0, f64::max);
    let trivial = max_lambda < TRIVIAL_THRESHOLD && max_a_deviation < TRIVIAL_THRESHOLD;
    let classification = match (verification.pass, trivial) {
        (false, _) => Classification::NotGeodesic,
        (true, true) => Classification::TrivialAffine,
        (true, false) => Classification::NontrivialGeodesic,
    };
    let names = g.chart().coords().join(", then ");
    Ok(GridSolution {
        base: base.to_vec(),
        step: opts.step,
        path_order: format!("axis-ordered staircase from the base point: {names}"),
        points: grid.points.clone(),
        states,
        reconstructions,
        verification,
        max_lambda,
        max_a_deviation,
        trivial,
        classification,
    })
}
