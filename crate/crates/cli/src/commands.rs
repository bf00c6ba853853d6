use anyhow::{anyhow, bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use geomap::geodesics::{correspondence_residual, energy_drift, integrate_geodesic, random_seeds};
use geomap::geometry::{curvature_sweep, einstein_check};
use geomap::mapping::{classify_mapping, einstein_suite, mapping_eval};
use geomap::metric_file::MetricSpec;
use geomap::sinyukov::{holonomy_defect, solve_on_grid, SolveOptions};
use geomap::{Backend, Classification, Execution, Grid, MetricField, PairSweep, PathSpec, SinyukovState, Tensor};

/// Result of one command before it is wrapped into a report.
pub struct Outcome {
    pub results: Value,
    pub classification: Option<Classification>,
    pub passed: bool,
    pub grid: Option<Grid>,
    pub tolerance: f64,
}

pub struct Common {
    pub grid: Option<usize>,
    pub backend: Backend,
    pub tol: Option<f64>,
    pub exec: Execution,
}

impl Common {
    fn grid_for(&self, g: &MetricField) -> Grid {
        g.chart()
            .grid(self.grid.unwrap_or_else(|| g.chart().default_grid_size()))
    }

    fn tolerance(&self) -> f64 {
        self.tol.unwrap_or(self.backend.default_tolerance())
    }
}

pub fn verify(g: &MetricSpec, gbar: &MetricSpec, c: &Common) -> Result<Outcome> {
    let grid = c.grid_for(&g.metric);
    let tol = c.tolerance();
    let order = match c.backend {
        Backend::Analytic => 3,
        Backend::FiniteDifference => 2,
    };
    let sweep = PairSweep::new(&g.metric, &gbar.metric, &grid, c.backend, order, c.exec)?;
    let levi_civita = sweep.levi_civita(tol);
    let sinyukov = sweep.sinyukov(tol);
    let [riemann, ricci, weyl] = sweep.curvature_transform(tol)?;
    let (weyl_source, weyl_target) = sweep.max_weyl()?;
    let mut hierarchy = vec![
        serde_json::to_value(sweep.integrability(tol)?)?,
        serde_json::to_value(sweep.second_sinyukov(tol)?)?,
    ];
    let mut skipped = Vec::new();
    match c.backend {
        // third derivatives carry one more order of error than the rest
        Backend::Analytic => hierarchy.push(serde_json::to_value(sweep.third_sinyukov(10.0 * tol)?)?),
        Backend::FiniteDifference => skipped.push(json!({
            "equation": "third-sinyukov",
            "reason": "needs third metric derivatives; run with the analytic backend",
        })),
    }
    let max_psi = sweep.max_psi();
    let classification = classify_mapping(&levi_civita, max_psi);
    let results = json!({
        "equivalence": {
            "levi_civita": levi_civita,
            "sinyukov": sinyukov,
            "agree": levi_civita.pass == sinyukov.pass,
        },
        "connection_deformation": sweep.deformation(tol),
        "curvature": [riemann, ricci, weyl],
        "max_weyl": { "source": weyl_source, "target": weyl_target },
        "hierarchy": hierarchy,
        "skipped": skipped,
        "max_psi": max_psi,
        "max_lambda_discrepancy": sweep.max_lambda_discrepancy(),
    });
    Ok(Outcome {
        results,
        classification: Some(classification),
        passed: classification.is_geodesic(),
        grid: Some(grid),
        tolerance: tol,
    })
}

/// Where the closed system starts.
pub enum Seed {
    FromPair(MetricSpec),
    Trivial,
    Explicit { a: Tensor<2>, lambda: Vec<f64>, mu: f64 },
}

pub fn solve(g: &MetricSpec, seed: Seed, base: Option<Vec<f64>>, step: f64, c: &Common) -> Result<Outcome> {
    if c.backend != Backend::Analytic {
        bail!("solve integrates with analytic curvature derivatives; use --backend analytic");
    }
    let m = &g.metric;
    let n = m.dim();
    let base = base.unwrap_or_else(|| m.chart().domain().iter().map(|[lo, hi]| 0.5 * (lo + hi)).collect());
    if base.len() != n {
        bail!("base point has {} coordinates, the metric has {n}", base.len());
    }
    let (s0, seed_kind) = match seed {
        Seed::FromPair(gbar) => {
            let e = mapping_eval(m, &gbar.metric, &base, Backend::Analytic)
                .with_context(|| format!("evaluating the pair at the base point {base:?}"))?;
            let mu = e.mu.ok_or_else(|| anyhow!("pair evaluation did not produce μ"))?;
            (
                SinyukovState::new(&e.a, e.lambda_covector, mu),
                format!("from-pair {}", gbar.name),
            )
        }
        Seed::Trivial => (
            SinyukovState::new(&m.eval(&base)?, vec![0.0; n], 0.0),
            "trivial".to_string(),
        ),
        Seed::Explicit { a, lambda, mu } => {
            if a.dim() != n || lambda.len() != n {
                bail!("seed dimensions do not match the {n}-dimensional metric");
            }
            if a.asymmetry() > 0.0 {
                bail!("seed tensor a must be symmetric");
            }
            (SinyukovState::new(&a, lambda, mu), "explicit".to_string())
        }
    };
    let grid = c.grid_for(m);
    let opts = SolveOptions {
        step,
        tolerance: c.tol.unwrap_or(SolveOptions::default().tolerance),
        exec: c.exec,
        ..SolveOptions::default()
    };
    let solution = solve_on_grid(m, &s0, &base, &grid, &opts)?;

    // probe loop in the first coordinate plane, turned inward from the base
    let bounds = m.chart().sample_bounds();
    let side = 0.25 * (bounds[0][1] - bounds[0][0]).min(bounds[1][1] - bounds[1][0]);
    let signed = |axis: usize| {
        if base[axis] + side <= m.chart().domain()[axis][1] {
            side
        } else {
            -side
        }
    };
    let (su, sv) = (signed(0), signed(1));
    let mut corners = vec![base.clone(); 5];
    corners[1][0] += su;
    corners[2][0] += su;
    corners[2][1] += sv;
    corners[3][1] += sv;
    let probe = PathSpec::new(corners, step)?;
    let holonomy = holonomy_defect(m, &probe, &s0)?;

    let passed = solution.verification.pass;
    let classification = solution.classification;
    let results = json!({
        "seed": { "kind": seed_kind, "state": s0 },
        "solution": solution,
        "holonomy": { "loop": probe, "defect": holonomy },
    });
    Ok(Outcome {
        results,
        classification: Some(classification),
        passed,
        grid: Some(grid),
        tolerance: opts.tolerance,
    })
}

pub fn einstein(g: &MetricSpec, gbar: &MetricSpec, c: &Common) -> Result<Outcome> {
    let grid = c.grid_for(&g.metric);
    let tol = c.tolerance();
    let suite = einstein_suite(&g.metric, &gbar.metric, &grid, c.backend, tol, c.exec)?;
    let passed = suite.pass;
    Ok(Outcome {
        results: json!({ "k": suite.k, "k_bar": suite.k_bar, "suite": suite }),
        classification: None,
        passed,
        grid: Some(grid),
        tolerance: tol,
    })
}

pub fn curvature(g: &MetricSpec, c: &Common) -> Result<Outcome> {
    let grid = c.grid_for(&g.metric);
    let tol = c.tolerance();
    let derivatives = c.backend == Backend::Analytic;
    let evals = curvature_sweep(&g.metric, &grid, c.backend, derivatives, c.exec)?;
    let einstein = einstein_check(&g.metric, &grid, c.backend, tol, c.exec)?;
    Ok(Outcome {
        results: json!({ "points": evals, "einstein": einstein }),
        classification: None,
        passed: true,
        grid: Some(grid),
        tolerance: tol,
    })
}

pub struct GeodesicOptions {
    pub count: usize,
    pub seed: u64,
    pub t_end: f64,
    pub step: f64,
}

pub fn geodesic_compare(g: &MetricSpec, gbar: &MetricSpec, o: &GeodesicOptions, c: &Common) -> Result<Outcome> {
    g.metric.chart().check_compatible(gbar.metric.chart())?;
    let tol = c.tol.unwrap_or(1e-6);
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
    let seeds = random_seeds(g.metric.chart(), &mut rng, o.count);
    let curves = c.exec.try_map(&seeds, |(x0, v0)| -> geomap::Result<Value> {
        let curve = integrate_geodesic(&g.metric, x0, v0, o.t_end, o.step)?;
        let defect = correspondence_residual(&curve, &gbar.metric)?;
        Ok(json!({
            "x0": x0,
            "v0": v0,
            "samples": curve.len(),
            "t_reached": curve.times.last().copied().unwrap_or(0.0),
            "truncated": curve.truncated,
            "max_defect": defect.max_defect,
            "energy_drift": energy_drift(&curve, &g.metric)?,
        }))
    })?;
    let worst = curves
        .iter()
        .filter_map(|v| v["max_defect"].as_f64())
        .fold(0.0, f64::max);
    let passed = curves.iter().all(|v| v["max_defect"].as_f64().is_some_and(|d| d < tol));
    Ok(Outcome {
        results: json!({
            "count": o.count,
            "t_end": o.t_end,
            "step": o.step,
            "max_defect": worst,
            "curves": curves,
        }),
        classification: None,
        passed,
        grid: None,
        tolerance: tol,
    })
}
