//! Geodesics of one metric and the direct test of the mapping property:
//! images of source geodesics must be unparametrised target geodesics.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{christoffel, metric_jet, Backend, Chart, MetricField};
use crate::tensor::Tensor;

/// Sampled solution of `ẍ^h + Γ^h_ij ẋ^i ẋ^j = 0`.
#[derive(Clone, Debug, Serialize)]
pub struct GeodesicCurve {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<String>,
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub accelerations: Vec<Vec<f64>>,
    /// The integration stopped early because the next step left the domain.
    pub truncated: bool,
}

impl GeodesicCurve {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

fn contract(gam: &Tensor<3>, v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|h| {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += gam[[h, i, j]] * v[i] * v[j];
                }
            }
            s
        })
        .collect()
}

/// `Γ^h_ij v^i v^j` at `x`, or `None` outside the chart.
fn quadratic(g: &MetricField, x: &[f64], v: &[f64]) -> Result<Option<Vec<f64>>> {
    if !g.chart().contains(x) {
        return Ok(None);
    }
    let gam = christoffel(&metric_jet(g, x, 1, Backend::Analytic)?)?;
    Ok(Some(contract(&gam, v)))
}

/// Position and velocity derivatives at one RK4 stage.
type Stage = (Vec<f64>, Vec<f64>);

fn axpy(x: &[f64], k: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a + k * b).collect()
}

/// RK4 with fixed step `h` up to `t_end`. Leaving the chart truncates the
/// curve at the last in-domain sample.
pub fn integrate_geodesic(g: &MetricField, x0: &[f64], v0: &[f64], t_end: f64, h: f64) -> Result<GeodesicCurve> {
    let n = g.dim();
    if x0.len() != n || v0.len() != n {
        return Err(Error::Path(
            "initial point and velocity must match the metric dimension".into(),
        ));
    }
    if !g.chart().contains(x0) {
        return Err(Error::OutOfDomain { point: x0.to_vec() });
    }
    if v0.iter().all(|v| *v == 0.0) {
        return Err(Error::Path("initial velocity is zero".into()));
    }
    if !(h > 0.0 && t_end > 0.0) {
        return Err(Error::Path(format!(
            "need positive step and end time, got h = {h}, t_end = {t_end}"
        )));
    }
    let steps = (t_end / h).round().max(1.0) as usize;
    let dt = t_end / steps as f64;
    let acc0 = quadratic(g, x0, v0)?.expect("start point checked");
    let mut curve = GeodesicCurve {
        metric: g.name().map(str::to_string),
        times: vec![0.0],
        positions: vec![x0.to_vec()],
        velocities: vec![v0.to_vec()],
        accelerations: vec![acc0.iter().map(|a| -a).collect()],
        truncated: false,
    };
    let (mut x, mut v) = (x0.to_vec(), v0.to_vec());
    'steps: for m in 0..steps {
        // state derivative (ẋ, v̇) = (v, −Γvv)
        let mut ks: Vec<Stage> = Vec::with_capacity(4);
        for (c, prev) in [(0.0, None), (0.5, Some(0)), (0.5, Some(1)), (1.0, Some(2))] {
            let (xs, vs) = match prev {
                None => (x.clone(), v.clone()),
                Some(p) => {
                    let (kx, kv): &Stage = &ks[p];
                    (axpy(&x, c * dt, kx), axpy(&v, c * dt, kv))
                }
            };
            let Some(q) = quadratic(g, &xs, &vs)? else {
                curve.truncated = true;
                break 'steps;
            };
            ks.push((vs, q.iter().map(|a| -a).collect()));
        }
        let combine = |base: &[f64], pick: fn(&Stage) -> &Vec<f64>| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    base[i]
                        + dt / 6.0 * (pick(&ks[0])[i] + 2.0 * pick(&ks[1])[i] + 2.0 * pick(&ks[2])[i] + pick(&ks[3])[i])
                })
                .collect()
        };
        let xn = combine(&x, |k| &k.0);
        let vn = combine(&v, |k| &k.1);
        if xn.iter().chain(&vn).any(|c| !c.is_finite()) {
            return Err(Error::BlowUp {
                arc: (m + 1) as f64 * dt,
                point: xn,
            });
        }
        let Some(q) = quadratic(g, &xn, &vn)? else {
            curve.truncated = true;
            break;
        };
        x = xn;
        v = vn;
        curve.times.push((m + 1) as f64 * dt);
        curve.positions.push(x.clone());
        curve.velocities.push(v.clone());
        curve.accelerations.push(q.iter().map(|a| -a).collect());
    }
    Ok(curve)
}

/// Parallelism defect of `A = ẍ + Γ̄ ẋ ẋ` against `ẋ` along a curve.
#[derive(Clone, Debug, Serialize)]
pub struct Correspondence {
    pub per_sample: Vec<f64>,
    pub max_defect: f64,
}

/// `max_{a<b} |A_a ẋ_b − A_b ẋ_a| / ‖ẋ‖³` at every sample. Under `ẋ → cẋ`,
/// `A → c²A` the quotient is unchanged, so it measures only whether the curve
/// is a target geodesic up to parametrisation.
pub fn correspondence_residual(curve: &GeodesicCurve, gbar: &MetricField) -> Result<Correspondence> {
    let mut per_sample = Vec::with_capacity(curve.len());
    for ((x, v), acc) in curve.positions.iter().zip(&curve.velocities).zip(&curve.accelerations) {
        let speed = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if speed == 0.0 || !speed.is_finite() {
            return Err(Error::Path(format!("degenerate velocity at {x:?}")));
        }
        let gam = christoffel(&metric_jet(gbar, x, 1, Backend::Analytic)?)?;
        let q = contract(&gam, v);
        let a: Vec<f64> = acc.iter().zip(&q).map(|(x, y)| x + y).collect();
        let n = v.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max((a[i] * v[j] - a[j] * v[i]).abs());
            }
        }
        per_sample.push(worst / speed.powi(3));
    }
    let max_defect = per_sample.iter().copied().fold(0.0, f64::max);
    Ok(Correspondence { per_sample, max_defect })
}

/// `max_t |g(ẋ, ẋ) − g(ẋ₀, ẋ₀)|` along the curve.
pub fn energy_drift(curve: &GeodesicCurve, g: &MetricField) -> Result<f64> {
    let energy = |x: &[f64], v: &[f64]| -> Result<f64> {
        let gv = g.eval(x)?;
        Ok(gv.indexed().map(|([i, j], c)| c * v[i] * v[j]).sum())
    };
    let e0 = energy(&curve.positions[0], &curve.velocities[0])?;
    let mut drift: f64 = 0.0;
    for (x, v) in curve.positions.iter().zip(&curve.velocities) {
        drift = drift.max((energy(x, v)? - e0).abs());
    }
    Ok(drift)
}

/// Random initial data: points uniform in the sampling box, unit coordinate
/// velocities uniform in direction.
pub fn random_seeds<R: Rng + ?Sized>(chart: &Chart, rng: &mut R, count: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    let points = chart.random_points(rng, count).points;
    points
        .into_iter()
        .map(|x| {
            let v = loop {
                let v: Vec<f64> = (0..chart.dim()).map(|_| rng.random_range(-1.0..=1.0)).collect();
                let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
                if norm > 0.1 && norm <= 1.0 {
                    break v.iter().map(|c| c / norm).collect();
                }
            };
            (x, v)
        })
        .collect()
}
