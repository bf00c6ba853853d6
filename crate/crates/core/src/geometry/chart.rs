use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Local coordinate chart: named coordinates over a closed box, plus the
/// fraction of each interval kept clear of the boundary when sampling.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Chart {
    coords: Vec<String>,
    domain: Vec<[f64; 2]>,
    margin: f64,
}

pub const DEFAULT_MARGIN: f64 = 0.1;

impl Chart {
    pub fn new(coords: Vec<String>, domain: Vec<[f64; 2]>, margin: f64) -> Result<Self> {
        let n = coords.len();
        if !(2..=6).contains(&n) {
            return Err(Error::Chart(format!("dimension must be between 2 and 6, got {n}")));
        }
        if domain.len() != n {
            return Err(Error::Chart(format!(
                "{} domain intervals for {n} coordinates",
                domain.len()
            )));
        }
        for (name, [lo, hi]) in coords.iter().zip(&domain) {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Chart(format!("degenerate interval [{lo}, {hi}] for `{name}`")));
            }
        }
        if !(margin > 0.0 && margin < 0.5) {
            return Err(Error::Chart(format!("margin must lie in (0, 0.5), got {margin}")));
        }
        // Reuse the expression parser's identifier rules.
        crate::expr::parse("0", &coords)?;
        Ok(Chart { coords, domain, margin })
    }

    /// Chart over `[lo, hi]^n` with coordinates `x1..xn` and the default margin.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Result<Self> {
        let coords = (1..=n).map(|i| format!("x{i}")).collect();
        Chart::new(coords, vec![[lo, hi]; n], DEFAULT_MARGIN)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn domain(&self) -> &[[f64; 2]] {
        &self.domain
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// Whether `p` lies in the closed domain box.
    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim() && p.iter().zip(&self.domain).all(|(x, [lo, hi])| lo <= x && x <= hi)
    }

    /// The domain box shrunk by the margin on every side.
    pub fn sample_bounds(&self) -> Vec<[f64; 2]> {
        self.domain
            .iter()
            .map(|[lo, hi]| {
                let pad = self.margin * (hi - lo);
                [lo + pad, hi - pad]
            })
            .collect()
    }

    /// Uniform tensor grid with `per_axis` nodes per coordinate inside the
    /// sampling box (a single node sits at the box centre).
    pub fn grid(&self, per_axis: usize) -> Grid {
        Grid::tensor(&self.sample_bounds(), per_axis)
    }

    /// Default grid resolution: 5 per axis up to dimension 3, else 3.
    pub fn default_grid_size(&self) -> usize {
        if self.dim() <= 3 {
            5
        } else {
            3
        }
    }

    /// Uniformly random points inside the sampling box.
    pub fn random_points<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Grid {
        let bounds = self.sample_bounds();
        let points = (0..count)
            .map(|_| bounds.iter().map(|[lo, hi]| rng.random_range(*lo..=*hi)).collect())
            .collect();
        Grid { points, per_axis: None }
    }

    /// Checks that `other` can host this chart's samples: same coordinate
    /// names and a domain containing this chart's sampling box.
    pub fn check_compatible(&self, other: &Chart) -> Result<()> {
        if self.coords != other.coords {
            return Err(Error::IncompatibleCharts(format!(
                "coordinates {:?} vs {:?}",
                self.coords, other.coords
            )));
        }
        for (i, [lo, hi]) in self.sample_bounds().iter().enumerate() {
            let [olo, ohi] = other.domain[i];
            if *lo < olo || *hi > ohi {
                return Err(Error::IncompatibleCharts(format!(
                    "sampling interval [{lo}, {hi}] of `{}` leaves the target domain [{olo}, {ohi}]",
                    self.coords[i]
                )));
            }
        }
        Ok(())
    }
}

/// A finite set of sample points.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Grid {
    pub points: Vec<Vec<f64>>,
    /// Nodes per axis for tensor grids; `None` for scattered samples.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_axis: Option<usize>,
}

impl Grid {
    pub fn tensor(bounds: &[[f64; 2]], per_axis: usize) -> Grid {
        assert!(per_axis >= 1);
        let axes: Vec<Vec<f64>> = bounds
            .iter()
            .map(|[lo, hi]| {
                if per_axis == 1 {
                    vec![0.5 * (lo + hi)]
                } else {
                    (0..per_axis)
                        .map(|k| lo + (hi - lo) * k as f64 / (per_axis - 1) as f64)
                        .collect()
                }
            })
            .collect();
        let total = per_axis.pow(bounds.len() as u32);
        let points = (0..total)
            .map(|mut flat| {
                let mut p = vec![0.0; bounds.len()];
                for d in (0..bounds.len()).rev() {
                    p[d] = axes[d][flat % per_axis];
                    flat /= per_axis;
                }
                p
            })
            .collect();
        Grid {
            points,
            per_axis: Some(per_axis),
        }
    }

    pub fn from_points(points: Vec<Vec<f64>>) -> Grid {
        Grid { points, per_axis: None }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_respects_margin() {
        let chart = Chart::cube(2, -1.0, 1.0).unwrap();
        let g = chart.grid(5);
        assert_eq!(g.len(), 25);
        assert_eq!(g.points[0], vec![-0.8, -0.8]);
        assert_eq!(g.points[24], vec![0.8, 0.8]);
        assert_eq!(g.points[1], vec![-0.8, -0.4]);
        assert_eq!(chart.grid(1).points, vec![vec![0.0, 0.0]]);
    }

    #[test]
    fn rejects_bad_charts() {
        assert!(Chart::cube(1, 0.0, 1.0).is_err());
        assert!(Chart::cube(7, 0.0, 1.0).is_err());
        assert!(Chart::cube(2, 1.0, 1.0).is_err());
        let names = vec!["a".to_string(), "b".to_string()];
        assert!(Chart::new(names.clone(), vec![[0.0, 1.0]; 2], 0.5).is_err());
        assert!(Chart::new(names.clone(), vec![[0.0, 1.0]; 2], 0.0).is_err());
        assert!(Chart::new(vec!["a".into(), "a".into()], vec![[0.0, 1.0]; 2], 0.1).is_err());
        assert!(Chart::new(names, vec![[0.0, 1.0]; 2], 0.25).is_ok());
    }

    #[test]
    fn compatibility_uses_sampling_box() {
        let small = Chart::cube(3, -0.45, 0.45).unwrap();
        let big = Chart::cube(3, -1.0, 1.0).unwrap();
        assert!(small.check_compatible(&big).is_ok());
        assert!(big.check_compatible(&small).is_err());
    }
}
