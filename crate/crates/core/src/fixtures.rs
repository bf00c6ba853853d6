//! Metrics shared by the unit tests.

use crate::geometry::{Chart, MetricField};

fn from_fn(chart: Chart, f: impl Fn(usize, usize) -> String) -> MetricField {
    let n = chart.dim();
    let comps: Vec<String> = (0..n)
        .flat_map(|i| (i..n).map(move |j| (i, j)))
        .map(|(i, j)| f(i, j))
        .collect();
    let refs: Vec<&str> = comps.iter().map(String::as_str).collect();
    MetricField::parse_upper(chart, &refs).unwrap()
}

fn r2(n: usize) -> String {
    (1..=n).map(|i| format!("x{i}^2")).collect::<Vec<_>>().join(" + ")
}

pub fn flat(n: usize) -> MetricField {
    from_fn(Chart::cube(n, -1.0, 1.0).unwrap(), |i, j| {
        if i == j {
            "1".into()
        } else {
            "0".into()
        }
    })
}

/// Unit sphere in gnomonic (central projection) coordinates.
pub fn gnomonic(n: usize) -> MetricField {
    let w = format!("(1 + {})", r2(n));
    from_fn(Chart::cube(n, -0.45, 0.45).unwrap(), |i, j| {
        let delta = if i == j { w.clone() } else { "0".into() };
        format!("({delta} - x{}*x{}) / {w}^2", i + 1, j + 1)
    })
}

/// Unit hyperbolic space in Beltrami–Klein coordinates.
pub fn klein(n: usize) -> MetricField {
    let w = format!("(1 - ({}))", r2(n));
    from_fn(Chart::cube(n, -0.45, 0.45).unwrap(), |i, j| {
        let delta = if i == j { w.clone() } else { "0".into() };
        format!("({delta} + x{}*x{}) / {w}^2", i + 1, j + 1)
    })
}

/// Flat plane in polar form `diag(1, x1²)`.
pub fn polar() -> MetricField {
    let chart = Chart::new(vec!["x1".into(), "x2".into()], vec![[0.5, 3.0], [-1.0, 1.0]], 0.1).unwrap();
    MetricField::parse_upper(chart, &["1", "0", "x1^2"]).unwrap()
}

/// `diag(1, 1 + x1², 1, …)`: not Einstein for n ≥ 3, not projectively flat.
pub fn warped(n: usize) -> MetricField {
    from_fn(Chart::cube(n, -1.0, 1.0).unwrap(), |i, j| match (i, j) {
        (1, 1) => "1 + x1^2".into(),
        _ if i == j => "1".into(),
        _ => "0".into(),
    })
}

/// A geodesically equivalent pair of non-constant curvature:
/// `(X − Y)(dx1² + dx2²)` and `(1/Y − 1/X)(dx1²/X + dx2²/Y)` with
/// `X = 3 + x1`, `Y = 1 + x2²`.
pub fn liouville() -> (MetricField, MetricField) {
    let chart = Chart::cube(2, -0.5, 0.5).unwrap();
    let (x, y) = ("(3 + x1)", "(1 + x2^2)");
    let g = MetricField::parse_upper(chart.clone(), &[&format!("{x} - {y}"), "0", &format!("{x} - {y}")]).unwrap();
    let f = format!("(1/{y} - 1/{x})");
    let gbar = MetricField::parse_upper(chart, &[&format!("{f} / {x}"), "0", &format!("{f} / {y}")]).unwrap();
    (g, gbar)
}
