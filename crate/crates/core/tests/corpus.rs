use std::path::PathBuf;

use geomap::geometry::einstein_check;
use geomap::mapping::classify_mapping;
use geomap::metric_file::{load_manifest, load_metric_spec};
use geomap::{Backend, Execution, PairSweep, Tensor};

fn corpus() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

#[test]
fn every_file_loads() {
    let mut count = 0;
    for entry in std::fs::read_dir(corpus()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "metric") {
            let spec = load_metric_spec(&path).unwrap();
            let stem = path.file_stem().unwrap().to_string_lossy();
            assert_eq!(spec.name, stem);
            count += 1;
        }
    }
    assert!(count >= 15);
}

#[test]
fn flat2_is_the_identity() {
    let g = load_metric_spec(corpus().join("flat2.metric")).unwrap().metric;
    assert_eq!(g.eval(&[0.3, -0.7]).unwrap(), Tensor::identity(2));
}

#[test]
fn gnomonic4_is_einstein() {
    let g = load_metric_spec(corpus().join("sphere_gnomonic4.metric"))
        .unwrap()
        .metric;
    assert_eq!(g.chart().domain(), &[[-0.45, 0.45]; 4]);
    let p = [0.1, -0.2, 0.05, 0.3];
    let r2: f64 = p.iter().map(|x| x * x).sum();
    let want = (1.0 + r2 - p[1] * p[1]) / (1.0 + r2).powi(2);
    assert!((g.eval(&p).unwrap()[[1, 1]] - want).abs() < 1e-15);
    let r = einstein_check(&g, &g.chart().grid(3), Backend::Analytic, 1e-8, Execution::default()).unwrap();
    assert!(r.is_einstein);
    assert!((r.k + 1.0).abs() < 1e-9);
}

#[test]
fn manifest_classifications() {
    let entries = load_manifest(corpus().join("MANIFEST")).unwrap();
    assert!(entries.len() >= 14);
    for e in entries {
        let g = load_metric_spec(&e.source).unwrap().metric;
        let gbar = load_metric_spec(&e.target).unwrap().metric;
        let grid = g.chart().grid(g.chart().default_grid_size());
        let sweep = PairSweep::new(&g, &gbar, &grid, Backend::Analytic, 1, Execution::default()).unwrap();
        let lc = sweep.levi_civita(1e-8);
        assert_eq!(lc.pass, sweep.sinyukov(1e-8).pass, "line {}", e.line);
        let class = classify_mapping(&lc, sweep.max_psi());
        assert_eq!(class, e.expected, "line {}: residual {}", e.line, lc.max);
    }
}
