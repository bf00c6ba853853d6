use std::hint::black_box;
use std::path::PathBuf;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use geomap::metric_file::load_metric_spec;
use geomap::sinyukov::{solve_on_grid, SolveOptions};
use geomap::{Backend, Execution, MetricField, PairSweep, SinyukovState};

fn metric(name: &str) -> MetricField {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../../corpus/{name}.metric"));
    load_metric_spec(path).unwrap().metric
}

const POLICIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn residual_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("residual_sweep");
    group.sample_size(10);
    for (g, gbar) in [("sphere_gnomonic3", "flat3"), ("klein4", "flat4")] {
        let (g, gbar) = (metric(g), metric(gbar));
        let grid = g.chart().grid(g.chart().default_grid_size());
        for (label, exec) in POLICIES {
            group.bench_with_input(BenchmarkId::new(label, g.dim()), &grid, |b, grid| {
                b.iter(|| {
                    let s = PairSweep::new(&g, &gbar, grid, Backend::Analytic, 3, exec).unwrap();
                    black_box(s.third_sinyukov(1e-7).unwrap().max)
                })
            });
        }
    }
    group.finish();
}

fn grid_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("grid_solve");
    group.sample_size(10);
    let g = metric("sphere_gnomonic2");
    let s0 = SinyukovState::new(&g.eval(&[0.0, 0.0]).unwrap(), vec![0.1, -0.1], 0.2);
    let grid = g.chart().grid(5);
    for (label, exec) in POLICIES {
        let opts = SolveOptions {
            exec,
            ..SolveOptions::default()
        };
        group.bench_function(label, |b| {
            b.iter(|| black_box(solve_on_grid(&g, &s0, &[0.0, 0.0], &grid, &opts).unwrap().max_lambda))
        });
    }
    group.finish();
}

criterion_group!(benches, residual_sweep, grid_solve);
criterion_main!(benches);
