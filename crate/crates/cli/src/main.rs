//! `geomap`: check, construct and compare geodesic mappings between metrics
//! given as metric files.
//!
//! Exit codes: 0 when the checked property holds, 1 when it fails, 2 on
//! errors (unreadable input, incompatible charts, non-Einstein source, …).

mod commands;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use geomap::metric_file::{load_metric_spec, MetricSpec};
use geomap::{Backend, Execution, Tensor};

use commands::{Common, GeodesicOptions, Outcome, Seed};
use report::{Document, InputMetric, Inputs, Settings};

#[derive(Parser)]
#[command(
    name = "geomap",
    version,
    about = "Geodesic mappings between pseudo-Riemannian metrics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Analytic,
    Fd,
}

#[derive(Args)]
struct CommonArgs {
    /// Grid nodes per axis (default: 5 for n ≤ 3, else 3).
    #[arg(long)]
    grid: Option<usize>,
    /// Derivative backend.
    #[arg(long, value_enum, default_value = "analytic")]
    backend: BackendArg,
    /// Residual tolerance (default depends on the command and backend).
    #[arg(long)]
    tol: Option<f64>,
    /// Write the JSON report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomised runs.
    #[arg(long)]
    seed: Option<u64>,
    /// Run on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Check whether (g, ḡ) is a geodesic mapping and evaluate the full
    /// residual hierarchy.
    Verify {
        source: PathBuf,
        target: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Integrate the closed Sinyukov system over a grid and rebuild ḡ.
    Solve {
        source: PathBuf,
        /// Seed from the pair (g, ḡ) at the base point.
        #[arg(long, conflicts_with_all = ["trivial", "a"])]
        from_pair: Option<PathBuf>,
        /// Seed with a = g(base), λ = 0, μ = 0.
        #[arg(long, conflicts_with = "a")]
        trivial: bool,
        /// Seed tensor, rows separated by `;`, entries by `,`.
        #[arg(long, requires_all = ["lambda", "mu"], allow_hyphen_values = true)]
        a: Option<String>,
        /// Seed covector.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        lambda: Option<Vec<f64>>,
        /// Seed scalar.
        #[arg(long, allow_hyphen_values = true)]
        mu: Option<f64>,
        /// Base point (default: centre of the domain).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        base: Option<Vec<f64>>,
        /// RK4 step along integration paths.
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Einstein-transfer suite for a mapping out of an Einstein space.
    Einstein {
        source: PathBuf,
        target: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Dump Christoffel symbols and curvature of one metric over a grid.
    Curvature {
        metric: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Integrate random g-geodesics and test whether they are ḡ-geodesics.
    GeodesicCompare {
        source: PathBuf,
        target: PathBuf,
        /// Number of random geodesics.
        #[arg(long, default_value_t = 20)]
        count: usize,
        /// Parameter length of each geodesic.
        #[arg(long, default_value_t = 0.5)]
        t_end: f64,
        /// RK4 step.
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn parse_matrix(s: &str) -> Result<Tensor<2>> {
    let rows: Vec<Vec<f64>> = s
        .split(';')
        .map(|r| {
            r.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .with_context(|| format!("invalid number `{}`", x.trim()))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(anyhow!("seed tensor `{s}` is not square"));
    }
    Ok(Tensor::from_rows(&rows))
}

fn load(path: &Path) -> Result<MetricSpec> {
    Ok(load_metric_spec(path)?)
}

fn input(path: &Path, spec: &MetricSpec) -> InputMetric {
    InputMetric {
        path: path.display().to_string(),
        name: spec.name.clone(),
        dimension: spec.metric.dim(),
    }
}

fn common(args: &CommonArgs) -> Common {
    Common {
        grid: args.grid,
        backend: match args.backend {
            BackendArg::Analytic => Backend::Analytic,
            BackendArg::Fd => Backend::FiniteDifference,
        },
        tol: args.tol,
        exec: if args.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        },
    }
}

fn run(cli: Cli, inputs: &mut Inputs) -> Result<Outcome> {
    let paired = |s: &Path, t: &Path, inputs: &mut Inputs| -> Result<(MetricSpec, MetricSpec)> {
        let g = load(s)?;
        inputs.source = Some(input(s, &g));
        let gbar = load(t)?;
        inputs.target = Some(input(t, &gbar));
        Ok((g, gbar))
    };
    match cli.command {
        Command::Verify {
            source,
            target,
            common: c,
        } => {
            let (g, gbar) = paired(&source, &target, inputs)?;
            commands::verify(&g, &gbar, &common(&c))
        }
        Command::Einstein {
            source,
            target,
            common: c,
        } => {
            let (g, gbar) = paired(&source, &target, inputs)?;
            commands::einstein(&g, &gbar, &common(&c))
        }
        Command::GeodesicCompare {
            source,
            target,
            count,
            t_end,
            step,
            common: c,
        } => {
            let (g, gbar) = paired(&source, &target, inputs)?;
            let o = GeodesicOptions {
                count,
                seed: c.seed.unwrap_or(0),
                t_end,
                step,
            };
            commands::geodesic_compare(&g, &gbar, &o, &common(&c))
        }
        Command::Curvature { metric, common: c } => {
            let g = load(&metric)?;
            inputs.source = Some(input(&metric, &g));
            commands::curvature(&g, &common(&c))
        }
        Command::Solve {
            source,
            from_pair,
            trivial,
            a,
            lambda,
            mu,
            base,
            step,
            common: c,
        } => {
            let g = load(&source)?;
            inputs.source = Some(input(&source, &g));
            let seed = match (from_pair, trivial, a) {
                (Some(p), _, _) => {
                    let gbar = load(&p)?;
                    inputs.target = Some(input(&p, &gbar));
                    Seed::FromPair(gbar)
                }
                (None, true, _) => Seed::Trivial,
                (None, false, Some(a)) => Seed::Explicit {
                    a: parse_matrix(&a)?,
                    lambda: lambda.expect("required by clap"),
                    mu: mu.expect("required by clap"),
                },
                (None, false, None) => {
                    return Err(anyhow!(
                        "choose a seed: --from-pair FILE, --trivial, or --a/--lambda/--mu"
                    ))
                }
            };
            commands::solve(&g, seed, base, step, &common(&c))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Verify { common, .. } => ("verify", common),
        Command::Solve { common, .. } => ("solve", common),
        Command::Einstein { common, .. } => ("einstein", common),
        Command::Curvature { common, .. } => ("curvature", common),
        Command::GeodesicCompare { common, .. } => ("geodesic-compare", common),
    };
    let (shared, seed, out) = (common(args), args.seed, args.out.clone());
    let mut inputs = Inputs::default();
    let outcome = run(cli, &mut inputs);
    let settings = |tolerance: f64, grid: Option<&geomap::Grid>| Settings {
        backend: match shared.backend {
            Backend::Analytic => "analytic".into(),
            Backend::FiniteDifference => "fd".into(),
        },
        tolerance,
        grid_per_axis: grid.and_then(|g| g.per_axis),
        grid_points: grid.map(|g| g.len()),
        seed,
        execution: if shared.exec.is_parallel() {
            "parallel"
        } else {
            "sequential"
        }
        .into(),
    };
    let doc = match outcome {
        Ok(o) => {
            let code = if o.passed { 0 } else { 1 };
            Document {
                command: name,
                inputs,
                settings: Some(settings(o.tolerance, o.grid.as_ref())),
                results: o.results,
                classification: o.classification.map(|c| c.as_str().to_string()),
                passed: Some(o.passed),
                error: None,
                exit_code: code,
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            Document {
                command: name,
                inputs,
                settings: None,
                results: serde_json::Value::Null,
                classification: None,
                passed: None,
                error: Some(format!("{e:#}")),
                exit_code: 2,
            }
        }
    };
    let text = doc.render();
    match &out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &text) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(2);
            }
            summary(&doc);
        }
        None => print!("{text}"),
    }
    ExitCode::from(doc.exit_code as u8)
}

fn summary(doc: &Document) {
    match (&doc.error, &doc.classification, doc.passed) {
        (Some(_), _, _) => {}
        (None, Some(c), _) => println!("{}: {c}", doc.command),
        (None, None, Some(p)) => println!("{}: {}", doc.command, if p { "pass" } else { "fail" }),
        _ => {}
    }
}
