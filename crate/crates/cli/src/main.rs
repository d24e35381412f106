//! `app`: simulate event streams, fit log-linear joint intensity models,
//! evaluate them and grid-search their smoothing parameters.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 bad flags or input, 3 numerical
//! failure.

use std::fmt;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use app_core::empirical::subsets_between;
use app_core::eval::{self, GridSearchConfig};
use app_core::io::{self, EventFile, ModelFormat};
use app_core::model;
use app_core::simulate::{self, MixtureConfig, RateFunction};
use app_core::{Bandwidth, EstimatorConfig, FitConfig, FittedModel, Init, Method, Subset};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "app", version, about = "Joint intensity estimation for correlated Poisson processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw synthetic events and write them with their true intensities.
    Simulate(SimulateArgs),
    /// Fit a log-linear model to an event file.
    Fit(FitArgs),
    /// Score a model (or an intensity CSV) on test events or against a truth file.
    Eval(EvalArgs),
    /// Select bandwidth and bin count by validation likelihood.
    Gridsearch(GridArgs),
    /// Write a fitted model's per-bin intensity for one subset.
    Intensity(IntensityArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Kind {
    Constant,
    Sinusoidal,
    Mixture,
    Bernoulli,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Natural,
    Gradient,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Natural => Method::NaturalGradient,
            MethodArg::Gradient => Method::GradientDescent,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum InitArg {
    Zeros,
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Toml,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OutputArg {
    Text,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Metric {
    Nll,
    Kl,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    /// Required so that every run is reproducible.
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    duration: f64,
    /// Output directory for events.csv and truth_<J>.csv.
    #[arg(long)]
    out: PathBuf,
    /// Bins of the written truth curves.
    #[arg(long, default_value_t = 100)]
    bins: usize,
    /// Constant rate (kind constant).
    #[arg(long)]
    level: Option<f64>,
    /// Peak rate A of (A/2)(1 + sin ωt) (kind sinusoidal).
    #[arg(long)]
    amplitude: Option<f64>,
    /// Angular frequency ω (kind sinusoidal).
    #[arg(long)]
    frequency: Option<f64>,
    #[arg(long)]
    dims: Option<usize>,
    #[arg(long)]
    components: Option<usize>,
    #[arg(long)]
    count: Option<usize>,
    /// Coincidence window used to define the joint truth subsets.
    #[arg(long)]
    window: Option<f64>,
    /// Largest subset size with a truth file (kind mixture; defaults to dims).
    #[arg(long)]
    max_order: Option<usize>,
    #[arg(long)]
    wishart_dof: Option<f64>,
    #[arg(long)]
    cov_scale: Option<f64>,
    /// Keep probability per lattice point (kind bernoulli).
    #[arg(long)]
    probability: Option<f64>,
    /// Lattice spacing (kind bernoulli).
    #[arg(long)]
    step: Option<f64>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    /// Overrides the '# T=' header of the event file.
    #[arg(long)]
    duration: Option<f64>,
    /// Overrides the '# D=' header of the event file.
    #[arg(long)]
    dims: Option<usize>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    order: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    bins: u64,
    /// Kernel bandwidth in seconds, or "scott".
    #[arg(long, value_parser = parse_bandwidth)]
    bandwidth: Bandwidth,
    #[arg(long, default_value_t = 0.1)]
    window: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::Natural)]
    method: MethodArg,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    no_backtracking: bool,
    #[arg(long, value_enum, default_value_t = InitArg::Zeros)]
    init: InitArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Toml)]
    format: FormatArg,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, required_unless_present = "estimate", conflicts_with = "estimate")]
    model: Option<PathBuf>,
    /// Per-bin intensity CSV to score instead of a model.
    #[arg(long)]
    estimate: Option<PathBuf>,
    /// Test event file (metric nll).
    #[arg(long)]
    test: Option<PathBuf>,
    /// Truth CSV with an intensity column (metric kl).
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Comma-separated process ids, e.g. "1,2".
    #[arg(long, value_parser = parse_subset)]
    subset: Subset,
    #[arg(long, value_enum)]
    metric: Metric,
    /// Test-file duration when it has no '# T=' header and no model is given.
    #[arg(long)]
    duration: Option<f64>,
    /// Coincidence window for test joint events (defaults to the model's).
    #[arg(long)]
    window: Option<f64>,
    /// Results CSV to append a row to.
    #[arg(long)]
    append: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputArg::Text)]
    format: OutputArg,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    dims: Option<usize>,
    /// Fraction of each stream's events held out for validation.
    #[arg(long, default_value_t = 0.2, conflicts_with = "folds")]
    holdout: f64,
    /// Use this many folds instead of a single holdout split.
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    h_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    m_grid: Vec<usize>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    order: u64,
    #[arg(long, default_value_t = 0.1)]
    window: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::Natural)]
    method: MethodArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Score table CSV (h,M,score).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputArg::Text)]
    format: OutputArg,
}

#[derive(Args)]
struct IntensityArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_parser = parse_subset)]
    subset: Subset,
    /// Rescale to the event count of this file instead of the fit-time count.
    #[arg(long)]
    events: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_bandwidth(s: &str) -> Result<Bandwidth, String> {
    if s.eq_ignore_ascii_case("scott") {
        return Ok(Bandwidth::Scott);
    }
    match s.parse::<f64>() {
        Ok(h) if h > 0.0 && h.is_finite() => Ok(Bandwidth::Fixed(h)),
        _ => Err(format!("expected a positive number or \"scott\", got {s:?}")),
    }
}

fn parse_subset(s: &str) -> Result<Subset, String> {
    Subset::parse_key(s).map_err(|e| e.to_string())
}

#[derive(Debug)]
enum Failure {
    Io(String),
    Usage(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Io(m) | Failure::Usage(m) | Failure::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<app_core::Error> for Failure {
    fn from(e: app_core::Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else if matches!(e, app_core::Error::Io(_)) {
            Failure::Io(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Gridsearch(a) => cmd_gridsearch(a),
        Command::Intensity(a) => cmd_intensity(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

/// File-name form of a subset key: `1-2` for `{1, 2}`.
fn file_key(s: Subset) -> String {
    s.key().replace(',', "-")
}

fn cmd_simulate(a: SimulateArgs) -> CliResult<()> {
    let given: [(&str, bool); 12] = [
        ("--level", a.level.is_some()),
        ("--amplitude", a.amplitude.is_some()),
        ("--frequency", a.frequency.is_some()),
        ("--dims", a.dims.is_some()),
        ("--components", a.components.is_some()),
        ("--count", a.count.is_some()),
        ("--window", a.window.is_some()),
        ("--max-order", a.max_order.is_some()),
        ("--wishart-dof", a.wishart_dof.is_some()),
        ("--cov-scale", a.cov_scale.is_some()),
        ("--probability", a.probability.is_some()),
        ("--step", a.step.is_some()),
    ];
    let allowed: &[&str] = match a.kind {
        Kind::Constant => &["--level"],
        Kind::Sinusoidal => &["--amplitude", "--frequency"],
        Kind::Mixture => &[
            "--dims",
            "--components",
            "--count",
            "--window",
            "--max-order",
            "--wishart-dof",
            "--cov-scale",
        ],
        Kind::Bernoulli => &["--probability", "--step"],
    };
    let kind_name = a.kind.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
    if let Some((flag, _)) = given.iter().find(|(f, set)| *set && !allowed.contains(f)) {
        return Err(usage(format!("{flag} does not apply to --kind {kind_name}")));
    }
    let need = |flag: &str, v: Option<f64>| v.ok_or_else(|| usage(format!("--kind {kind_name} requires {flag}")));
    if !(a.duration > 0.0 && a.duration.is_finite()) {
        return Err(usage(format!("--duration must be positive, got {}", a.duration)));
    }
    if a.bins == 0 {
        return Err(usage("--bins must be at least 1"));
    }
    std::fs::create_dir_all(&a.out)?;

    let (streams, truth) = match a.kind {
        Kind::Constant | Kind::Sinusoidal => {
            let rate = if a.kind == Kind::Constant {
                RateFunction::Constant {
                    level: need("--level", a.level)?,
                }
            } else {
                RateFunction::Sinusoidal {
                    amplitude: need("--amplitude", a.amplitude)?,
                    frequency: need("--frequency", a.frequency)?,
                }
            };
            rate.validate().map_err(|e| usage(e.to_string()))?;
            let g = simulate::simulate_rate(rate, a.duration, a.bins, a.seed)?;
            (vec![g.points], g.truth)
        }
        Kind::Mixture => {
            let dims = a.dims.ok_or_else(|| usage("--kind mixture requires --dims"))?;
            let components = a.components.ok_or_else(|| usage("--kind mixture requires --components"))?;
            let count = a.count.ok_or_else(|| usage("--kind mixture requires --count"))?;
            let mut cfg = MixtureConfig::new(dims, components, count, a.duration);
            cfg.bins = a.bins;
            if let Some(w) = a.window {
                cfg.window = w;
            }
            if let Some(k) = a.max_order {
                cfg.max_order = k;
            }
            cfg.wishart_dof = a.wishart_dof;
            cfg.cov_scale = a.cov_scale;
            let g = simulate::mixture_generator(&cfg, a.seed)?;
            (g.data.streams(), g.truth)
        }
        Kind::Bernoulli => {
            let p = need("--probability", a.probability)?;
            let step = need("--step", a.step)?;
            let events = simulate::bernoulli_toy(p, step, a.duration, a.seed)?;
            (vec![events], Default::default())
        }
    };
    let file = EventFile {
        duration: a.duration,
        streams,
    };
    file.write(&a.out.join("events.csv"))?;
    for (s, values) in &truth {
        io::write_truth(&a.out.join(format!("truth_{}.csv", file_key(*s))), values)?;
    }
    let total: usize = file.streams.iter().map(Vec::len).sum();
    println!(
        "wrote {total} events over {} process(es) and {} truth file(s) to {}",
        file.dims(),
        truth.len(),
        a.out.display()
    );
    Ok(())
}

fn cmd_fit(a: FitArgs) -> CliResult<()> {
    let file = EventFile::read(&a.input, a.duration, a.dims)?;
    let order = a.order as usize;
    if order > file.dims() {
        return Err(usage(format!("--order {order} exceeds the {} processes in the input", file.dims())));
    }
    let data = eval::streams_to_data(file.streams, file.duration, a.window)?;
    let method = Method::from(a.method);
    let mut fit = FitConfig::for_method(method);
    if let Some(n) = a.max_iters {
        fit.max_iters = n;
    }
    if let Some(t) = a.tol {
        fit.tol = t;
    }
    if let Some(s) = a.step {
        fit.step = s;
    }
    fit.backtracking = !a.no_backtracking;
    fit.init = match a.init {
        InitArg::Zeros => Init::Zeros,
        InitArg::Random => Init::Random,
    };
    fit.seed = a.seed;
    fit.validate().map_err(|e| usage(e.to_string()))?;
    let mut cfg = EstimatorConfig::new(order, a.bins as usize, a.bandwidth);
    cfg.fit = fit;
    let (m, report, _) = FittedModel::fit(&data, &cfg)?;
    let format = match a.format {
        FormatArg::Toml => ModelFormat::Toml,
        FormatArg::Json => ModelFormat::Json,
    };
    io::save_model(&m, &a.out, format)?;
    println!(
        "iterations {} final_kl {:.6e} residual {:.3e} converged {}",
        report.iterations, report.final_kl, report.final_residual, report.converged
    );
    if !report.converged {
        eprintln!("warning: the fit did not converge; see the model file's fit section");
    }
    Ok(())
}

fn check_subset(s: Subset, dims: usize) -> CliResult<()> {
    if s.max_index() > dims {
        return Err(usage(format!("subset {s} is outside the model's {dims} processes")));
    }
    Ok(())
}

/// Representative times of the test events for `subset`.
fn test_times(path: &Path, duration: Option<f64>, dims: usize, window: f64, subset: Subset) -> CliResult<(Vec<f64>, f64)> {
    let file = EventFile::read(path, duration, Some(dims))?;
    let data = eval::streams_to_data(file.streams, file.duration, window)?;
    let times = data.events(subset).map(|e| e.representative_times()).unwrap_or_default();
    Ok((times, file.duration))
}

fn cmd_eval(a: EvalArgs) -> CliResult<()> {
    match a.metric {
        Metric::Kl if a.truth.is_none() => return Err(usage("--metric kl requires --truth")),
        Metric::Nll if a.test.is_none() => return Err(usage("--metric nll requires --test")),
        Metric::Kl if a.test.is_some() => return Err(usage("--test is only used with --metric nll")),
        Metric::Nll if a.truth.is_some() => return Err(usage("--truth is only used with --metric kl")),
        _ => {}
    }
    // (intensity, duration, window, dims) of the thing being scored
    let (intensity, duration, window, dims) = if let Some(path) = &a.model {
        let m = io::load_model(path)?;
        check_subset(a.subset, m.space().dims())?;
        let est = m.intensity(a.subset)?;
        (est.values, Some(m.space().duration()), a.window.unwrap_or(m.window()), m.space().dims())
    } else {
        let path = a.estimate.as_ref().expect("clap requires --model or --estimate");
        let v = io::read_intensity_column(path)?;
        (v, a.duration, a.window.unwrap_or(0.1), a.subset.max_index())
    };
    let value = match a.metric {
        Metric::Kl => {
            let truth = io::read_intensity_column(a.truth.as_ref().expect("checked above"))?;
            if truth.len() != intensity.len() {
                return Err(usage(format!(
                    "truth has {} bins but the estimate has {}",
                    truth.len(),
                    intensity.len()
                )));
            }
            eval::kl_to_truth(&intensity, &truth)?
        }
        Metric::Nll => {
            let test = a.test.as_ref().expect("checked above");
            let (times, t) = test_times(test, a.duration.or(duration), dims, window, a.subset)?;
            eval::negative_test_loglik(&intensity, &times, t)?
        }
    };
    let metric = match a.metric {
        Metric::Nll => "nll",
        Metric::Kl => "kl",
    };
    match a.format {
        OutputArg::Text => println!("{metric} {} {value:e}", a.subset.key()),
        OutputArg::Json => println!(
            "{}",
            serde_json::json!({ "metric": metric, "subset": a.subset.key(), "value": value })
        ),
    }
    if let Some(path) = &a.append {
        let fresh = !path.exists() || std::fs::metadata(path)?.len() == 0;
        let mut f = OpenOptions::new().create(true).append(true).open(path)?;
        if fresh {
            f.write_all(b"source,subset,metric,value\n")?;
        }
        let source = a.model.as_ref().or(a.estimate.as_ref()).expect("one source is required");
        writeln!(f, "{},\"{}\",{metric},{value:e}", source.display(), a.subset.key())?;
    }
    Ok(())
}

fn cmd_gridsearch(a: GridArgs) -> CliResult<()> {
    let file = EventFile::read(&a.input, a.duration, a.dims)?;
    let order = a.order as usize;
    if order > file.dims() {
        return Err(usage(format!("--order {order} exceeds the {} processes in the input", file.dims())));
    }
    if let Some(h) = a.h_grid.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
        return Err(usage(format!("--h-grid values must be positive, got {h}")));
    }
    if a.m_grid.contains(&0) {
        return Err(usage("--m-grid values must be at least 1"));
    }
    let threads = match std::env::var("APP_THREADS") {
        Ok(v) => Some(
            v.parse::<usize>()
                .ok()
                .filter(|n| *n > 0)
                .ok_or_else(|| usage(format!("APP_THREADS must be a positive integer, got {v:?}")))?,
        ),
        Err(_) => None,
    };
    let mut cfg = GridSearchConfig::new(a.h_grid.clone(), a.m_grid.clone(), order);
    cfg.fit = FitConfig::for_method(a.method.into());
    cfg.threads = threads;
    cfg.subsets = Some(subsets_between(file.dims(), 1, order));
    let t = file.duration;
    let result = match a.folds {
        Some(k) => {
            let splits = eval::fold_streams(&file.streams, k, a.seed)?
                .into_iter()
                .map(|(tr, va)| Ok((eval::streams_to_data(tr, t, a.window)?, eval::streams_to_data(va, t, a.window)?)))
                .collect::<app_core::Result<Vec<_>>>()?;
            eval::grid_search_folds(&splits, &cfg)?
        }
        None => {
            let (tr, va) = eval::split_streams(&file.streams, a.holdout, a.seed)?;
            let train = eval::streams_to_data(tr, t, a.window)?;
            let val = eval::streams_to_data(va, t, a.window)?;
            eval::grid_search(&train, &val, &cfg)?
        }
    };
    io::write_grid_table(&a.out, &result.table)?;
    let b = result.best;
    match a.format {
        OutputArg::Text => println!("best h {} M {} score {:e}", b.h, b.bins, b.score),
        OutputArg::Json => println!("{}", serde_json::json!({ "h": b.h, "M": b.bins, "score": b.score })),
    }
    Ok(())
}

fn cmd_intensity(a: IntensityArgs) -> CliResult<()> {
    let m = io::load_model(&a.model)?;
    let space = m.space();
    check_subset(a.subset, space.dims())?;
    let count = match &a.events {
        Some(path) => {
            let file = EventFile::read(path, Some(space.duration()), Some(space.dims()))?;
            let data = eval::streams_to_data(file.streams, file.duration, m.window())?;
            data.count(a.subset)
        }
        None => m.count(a.subset),
    };
    let est = model::intensity_estimate(&m.distribution(), a.subset, count, space)?;
    if est.empty {
        eprintln!("warning: subset {} has no events; writing zeros", a.subset);
    }
    io::write_intensity(&a.out, &est.values, space.duration())?;
    Ok(())
}
