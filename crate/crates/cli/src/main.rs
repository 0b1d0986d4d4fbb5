//! `genprof`: simulate data, fit ODE models by generalized profiling, and
//! plot the results.
//!
//! Exit codes: 0 success, 1 fit or I/O failure, 2 usage or validation error.

mod config;
mod report;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use genprof::models::{self, FullParameterVector, ModelSpec};
use genprof::profiling::{ProfilingError, Profiler};
use genprof::{fit, Dataset, GridSpec, NoiseKind};

use config::{parse_list, parse_times, RunConfig};
use report::{Header, RunReport, Table, Timings};
use svg::{Panel, Series, Style};

#[derive(Parser)]
#[command(name = "genprof", version, about = "ODE parameter estimation by generalized profiling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a model's solution with seeded noise and write a dataset CSV.
    Simulate(SimulateArgs),
    /// Fit a model to a dataset; writes report.json and trace.csv.
    Fit(FitArgs),
    /// Sample the interpolating splines of a dataset and their slopes.
    Interp(InterpArgs),
    /// Draw a trace (and optionally its data) as SVG.
    Plot(PlotArgs),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path (a file for simulate and interp, a directory otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    model: Option<String>,
    /// `gaussian` or `lognormal`.
    #[arg(long)]
    noise: Option<String>,
    /// True ODE parameters, comma separated.
    #[arg(long)]
    params: Option<String>,
    /// True initial state, comma separated.
    #[arg(long)]
    initial: Option<String>,
    /// True noise scale.
    #[arg(long)]
    sigma: Option<f64>,
    /// `start:end:step` or a comma-separated list (default 0:100:10).
    #[arg(long)]
    times: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Echoed into the report; the dataset header seed is used otherwise.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Number of uniform enforcement points.
    #[arg(long)]
    grid_k: Option<usize>,
    /// Also write fit.svg.
    #[arg(long)]
    plot: bool,
    /// Record wall-clock time in the report (makes it non-reproducible).
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct InterpArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Number of uniform sample points.
    #[arg(long)]
    grid_k: Option<usize>,
    /// Also write an SVG next to the output file.
    #[arg(long)]
    plot: bool,
}

#[derive(Args)]
struct PlotArgs {
    #[command(flatten)]
    common: Common,
    /// Trace CSV from `fit` (`t,f_1..,xi_1..`).
    #[arg(long)]
    trace: PathBuf,
    /// Dataset whose observations are overlaid.
    #[arg(long)]
    data: Option<PathBuf>,
}

/// An error with its exit code.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

type Outcome<T> = Result<T, Failure>;

trait UsageExt<T> {
    fn usage(self) -> Outcome<T>;
    fn runtime(self) -> Outcome<T>;
}

impl<T, E: Into<anyhow::Error>> UsageExt<T> for Result<T, E> {
    fn usage(self) -> Outcome<T> {
        self.map_err(|e| Failure::Usage(e.into()))
    }
    fn runtime(self) -> Outcome<T> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => run_fit(a),
        Command::Interp(a) => interp(a),
        Command::Plot(a) => plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn base_config(common: &Common) -> Outcome<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p).usage()?,
        None => RunConfig::default(),
    };
    if let Some(o) = &common.out {
        cfg.out = Some(o.clone());
    }
    Ok(cfg)
}

fn model_named(name: &str) -> Outcome<ModelSpec> {
    models::builtin(name).usage()
}

fn noise_named(cfg: &RunConfig) -> Outcome<NoiseKind> {
    cfg.noise.as_deref().unwrap_or("gaussian").parse::<NoiseKind>().usage()
}

fn read_dataset(path: &Path) -> Outcome<Dataset> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read dataset {}", path.display()))
        .usage()?;
    Dataset::from_csv(&text)
        .with_context(|| format!("{}", path.display()))
        .usage()
}

fn write_file(path: &Path, contents: &str) -> Outcome<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("cannot create {}", dir.display()))
            .runtime()?;
    }
    std::fs::write(path, contents)
        .with_context(|| format!("cannot write {}", path.display()))
        .runtime()
}

fn simulate(a: SimulateArgs) -> Outcome<()> {
    let mut cfg = base_config(&a.common)?;
    if a.model.is_some() {
        cfg.model = a.model;
    }
    if a.noise.is_some() {
        cfg.noise = a.noise;
    }
    if let Some(p) = &a.params {
        cfg.params = Some(parse_list(p).usage()?);
    }
    if let Some(p) = &a.initial {
        cfg.initial = Some(parse_list(p).usage()?);
    }
    if let Some(t) = &a.times {
        cfg.times = Some(parse_times(t).usage()?);
    }
    if a.sigma.is_some() {
        cfg.sigma = a.sigma;
    }
    if a.seed.is_some() {
        cfg.seed = a.seed;
    }

    let model = model_named(cfg.require_model().usage()?)?;
    let noise = noise_named(&cfg)?;
    let params = cfg.params.clone().ok_or_else(|| anyhow!("simulate needs --params")).usage()?;
    let initial = cfg.initial.clone().ok_or_else(|| anyhow!("simulate needs --initial")).usage()?;
    let sigma = cfg.sigma.ok_or_else(|| anyhow!("simulate needs --sigma")).usage()?;
    let times = match cfg.times.clone() {
        Some(t) => t,
        None => parse_times("0:100:10").usage()?,
    };
    let full = FullParameterVector::new(params, initial, sigma).usage()?;
    model.check_full(&full).usage()?;
    let data = genprof::synth::simulate(&model, &full, noise, &times, cfg.seed.unwrap_or(0)).usage()?;
    let csv = data.to_csv();
    match &cfg.out {
        Some(p) => write_file(p, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

/// `seed=N` from a dataset header written by `simulate`.
fn header_seed(d: &Dataset) -> Option<u64> {
    d.comments()
        .iter()
        .find_map(|c| c.trim().strip_prefix("seed=").and_then(|s| s.trim().parse().ok()))
}

fn is_validation(e: &ProfilingError) -> bool {
    matches!(
        e,
        ProfilingError::Config(_)
            | ProfilingError::Grid(_)
            | ProfilingError::SpeciesMismatch { .. }
            | ProfilingError::Model(_)
            | ProfilingError::Numerics(genprof::numerics::NumericsError::InvalidOptions(_))
            | ProfilingError::Numerics(genprof::numerics::NumericsError::InvalidBounds(_))
    )
}

fn run_fit(a: FitArgs) -> Outcome<()> {
    let mut cfg = base_config(&a.common)?;
    if a.model.is_some() {
        cfg.model = a.model;
    }
    if a.noise.is_some() {
        cfg.noise = a.noise;
    }
    if a.data.is_some() {
        cfg.data = a.data;
    }
    if a.seed.is_some() {
        cfg.seed = a.seed;
    }
    if let Some(n) = a.iterations {
        cfg.fit.iterations = n;
    }
    if let Some(k) = a.grid_k {
        cfg.fit.grid = GridSpec::uniform(k);
    }
    cfg.plot |= a.plot;

    let model = model_named(cfg.require_model().usage()?)?;
    let noise = noise_named(&cfg)?;
    let data = read_dataset(cfg.require_data().usage()?)?;
    let out = cfg.require_out().usage()?.to_path_buf();
    if data.species_count() != model.dimension() {
        return Err(Failure::Usage(anyhow!(
            "dataset has {} species but model `{}` has {}",
            data.species_count(),
            model.name(),
            model.dimension()
        )));
    }

    let header = Header {
        model: model.name().to_string(),
        noise: noise.to_string(),
        seed: cfg.seed.or_else(|| header_seed(&data)),
        species_names: data.species_names().to_vec(),
        param_names: model.param_names().to_vec(),
        config: cfg.clone(),
    };
    let started = Instant::now();
    match fit(&data, &model, noise, &cfg.fit) {
        Ok(r) => {
            let timings = a.timings.then(|| Timings {
                fit_seconds: started.elapsed().as_secs_f64(),
            });
            let rep = RunReport::from_fit(header, &r, timings);
            write_file(&out.join("report.json"), &rep.to_json().runtime()?)?;
            let trace = report::trace_csv(&r).runtime()?;
            write_file(&out.join("trace.csv"), &trace)?;
            if cfg.plot {
                let table = Table::parse(&trace).map_err(|e| Failure::Runtime(anyhow!(e)))?;
                write_file(&out.join("fit.svg"), &trace_svg(&table, Some(&data))?)?;
            }
            Ok(())
        }
        Err(e) if e.records.is_empty() && is_validation(&e.error) => Err(Failure::Usage(e.into())),
        Err(e) => {
            let rep = RunReport::from_failure(header, &e);
            write_file(&out.join("report.json"), &rep.to_json().runtime()?)?;
            Err(Failure::Runtime(e.into()))
        }
    }
}

fn interp(a: InterpArgs) -> Outcome<()> {
    let mut cfg = base_config(&a.common)?;
    if a.data.is_some() {
        cfg.data = a.data;
    }
    if let Some(k) = a.grid_k {
        cfg.fit.grid = GridSpec::uniform(k);
    }
    cfg.plot |= a.plot;
    let data = read_dataset(cfg.require_data().usage()?)?;
    let out = cfg.require_out().usage()?.to_path_buf();
    let grid = cfg.fit.grid.resolve(data.times()).usage()?;

    // Interpolation does not involve a model; any with the right species
    // count satisfies the profiler's bookkeeping.
    let stand_in = ModelSpec::new(
        "interp",
        data.species_names().to_vec(),
        Vec::new(),
        Vec::new(),
        Vec::new(),
        std::sync::Arc::new(|_, _, _, out: &mut [f64]| out.fill(0.0)),
    )
    .usage()?;
    let p = Profiler::new(&data, &stand_in, NoiseKind::Gaussian, grid.clone()).usage()?;
    let splines = p.interpolate().runtime()?;
    let csv = report::interp_csv(&splines, &grid).runtime()?;
    write_file(&out, &csv)?;
    if cfg.plot {
        let table = Table::parse(&csv).map_err(|e| Failure::Runtime(anyhow!(e)))?;
        let svg = svg::render(&[states_panel(&table, Some(&data), "Interpolating splines")]);
        write_file(&out.with_extension("svg"), &svg)?;
    }
    Ok(())
}

fn plot(a: PlotArgs) -> Outcome<()> {
    let cfg = base_config(&a.common)?;
    let out = cfg.require_out().usage()?.to_path_buf();
    let text = std::fs::read_to_string(&a.trace)
        .with_context(|| format!("cannot read trace {}", a.trace.display()))
        .usage()?;
    let table = Table::parse(&text)
        .map_err(|e| anyhow!("{}: {e}", a.trace.display()))
        .usage()?;
    let data = match a.data.as_deref().or(cfg.data.as_deref()) {
        Some(p) => Some(read_dataset(p)?),
        None => None,
    };
    write_file(&out.join("fit.svg"), &trace_svg(&table, data.as_ref())?)
}

fn states_panel(table: &Table, data: Option<&Dataset>, title: &str) -> Panel {
    let t = table.column("t").unwrap_or(&[]);
    let mut series = Vec::new();
    for (s, f) in table.numbered("f_").into_iter().enumerate() {
        let name = data
            .and_then(|d| d.species_names().get(s))
            .cloned()
            .unwrap_or_else(|| format!("f_{}", s + 1));
        series.push(Series {
            name: name.clone(),
            style: Style::Line,
            colour: s,
            points: t.iter().copied().zip(f.iter().copied()).collect(),
        });
        if let Some(d) = data.filter(|d| s < d.species_count()) {
            series.push(Series {
                name: format!("{name} observed"),
                style: Style::Dots,
                colour: s,
                points: d.times().iter().copied().zip(d.species(s).iter().copied()).collect(),
            });
        }
    }
    Panel {
        title: title.into(),
        x_label: "t".into(),
        series,
    }
}

/// Two panels: fitted states with data, and the discrepancy traces.
fn trace_svg(table: &Table, data: Option<&Dataset>) -> Outcome<String> {
    let t = table.column("t").ok_or_else(|| anyhow!("trace has no `t` column")).usage()?;
    let f = table.numbered("f_");
    let xi = table.numbered("xi_");
    if t.is_empty() || xi.is_empty() {
        return Err(Failure::Usage(anyhow!("trace has no discrepancy samples")));
    }
    if f.len() != xi.len() {
        return Err(Failure::Usage(anyhow!(
            "trace has {} spline columns but {} discrepancy columns",
            f.len(),
            xi.len()
        )));
    }
    let xi_panel = Panel {
        title: "Discrepancy".into(),
        x_label: "t".into(),
        series: xi
            .iter()
            .enumerate()
            .map(|(s, col)| Series {
                name: format!("xi_{}", s + 1),
                style: Style::Line,
                colour: s,
                points: t.iter().copied().zip(col.iter().copied()).collect(),
            })
            .collect(),
    };
    Ok(svg::render(&[states_panel(table, data, "Fitted splines"), xi_panel]))
}
