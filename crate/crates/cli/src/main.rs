//! `qbell`: Bell-inequality maximization, boundary scans and verification
//! suites from the command line.
//!
//! Exit codes: 0 success, 1 verification failure, 2 input error, 3 numerical
//! abort.

mod config;
mod state;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qbell::entgeo::{self, BoundaryKind, BoundarySpec};
use qbell::optimize::{self, OptimizerConfig};
use qbell::par::{self, Execution};
use qbell::qstate::Family;
use qbell::scan::{self, Axis, Format, Grid, Orthant, ScanJob, Slice, Task};
use qbell::verify::{self, SuiteOptions};
use qbell::{Error, Result};
use serde::Serialize;

use config::FileConfig;

#[derive(Parser, Debug)]
#[command(name = "qbell", version, about = "CGLMP Bell inequality maximization and entanglement geometry")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct GlobalArgs {
    /// Base seed for every randomized start.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Nelder-Mead restarts per optimization.
    #[arg(long, global = true)]
    restarts: Option<usize>,
    /// Optimizer tolerance (both function spread and simplex diameter).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Worker threads; defaults to the number of processors.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file (scan dataset, or a JSON dump for the other commands).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// csv or json.
    #[arg(long, global = true)]
    format: Option<Format>,
    /// TOML or JSON file with the same keys as the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct StateArgs {
    /// State family: isotropic, two_param, line, offline, tetra2.
    #[arg(long)]
    family: Option<Family>,
    /// Comma-separated family parameters.
    #[arg(long, allow_hyphen_values = true)]
    params: Option<String>,
    /// JSON density-matrix file instead of a family member.
    #[arg(long)]
    state: Option<PathBuf>,
    /// Local dimension.
    #[arg(long)]
    d: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Maximize I_d over measurement settings.
    MaxBell(StateArgs),
    /// Evaluate a grid of family members and write a dataset.
    Scan(ScanArgs),
    /// CGLMP violation boundary along a ray, or a closed-form boundary value.
    Boundary(BoundaryArgs),
    /// Positivity, PPT, witness and CGLMP status of a family member.
    Classify(StateArgs),
    /// Lower bound on the squared m-concurrence.
    Concurrence(StateArgs),
    /// Run a verification suite and print expected vs computed values.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct ScanArgs {
    /// Job file (TOML, or JSON by extension).
    #[arg(long)]
    job: Option<PathBuf>,
    #[arg(long)]
    family: Option<Family>,
    #[arg(long)]
    d: Option<usize>,
    /// Axis as min:max:points; repeat once per axis.
    #[arg(long = "axis", allow_hyphen_values = true)]
    axes: Vec<String>,
    /// Map two axes (a, b) to (a, b/2, b/2).
    #[arg(long)]
    equal_split: bool,
    /// Use this many directions pushed to the positivity boundary instead of axes.
    #[arg(long)]
    directions: Option<usize>,
    /// all, positive or one_negative.
    #[arg(long, default_value = "all")]
    orthant: String,
    /// Comma-separated tasks: positivity, ppt, witness, cglmp, concurrence, octahedron, cylinder.
    #[arg(long)]
    tasks: Option<String>,
    /// Run point by point on the calling thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args, Debug)]
struct BoundaryArgs {
    #[command(flatten)]
    state: StateArgs,
    /// Closed-form boundary to evaluate at the point instead of the CGLMP search.
    #[arg(long)]
    kind: Option<String>,
    /// Component of the closed-form boundary; default is the minimum.
    #[arg(long)]
    component: Option<usize>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// analytic-max, local-bound, horodecki, line-concurrence or sphere-fit.
    suite: String,
    /// Largest dimension for analytic-max.
    #[arg(long, default_value_t = 6)]
    dmax: usize,
    /// Sample count for local-bound, horodecki and sphere-fit.
    #[arg(long)]
    samples: Option<usize>,
    /// Grid step for line-concurrence.
    #[arg(long, default_value_t = 0.02)]
    step: f64,
}

enum Outcome {
    Ok,
    VerifyFailed,
}

struct Context {
    cfg: OptimizerConfig,
    settings: FileConfig,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::VerifyFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    let g = cli.global;
    let file = match &g.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let flags = FileConfig {
        seed: g.seed,
        restarts: g.restarts,
        tol: g.tol,
        threads: g.threads,
        output: g.output,
        format: g.format,
        ..Default::default()
    };
    let settings = file.merged(flags);
    par::init_threads(settings.threads);
    let cfg = settings.apply(&OptimizerConfig::default())?;
    let ctx = Context { cfg, settings };
    match cli.command {
        Command::MaxBell(a) => max_bell(&ctx, &a),
        Command::Scan(a) => scan_cmd(&ctx, &a),
        Command::Boundary(a) => boundary(&ctx, &a),
        Command::Classify(a) => classify(&ctx, &a),
        Command::Concurrence(a) => concurrence(&ctx, &a),
        Command::Verify(a) => verify_cmd(&ctx, &a),
    }
}

fn resolve_state(a: &StateArgs) -> Result<(qbell::qstate::Operator, usize)> {
    let params = a.params.as_deref().map(state::parse_params).transpose()?;
    state::resolve(a.family, params.as_deref(), a.state.as_deref(), a.d)
}

fn json_mode(ctx: &Context) -> bool {
    ctx.settings.format == Some(Format::Json)
}

/// Print `value` as JSON when requested, and dump it to `--output` if set.
fn emit<T: Serialize>(ctx: &Context, value: &T, text: impl FnOnce() -> String) -> Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    if json_mode(ctx) {
        println!("{json}");
    } else {
        println!("{}", text());
    }
    if let Some(path) = &ctx.settings.output {
        write_file(path, &(json + "\n"))?;
    }
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

fn max_bell(ctx: &Context, a: &StateArgs) -> Result<Outcome> {
    let (rho, d) = resolve_state(a)?;
    let r = optimize::maximize_bell(&rho, d, &ctx.cfg)?;
    emit(ctx, &r, || {
        format!(
            "max I_{d} = {:.12}\nrestarts: {}\nconverged: {}",
            r.value,
            r.restarts_used,
            if r.converged { "yes" } else { "no" }
        )
    })?;
    Ok(Outcome::Ok)
}

fn parse_axis(s: &str) -> Result<Axis> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::Parse(format!("axis '{s}' must be min:max:points"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let min = parts[0].trim().parse().map_err(|_| bad())?;
    let max = parts[1].trim().parse().map_err(|_| bad())?;
    let points = parts[2].trim().parse().map_err(|_| bad())?;
    Ok(Axis::new(min, max, points))
}

fn parse_enum<T: serde::de::DeserializeOwned>(what: &str, s: &str) -> Result<T> {
    let key = s.trim().to_ascii_lowercase().replace('-', "_");
    serde_json::from_value(serde_json::Value::String(key)).map_err(|_| Error::Parse(format!("unknown {what} '{s}'")))
}

fn job_from_flags(a: &ScanArgs) -> Result<ScanJob> {
    let family = a.family.ok_or_else(|| Error::Parse("scan needs --job or --family".into()))?;
    let grid = match a.directions {
        Some(count) => {
            if !a.axes.is_empty() {
                return Err(Error::Parse("--directions and --axis are exclusive".into()));
            }
            Grid::Directions { count, orthant: parse_enum::<Orthant>("orthant", &a.orthant)? }
        }
        None => Grid::Rectilinear {
            axes: a.axes.iter().map(|s| parse_axis(s)).collect::<Result<_>>()?,
            slice: if a.equal_split { Slice::EqualSplit } else { Slice::Full },
        },
    };
    let tasks = match &a.tasks {
        Some(t) => t.split(',').map(|s| parse_enum::<Task>("task", s)).collect::<Result<_>>()?,
        None => vec![Task::Positivity, Task::Ppt],
    };
    let mut job = ScanJob::new(family, grid, tasks);
    job.d = a.d;
    Ok(job)
}

fn scan_cmd(ctx: &Context, a: &ScanArgs) -> Result<Outcome> {
    let mut job = match &a.job {
        Some(path) => {
            if a.family.is_some() || !a.axes.is_empty() || a.directions.is_some() {
                return Err(Error::Parse("--job cannot be combined with grid flags".into()));
            }
            ScanJob::load(path)?
        }
        None => job_from_flags(a)?,
    };
    let overrides = FileConfig { output: None, format: None, ..ctx.settings.clone() };
    job.optimizer = overrides.apply(&job.optimizer)?;
    job.validate()?;
    let path = ctx
        .settings
        .output
        .clone()
        .or_else(|| job.output.as_ref().map(|o| o.path.clone()))
        .ok_or_else(|| Error::Config("scan needs an output path (--output or [output] in the job)".into()))?;
    let format = ctx.settings.format.or_else(|| job.output.as_ref().map(|o| o.format)).unwrap_or_default();
    let exec = if a.sequential { Execution::Sequential } else { Execution::default() };
    let meta = scan::run_and_write(&job, &path, format, exec)?;
    println!(
        "{} records ({} with errors) -> {} in {:.2} s",
        meta.records,
        meta.failures,
        path.display(),
        meta.wall_time_seconds
    );
    Ok(Outcome::Ok)
}

#[derive(Serialize)]
struct BoundaryReport {
    family: Option<Family>,
    point: Option<Vec<f64>>,
    nu_star: f64,
    boundary_point: Option<Vec<f64>>,
    max_i_d: f64,
}

#[derive(Serialize)]
struct ClosedFormReport {
    family: Family,
    kind: BoundaryKind,
    component: Option<usize>,
    point: Vec<f64>,
    value: f64,
}

fn boundary(ctx: &Context, a: &BoundaryArgs) -> Result<Outcome> {
    if let Some(kind) = &a.kind {
        let kind: BoundaryKind = kind.parse()?;
        let family = a.state.family.ok_or_else(|| Error::Parse("--kind needs --family".into()))?;
        let point =
            state::parse_params(a.state.params.as_deref().ok_or_else(|| Error::Parse("--params is required".into()))?)?;
        let mut spec =
            BoundarySpec::new(family, kind).with_dimension(a.state.d.unwrap_or_else(|| family.default_dimension()));
        spec.component = a.component;
        let value = entgeo::boundary_value(&spec, &point)?;
        let report = ClosedFormReport { family, kind, component: a.component, point, value };
        emit(ctx, &report, || format!("{} boundary value = {:.12}", kind.name(), value))?;
        return Ok(Outcome::Ok);
    }
    let (rho, d) = resolve_state(&a.state)?;
    let (nu, r) = optimize::violation_boundary(&rho, d, &ctx.cfg)?;
    let point = a.state.params.as_deref().map(state::parse_params).transpose()?;
    let boundary_point =
        point.as_ref().filter(|_| a.state.family.is_some()).map(|p| p.iter().map(|x| x * nu).collect::<Vec<_>>());
    let report = BoundaryReport { family: a.state.family, point, nu_star: nu, boundary_point, max_i_d: r.value };
    emit(ctx, &report, || {
        let mut s = format!("nu* = {:.12}\nmax I_{d} = {:.12}", nu, r.value);
        if let Some(b) = &report.boundary_point {
            s.push_str(&format!("\nboundary point = {}", fmt_list(b)));
        }
        s
    })?;
    Ok(Outcome::Ok)
}

fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.10}")).collect();
    format!("({})", parts.join(", "))
}

fn classify(ctx: &Context, a: &StateArgs) -> Result<Outcome> {
    let family = a.family.ok_or_else(|| Error::Parse("classify needs --family".into()))?;
    if a.state.is_some() {
        return Err(Error::Parse("classify works on family members only".into()));
    }
    let point = state::parse_params(a.params.as_deref().ok_or_else(|| Error::Parse("--params is required".into()))?)?;
    let d = a.d.unwrap_or_else(|| family.default_dimension());
    let c = entgeo::classify_in(family, &point, d, &ctx.cfg)?;
    emit(ctx, &c, || {
        let opt = |v: Option<bool>| v.map_or("n/a".to_string(), |b| b.to_string());
        let mut s = format!(
            "family: {}\npoint: {}\npositive: {} (min eig {:.3e})\nppt: {} (min eig {:.3e})\nwitness: {:?}\nbound entangled: {}\ncglmp violating: {}",
            c.family,
            fmt_list(&c.point),
            c.positive,
            c.min_eigenvalue,
            c.ppt,
            c.ppt_min_eigenvalue,
            c.witness_separable,
            c.bound_entangled,
            opt(c.cglmp_violating)
        );
        if let Some(m) = c.cglmp_margin {
            s.push_str(&format!(" (max I_d - 2 = {m:.6e})"));
        }
        if let Some(e) = &c.cglmp_error {
            s.push_str(&format!("\ncglmp error: {e}"));
        }
        s
    })?;
    Ok(Outcome::Ok)
}

#[derive(Serialize)]
struct ConcurrenceReport {
    lower_bound: f64,
    raw_bound: f64,
    analytic: Option<f64>,
    #[serde(flatten)]
    result: entgeo::ConcurrenceResult,
}

fn concurrence(ctx: &Context, a: &StateArgs) -> Result<Outcome> {
    let (rho, d) = resolve_state(a)?;
    let r = entgeo::m_concurrence_lower_bound(&rho, d, &ctx.cfg)?;
    let params = a.params.as_deref().map(state::parse_params).transpose()?;
    let analytic = match (a.family, params.as_deref()) {
        (Some(Family::Line), Some(&[al, b, g])) if (b - g).abs() < 1e-15 => {
            Some(entgeo::m_concurrence_line_analytic(al, 2.0 * b))
        }
        _ => None,
    };
    let report = ConcurrenceReport { lower_bound: r.lower_bound, raw_bound: r.raw_bound, analytic, result: r };
    emit(ctx, &report, || {
        let mut s =
            format!("C_m^2 lower bound = {:.12}\nunrotated bound = {:.12}", report.lower_bound, report.raw_bound);
        if let Some(x) = analytic {
            s.push_str(&format!("\nclosed form = {x:.12}"));
        }
        s
    })?;
    Ok(Outcome::Ok)
}

fn verify_cmd(ctx: &Context, a: &VerifyArgs) -> Result<Outcome> {
    let defaults = SuiteOptions::default();
    let opts = SuiteOptions {
        optimizer: ctx.cfg.clone(),
        dmax: a.dmax,
        samples: a.samples.unwrap_or(defaults.samples),
        step: a.step,
    };
    let report = verify::run_suite(&a.suite, &opts)?;
    emit(ctx, &report, || report.to_string())?;
    Ok(if report.passed() { Outcome::Ok } else { Outcome::VerifyFailed })
}
