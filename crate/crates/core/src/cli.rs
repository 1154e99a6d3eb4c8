//! Command-line front end.
//!
//! Exit codes: 0 success, 1 configuration error, 2 boundary hit or partial
//! result, 3 verification failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::closed_forms::{ClosedForm, Preset, SolutionFamily};
use crate::field::{FieldGrid, Perturbed, VelocityField};
use crate::geodesics::{integrate_geodesic, GeodesicError, PhaseState, Trajectory};
use crate::geometry::Chart;
use crate::grid::{Axis, GridSpec};
use crate::hodograph::{solve_on_grid, trace_blowup, BlowupOptions, HodographSystem, NewtonOptions, SystemKind};
use crate::io::{write_locus_csv, write_locus_json, write_trajectory_csv, write_trajectory_json};
use crate::oracle::{euler_residual, HodographField, ResidualReport};

#[derive(Debug, Parser)]
#[command(
    name = "hodoflow",
    version,
    about = "Geodesic flows and hodograph solutions of the pressureless Euler equation"
)]
#[command(args_override_self = true)]
pub struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// JSON file whose keys mirror the long flags; flags given on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one characteristic and write the trajectory with its integrals.
    Geodesic(GeodesicArgs),
    /// Evaluate a family or solve a hodograph system on a grid.
    Field(FieldArgs),
    /// Trace the locus det M = 0 of a hodograph system on a grid.
    Blowup(FieldArgs),
    /// Finite-difference Euler residual of a family or hodograph system.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Args, Clone, Default)]
pub struct ChartArgs {
    /// cylinder, cone, sphere2 or sphere3.
    #[arg(long)]
    pub chart: Option<String>,
    /// Cone opening parameter in (0, 1].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Radius of the cylinder or sphere.
    #[arg(long = "R")]
    pub radius: Option<f64>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct OutputArgs {
    /// Output file (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct GeodesicArgs {
    #[command(flatten)]
    pub chart: ChartArgs,
    /// Initial coordinates followed by velocities, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub init: Option<String>,
    #[arg(long = "t-end", allow_hyphen_values = true)]
    pub t_end: Option<f64>,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Clone)]
pub struct SourceArgs {
    #[command(flatten)]
    pub chart: ChartArgs,
    /// Built-in solution family id.
    #[arg(long, conflicts_with = "system")]
    pub family: Option<String>,
    /// Family parameters as JSON, or @file.
    #[arg(long)]
    pub params: Option<String>,
    /// Hodograph system as JSON (`{"family": "s2_stationary", "F1": …, "F2": …}`), or @file.
    #[arg(long)]
    pub system: Option<String>,
    /// Starting velocities for Newton, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub guess: Option<String>,
    /// Grid axis `name=min:max:count`; repeat once per coordinate.
    #[arg(long)]
    pub grid: Vec<String>,
    /// Evaluation time (default: the family's preset time, else 0).
    #[arg(long, allow_hyphen_values = true)]
    pub t: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FieldArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long = "fd-step", default_value_t = 1e-4)]
    pub fd_step: f64,
    /// Largest acceptable residual; exit 3 above it.
    #[arg(long, default_value_t = 1e-5)]
    pub threshold: f64,
    /// Declare the field independent of t.
    #[arg(long)]
    pub stationary: bool,
    /// Constant offset added to every velocity, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub perturb: Option<String>,
    /// Random points in the grid box instead of the grid nodes.
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Failure of a command, mapped to an exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
    Partial(String),
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Runtime(_) => 1,
            CliError::Partial(_) => 2,
            CliError::Verification(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Runtime(m) | CliError::Partial(m) | CliError::Verification(m) => m,
        }
    }
}

fn config<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Config(e.to_string())
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let raw: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match parse_with_config(&raw) {
        Ok(cli) => cli,
        Err(ParseFailure::Clap(e)) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
        Err(ParseFailure::Config(msg)) => {
            eprintln!("error: {msg}");
            return 1;
        }
    };
    let result = match cli.workers {
        Some(0) => Err(CliError::Config("--workers must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&cli.command)),
            Err(e) => Err(runtime(e)),
        },
        None => execute(&cli.command),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

enum ParseFailure {
    Clap(clap::Error),
    Config(String),
}

/// Splices the config file's keys in front of the command-line flags, skipping
/// keys that also appear on the command line.
fn parse_with_config(raw: &[OsString]) -> Result<Cli, ParseFailure> {
    let first = Cli::try_parse_from(raw).map_err(ParseFailure::Clap)?;
    let Some(path) = first.config.clone() else {
        return Ok(first);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| ParseFailure::Config(format!("cannot read config {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| ParseFailure::Config(format!("config {} is not valid JSON: {e}", path.display())))?;
    let obj = value
        .as_object()
        .ok_or_else(|| ParseFailure::Config(format!("config {} must hold a JSON object", path.display())))?;
    let given: Vec<String> = raw
        .iter()
        .filter_map(|a| a.to_str())
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a).to_string())
        .collect();
    let sub_pos = raw
        .iter()
        .position(|a| matches!(a.to_str(), Some("geodesic" | "field" | "blowup" | "verify")))
        .ok_or_else(|| ParseFailure::Config("missing subcommand".into()))?;
    let mut spliced: Vec<OsString> = Vec::new();
    for (key, v) in obj {
        let flag = if key == "R" { "R".to_string() } else { key.replace('_', "-") };
        if given.contains(&flag) || flag == "config" || flag == "workers" && first.workers.is_some() {
            continue;
        }
        let mut push = |v: &serde_json::Value| -> Result<(), ParseFailure> {
            match v {
                serde_json::Value::Bool(true) => spliced.push(format!("--{flag}").into()),
                serde_json::Value::Bool(false) | serde_json::Value::Null => {}
                serde_json::Value::String(s) => spliced.push(format!("--{flag}={s}").into()),
                serde_json::Value::Number(n) => spliced.push(format!("--{flag}={n}").into()),
                serde_json::Value::Array(items) if flag == "init" || flag == "guess" || flag == "perturb" => {
                    let list: Vec<String> = items.iter().map(|x| x.to_string()).collect();
                    spliced.push(format!("--{flag}={}", list.join(",")).into());
                }
                other => spliced.push(format!("--{flag}={other}").into()),
            }
            Ok(())
        };
        match v {
            serde_json::Value::Array(items) if flag == "grid" => {
                for item in items {
                    push(item)?;
                }
            }
            _ => push(v)?,
        }
    }
    let mut merged: Vec<OsString> = raw[..=sub_pos].to_vec();
    merged.extend(spliced);
    merged.extend_from_slice(&raw[sub_pos + 1..]);
    Cli::try_parse_from(&merged).map_err(ParseFailure::Clap)
}

fn execute(cmd: &Command) -> Result<(), CliError> {
    match cmd {
        Command::Geodesic(a) => cmd_geodesic(a),
        Command::Field(a) => cmd_field(a),
        Command::Blowup(a) => cmd_blowup(a),
        Command::Verify(a) => cmd_verify(a),
    }
}

fn parse_list(name: &str, text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| CliError::Config(format!("--{name} expects comma-separated numbers, got {text:?}")))
}

fn read_json_arg(name: &str, text: &str) -> Result<serde_json::Value, CliError> {
    let body = match text.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("--{name} {path}: {e}")))?,
        None => text.to_string(),
    };
    serde_json::from_str(&body).map_err(|e| CliError::Config(format!("--{name} is not valid JSON: {e}")))
}

/// Builds the chart from flags, falling back to `default` for anything unset.
fn resolve_chart(args: &ChartArgs, default: Option<Chart>) -> Result<Chart, CliError> {
    let chart = match (&args.chart, default) {
        (Some(name), default) => {
            let same_kind = default.filter(|d| format!("{:?}", d.kind()).eq_ignore_ascii_case(name));
            match name.as_str() {
                "cone" => {
                    let alpha = args
                        .alpha
                        .ok_or_else(|| CliError::Config("missing required key --alpha for chart cone".into()))?;
                    Chart::Cone { alpha }
                }
                "cylinder" | "sphere2" | "sphere3" => {
                    let radius = args.radius.or(same_kind.and_then(|c| c.radius())).unwrap_or(1.0);
                    match name.as_str() {
                        "cylinder" => Chart::Cylinder { radius },
                        "sphere2" => Chart::Sphere2 { radius },
                        _ => Chart::Sphere3 { radius },
                    }
                }
                other => {
                    return Err(CliError::Config(format!(
                        "unknown chart {other:?}; expected cylinder, cone, sphere2 or sphere3"
                    )))
                }
            }
        }
        (None, Some(mut d)) => {
            match &mut d {
                Chart::Cone { alpha } => *alpha = args.alpha.unwrap_or(*alpha),
                Chart::Cylinder { radius } | Chart::Sphere2 { radius } | Chart::Sphere3 { radius } => {
                    *radius = args.radius.unwrap_or(*radius)
                }
            }
            d
        }
        (None, None) => return Err(CliError::Config("missing required key --chart".into())),
    };
    chart.validate().map_err(config)?;
    Ok(chart)
}

fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_trajectory(traj: &Trajectory, out: &OutputArgs) -> Result<(), CliError> {
    let mut w = open_output(&out.out)?;
    match out.format {
        Format::Csv => write_trajectory_csv(traj, &mut w),
        Format::Json => write_trajectory_json(traj, &mut w),
    }
    .map_err(runtime)?;
    w.flush().map_err(runtime)
}

pub fn cmd_geodesic(a: &GeodesicArgs) -> Result<(), CliError> {
    let chart = resolve_chart(&a.chart, None)?;
    let init = parse_list("init", a.init.as_deref().ok_or_else(|| config("missing required key --init"))?)?;
    let t_end = a.t_end.ok_or_else(|| config("missing required key --t-end"))?;
    let n = chart.dim();
    if init.len() != 2 * n {
        return Err(CliError::Config(format!(
            "--init needs {} values ({n} coordinates then {n} velocities), got {}",
            2 * n,
            init.len()
        )));
    }
    if !(a.tol > 0.0) {
        return Err(config("--tol must be positive"));
    }
    let start = PhaseState::new(0.0, init[..n].to_vec(), init[n..].to_vec());
    chart.check_interior(&start.coords).map_err(config)?;
    match integrate_geodesic(&chart, &start, t_end, a.tol) {
        Ok(traj) => write_trajectory(&traj, &a.output),
        Err(GeodesicError::BoundaryHit { state, partial }) => {
            write_trajectory(&partial, &a.output)?;
            Err(CliError::Partial(format!("characteristic left the chart at t = {}", state.t)))
        }
        Err(GeodesicError::StepUnderflow { t, partial, .. }) | Err(GeodesicError::MaxSteps { t, partial }) => {
            write_trajectory(&partial, &a.output)?;
            Err(CliError::Partial(format!("integration stopped at t = {t}")))
        }
        Err(e) => Err(config(e)),
    }
}

/// A resolved field source: a closed-form family or a hodograph system.
pub enum Source {
    Family { field: ClosedForm, preset: Preset },
    System { system: HodographSystem, guess: Vec<f64> },
}

impl Source {
    pub fn chart(&self) -> Chart {
        match self {
            Source::Family { field, .. } => field.chart,
            Source::System { system, .. } => system.chart,
        }
    }

    fn default_t(&self) -> f64 {
        match self {
            Source::Family { preset, .. } => preset.t,
            Source::System { .. } => 0.0,
        }
    }

    fn hodograph(&self) -> Result<HodographSystem, CliError> {
        match self {
            Source::Family { field, .. } => field.hodograph_system().map_err(config),
            Source::System { system, .. } => Ok(system.clone()),
        }
    }
}

pub fn resolve_source(a: &SourceArgs) -> Result<Source, CliError> {
    let guess = a.guess.as_deref().map(|g| parse_list("guess", g)).transpose()?;
    match (&a.family, &a.system) {
        (Some(id), None) => {
            let preset = Preset::for_id(id).map_err(config)?;
            let mut json = match &a.params {
                Some(p) => read_json_arg("params", p)?,
                None => serde_json::json!({}),
            };
            let obj = json.as_object_mut().ok_or_else(|| config("--params must be a JSON object"))?;
            obj.insert("family".into(), serde_json::Value::String(id.clone()));
            let family = SolutionFamily::from_json_with_defaults(&json).map_err(config)?;
            let chart = resolve_chart(&a.chart, Some(preset.field.chart))?;
            let field = ClosedForm::new(chart, family).map_err(config)?;
            if guess.is_some() {
                eprintln!("warning: --guess is only used for hodograph systems");
            }
            Ok(Source::Family { field, preset })
        }
        (None, Some(text)) => {
            let mut json = read_json_arg("system", text)?;
            let sheet = json
                .as_object_mut()
                .and_then(|o| o.remove("sheet"))
                .map(|s| s.as_f64().ok_or_else(|| config("system sheet must be a number")))
                .transpose()?
                .unwrap_or(1.0);
            let kind: SystemKind = serde_json::from_value(json).map_err(|e| config(format!("--system: {e}")))?;
            let chart = resolve_chart(&a.chart, None)?;
            let system = HodographSystem::new(chart, kind).map_err(config)?.with_sheet(sheet);
            let guess = guess.unwrap_or_else(|| vec![0.0; chart.dim()]);
            if guess.len() != chart.dim() {
                return Err(config(format!("--guess needs {} values", chart.dim())));
            }
            Ok(Source::System { system, guess })
        }
        (None, None) => Err(config("missing required key --family or --system")),
        (Some(_), Some(_)) => Err(config("--family and --system are mutually exclusive")),
    }
}

fn default_counts(dim: usize) -> usize {
    if dim == 3 {
        22
    } else {
        50
    }
}

/// The grid from `--grid` flags, or the family's preset box.
pub fn resolve_grid(a: &SourceArgs, source: &Source) -> Result<GridSpec, CliError> {
    let chart = source.chart();
    if a.grid.is_empty() {
        return match source {
            Source::Family { preset, .. } => {
                let n = default_counts(chart.dim());
                let spans: Vec<(f64, f64, usize)> = preset.domain.iter().map(|(lo, hi)| (*lo, *hi, n)).collect();
                GridSpec::uniform(&chart, &spans).map_err(config)
            }
            Source::System { .. } => Err(config("missing required key --grid")),
        };
    }
    let axes = a.grid.iter().map(|g| Axis::parse(g)).collect::<Result<Vec<_>, _>>().map_err(config)?;
    GridSpec::for_chart(&chart, axes).map_err(config)
}

#[derive(Serialize)]
struct FieldSummary {
    rows: usize,
    valid: usize,
    invalid: usize,
}

fn write_field(fg: &FieldGrid, out: &OutputArgs) -> Result<(), CliError> {
    let mut w = open_output(&out.out)?;
    match out.format {
        Format::Csv => fg.write_csv(&mut w),
        Format::Json => fg.write_json(&mut w),
    }
    .map_err(runtime)?;
    w.flush().map_err(runtime)?;
    let summary = FieldSummary { rows: fg.values.len(), valid: fg.n_valid(), invalid: fg.values.len() - fg.n_valid() };
    eprintln!("{}", serde_json::to_string(&summary).expect("summary serializes"));
    Ok(())
}

pub fn cmd_field(a: &FieldArgs) -> Result<(), CliError> {
    let source = resolve_source(&a.source)?;
    let grid = resolve_grid(&a.source, &source)?;
    let t = a.source.t.unwrap_or_else(|| source.default_t());
    let fg = match &source {
        Source::Family { field, .. } => FieldGrid::sample(field, &grid, t),
        Source::System { system, guess } => {
            let solve = solve_on_grid(system, &grid, t, guess, &NewtonOptions::default());
            FieldGrid {
                chart: system.chart,
                t,
                grid,
                values: solve.velocities,
                provenance: serde_json::to_string(system).unwrap_or_default(),
            }
        }
    };
    write_field(&fg, &a.output)
}

pub fn cmd_blowup(a: &FieldArgs) -> Result<(), CliError> {
    let source = resolve_source(&a.source)?;
    let grid = resolve_grid(&a.source, &source)?;
    let t = a.source.t.unwrap_or_else(|| source.default_t());
    let system = source.hodograph()?;
    let seed = match &source {
        Source::Family { field, .. } => field.velocity(t, &grid.coords_of(0)).unwrap_or_else(|| vec![0.0; grid.dim()]),
        Source::System { guess, .. } => guess.clone(),
    };
    let locus = trace_blowup(&system, &grid, t, &seed, &BlowupOptions::default());
    let chart = source.chart();
    let mut w = open_output(&a.output.out)?;
    match a.output.format {
        Format::Csv => write_locus_csv(&chart, &locus, &mut w),
        Format::Json => write_locus_json(&chart, &locus, &mut w),
    }
    .map_err(runtime)?;
    w.flush().map_err(runtime)?;
    eprintln!(
        "{}",
        serde_json::json!({"points": locus.points().count(), "polylines": locus.polylines.len(), "masked": locus.masked})
    );
    Ok(())
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    field: &'a str,
    max: f64,
    mean: f64,
    n_nodes: usize,
    n_excluded: usize,
    fd_step: f64,
    threshold: f64,
    passed: bool,
}

fn verify_points(a: &VerifyArgs, grid: &GridSpec, chart: &Chart) -> Vec<Vec<f64>> {
    match a.points {
        None => grid.all_coords(),
        Some(n) => {
            let mut rng = rand::rngs::StdRng::seed_from_u64(a.seed);
            (0..n)
                .map(|_| {
                    grid.axes
                        .iter()
                        .map(|ax| if ax.max > ax.min { rng.gen_range(ax.min..ax.max) } else { ax.min })
                        .collect::<Vec<f64>>()
                })
                .filter(|x| chart.is_interior(x))
                .collect()
        }
    }
}

pub fn cmd_verify(a: &VerifyArgs) -> Result<(), CliError> {
    let source = resolve_source(&a.source)?;
    let grid = resolve_grid(&a.source, &source)?;
    let t = a.source.t.unwrap_or_else(|| source.default_t());
    if !(a.threshold > 0.0) {
        return Err(config("--threshold must be positive"));
    }
    let base: Box<dyn VelocityField + '_> = match &source {
        Source::Family { field, .. } => Box::new(field.clone()),
        Source::System { system, guess } => {
            let guess = guess.clone();
            Box::new(HodographField {
                system: system.clone(),
                options: NewtonOptions::default(),
                guess: Box::new(move |_, _| Some(guess.clone())),
            })
        }
    };
    if a.stationary && !base.is_stationary() {
        eprintln!("warning: --stationary ignored; this field depends on t, so ∂u/∂t is taken by finite differences");
    }
    let offset = a.perturb.as_deref().map(|p| parse_list("perturb", p)).transpose()?;
    let field: Box<dyn VelocityField + '_> = match offset {
        Some(offset) => {
            if offset.len() != base.chart().dim() {
                return Err(config(format!("--perturb needs {} values", base.chart().dim())));
            }
            Box::new(Perturbed { inner: base.as_ref(), offset })
        }
        None => base,
    };
    let points = verify_points(a, &grid, field.chart());
    let rep: ResidualReport = euler_residual(field.as_ref(), t, &points, a.fd_step).map_err(runtime)?;
    let label = match &source {
        Source::Family { field, .. } => field.family.id(),
        Source::System { system, .. } => system.kind.id(),
    };
    let passed = rep.max < a.threshold;
    let report = VerifyReport {
        field: label,
        max: rep.max,
        mean: rep.mean,
        n_nodes: rep.n_nodes,
        n_excluded: rep.n_excluded,
        fd_step: rep.fd_step,
        threshold: a.threshold,
        passed,
    };
    let mut w = open_output(&a.out)?;
    serde_json::to_writer_pretty(&mut w, &report).map_err(runtime)?;
    writeln!(w).map_err(runtime)?;
    w.flush().map_err(runtime)?;
    if passed {
        Ok(())
    } else {
        Err(CliError::Verification(format!("max residual {:e} ≥ threshold {:e}", rep.max, a.threshold)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_subcommand() {
        for args in [
            vec!["hodoflow", "geodesic", "--chart", "sphere2", "--init", "1,0,0,1", "--t-end", "1"],
            vec!["hodoflow", "field", "--family", "s2_stat_linear", "--grid", "theta=0.3:1:5", "--grid", "phi=0:1:5"],
            vec!["hodoflow", "--workers", "2", "blowup", "--family", "s2_stat_linear"],
            vec!["hodoflow", "verify", "--family", "cone_linear", "--threshold", "1e-5", "--perturb", "-0.1,0"],
        ] {
            Cli::try_parse_from(&args).unwrap();
        }
    }

    #[test]
    fn cone_without_alpha_names_the_key() {
        let err = resolve_chart(&ChartArgs { chart: Some("cone".into()), ..Default::default() }, None).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.message().contains("--alpha"));
    }

    #[test]
    fn family_chart_overrides() {
        let a = ChartArgs { radius: Some(2.0), ..Default::default() };
        let c = resolve_chart(&a, Some(Chart::Sphere2 { radius: 1.0 })).unwrap();
        assert_eq!(c, Chart::Sphere2 { radius: 2.0 });
        let a = ChartArgs { chart: Some("torus".into()), ..Default::default() };
        assert!(resolve_chart(&a, None).is_err());
    }

    #[test]
    fn lists() {
        assert_eq!(parse_list("init", "1, -2,3e-1").unwrap(), vec![1.0, -2.0, 0.3]);
        assert!(parse_list("init", "1,x").is_err());
    }
}
