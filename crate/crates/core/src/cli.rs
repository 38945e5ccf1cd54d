//! `qbm` command-line front end.
//!
//! Exit codes: 0 success, 1 failed verification or computation, 2 usage
//! error, 3 singular point requested without `--allow-singular`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::dispersion::{
    classify, on_light_cone, position_dispersion, validity_metric, velocity_dispersion, MeasuringTime, ParticleConfig,
    VacuumClass,
};
use crate::em::{em_velocity_dispersion_parallel, em_velocity_dispersion_perp, EmParticleConfig};
use crate::error::Error;
use crate::numerics::QuadratureSpec;
use crate::report::{PointResult, Provenance, RunReport};
use crate::smearing::{smeared_curve, smeared_velocity_dispersion, SmearingConfig, DEFAULT_N_SIGMA};
use crate::sweep::{GridScale, SweepGrid, SweepVariable};
use crate::verify::{run_checks, VerifyOptions, CANARY_PERTURBATION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SINGULAR: i32 = 3;

const MAX_SUBDIVISIONS: usize = 2000;

#[derive(Debug, Parser)]
#[command(
    name = "qbm",
    version,
    about = "Velocity and position dispersions of a test particle near a reflecting point boundary",
    allow_negative_numbers = true
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Scalar charge
    #[arg(long, global = true)]
    pub g: Option<f64>,
    /// Particle mass
    #[arg(long, global = true)]
    pub m: Option<f64>,
    /// Distance from the boundary
    #[arg(long, global = true)]
    pub x: Option<f64>,
    /// Measuring time
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    /// Gaussian position widths, comma separated (same units as x)
    #[arg(long, global = true, value_delimiter = ',')]
    pub sigma: Vec<f64>,
    /// Write output here instead of stdout
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
    /// Absolute and relative quadrature tolerance
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Defaults file, key=value lines or a JSON object; flags take precedence
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate every dispersion at one measuring time
    Eval(EvalArgs),
    /// Emit figure data over a tau/x grid
    Figure(FigureArgs),
    /// Run the verification suite
    Verify(VerifyArgs),
    /// Scalar and electromagnetic velocity dispersions side by side
    CompareEm(CompareEmArgs),
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Report tau = 2x instead of exiting with code 3
    #[arg(long)]
    pub allow_singular: bool,
    /// Half width of the smearing window in units of sigma
    #[arg(long)]
    pub n_sigma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FigureName {
    /// Velocity dispersion, units of g^2/m^2
    Fig1,
    /// Position dispersion over x^2
    Fig2,
    /// Smeared velocity dispersion, one curve per sigma
    Fig3,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GridArgs {
    /// First tau/x
    #[arg(long)]
    pub start: Option<f64>,
    /// Last tau/x
    #[arg(long)]
    pub stop: Option<f64>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long, value_enum)]
    pub scale: Option<GridScale>,
}

#[derive(Debug, Clone, Args)]
pub struct FigureArgs {
    #[arg(value_enum)]
    pub name: FigureName,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub n_sigma: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Reduced oracle grid, no convergence-order checks
    #[arg(long)]
    pub fast: bool,
    /// Oracle grid in units of x, comma separated
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    #[arg(long, hide = true)]
    pub inject_canary: bool,
}

#[derive(Debug, Clone, Args)]
pub struct CompareEmArgs {
    /// Electric charge
    #[arg(long)]
    pub e: Option<f64>,
    #[command(flatten)]
    pub grid: GridArgs,
}

/// Parameters after merging config-file defaults with flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub g: f64,
    pub m: f64,
    pub x: f64,
    pub e: f64,
    pub tau: Option<f64>,
    pub sigma: Vec<f64>,
    pub n_sigma: f64,
    pub tol: Option<f64>,
    pub format: Option<OutputFormat>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            g: 1.0,
            m: 1.0,
            x: 1.0,
            e: 1.0,
            tau: None,
            sigma: Vec::new(),
            n_sigma: DEFAULT_N_SIGMA,
            tol: None,
            format: None,
        }
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Singular(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Singular(_) => EXIT_SINGULAR,
            Failure::Runtime(_) => EXIT_FAILURE,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Singular(m) | Failure::Runtime(m) => m,
        }
    }
}

/// Invalid parameters are usage errors; numerical breakdowns are not.
impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain { .. } | Error::InvalidGrid(_) | Error::StencilConflict { .. } => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

type CmdResult = std::result::Result<i32, Failure>;

fn parse_number(key: &str, value: &str) -> std::result::Result<f64, Failure> {
    value
        .trim()
        .parse()
        .map_err(|_| Failure::Usage(format!("config: {key} expects a number, got '{value}'")))
}

impl Settings {
    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), Failure> {
        match key {
            "g" => self.g = parse_number(key, value)?,
            "m" => self.m = parse_number(key, value)?,
            "x" => self.x = parse_number(key, value)?,
            "e" => self.e = parse_number(key, value)?,
            "tau" => self.tau = Some(parse_number(key, value)?),
            "n_sigma" => self.n_sigma = parse_number(key, value)?,
            "tol" => self.tol = Some(parse_number(key, value)?),
            "sigma" => {
                self.sigma = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| parse_number(key, s))
                    .collect::<std::result::Result<_, _>>()?
            }
            "format" => {
                self.format = Some(
                    OutputFormat::from_str(value.trim(), true)
                        .map_err(|_| Failure::Usage(format!("config: unknown format '{value}'")))?,
                )
            }
            _ => return Err(Failure::Usage(format!("config: unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Apply a config file: either a JSON object or `key = value` lines with
    /// `#` comments.
    pub fn apply_config_text(&mut self, text: &str) -> std::result::Result<(), String> {
        self.apply_config(text).map_err(|f| f.message().to_string())
    }

    fn apply_config(&mut self, text: &str) -> std::result::Result<(), Failure> {
        if text.trim_start().starts_with('{') {
            let obj: serde_json::Map<String, Value> =
                serde_json::from_str(text).map_err(|e| Failure::Usage(format!("config: {e}")))?;
            for (key, v) in obj {
                let value = match v {
                    Value::Number(n) => n.to_string(),
                    Value::String(s) => s,
                    Value::Array(items) => items.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(","),
                    other => return Err(Failure::Usage(format!("config: unsupported value for {key}: {other}"))),
                };
                self.set(&key, &value)?;
            }
            return Ok(());
        }
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Failure::Usage(format!("config line {}: expected key=value", lineno + 1)))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    fn apply_flags(&mut self, c: &CommonArgs) {
        self.g = c.g.unwrap_or(self.g);
        self.m = c.m.unwrap_or(self.m);
        self.x = c.x.unwrap_or(self.x);
        self.tau = c.tau.or(self.tau);
        if !c.sigma.is_empty() {
            self.sigma = c.sigma.clone();
        }
        self.tol = c.tol.or(self.tol);
        self.format = c.format.or(self.format);
    }

    fn quadrature(&self) -> std::result::Result<QuadratureSpec, Failure> {
        match self.tol {
            Some(t) => Ok(QuadratureSpec::new(t, t, MAX_SUBDIVISIONS)?),
            None => Ok(QuadratureSpec::default()),
        }
    }

    fn particle(&self) -> std::result::Result<ParticleConfig, Failure> {
        Ok(ParticleConfig::new(self.g, self.m, self.x)?)
    }
}

/// Parse `args` (program name first), execute, and return the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<String> = args
        .into_iter()
        .map(|a| a.into().to_string_lossy().into_owned())
        .collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let rendered = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{rendered}");
                EXIT_USAGE
            } else {
                let _ = write!(stdout, "{rendered}");
                EXIT_OK
            };
        }
    };
    let echo = args.iter().skip(1).cloned().collect();
    let code = match dispatch(&cli, echo, stdout, stderr) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message());
            f.code()
        }
    };
    let _ = stdout.flush();
    let _ = stderr.flush();
    code
}

fn dispatch(cli: &Cli, echo: Vec<String>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CmdResult {
    let mut settings = Settings::default();
    if let Some(path) = &cli.common.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
        settings.apply_config(&text)?;
    }
    settings.apply_flags(&cli.common);
    let out = cli.common.out.as_deref();

    match &cli.command {
        Command::Eval(a) => cmd_eval(&settings, a, echo, out, stdout),
        Command::Figure(a) => cmd_figure(&settings, a, echo, out, stdout, stderr),
        Command::Verify(a) => cmd_verify(&settings, a, echo, out, stdout),
        Command::CompareEm(a) => cmd_compare_em(&settings, a, echo, out, stdout),
    }
}

fn emit(out: Option<&Path>, content: &str, stdout: &mut dyn Write) -> std::result::Result<(), Failure> {
    match out {
        Some(path) => {
            std::fs::write(path, content).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
        }
        None => stdout
            .write_all(content.as_bytes())
            .map_err(|e| Failure::Runtime(format!("cannot write output: {e}"))),
    }
}

fn json_text(report: &RunReport) -> String {
    let mut s = serde_json::to_string_pretty(&report.to_json()).expect("report serializes");
    s.push('\n');
    s
}

fn cell(v: Option<f64>) -> String {
    match v {
        // adding zero maps -0 to 0
        Some(v) if v.is_finite() => format!("{}", v + 0.0),
        _ => String::new(),
    }
}

fn vacuum_label(c: VacuumClass) -> &'static str {
    match c {
        VacuumClass::Subvacuum => "subvacuum",
        VacuumClass::Vacuum => "vacuum",
        VacuumClass::AboveVacuum => "above_vacuum",
        VacuumClass::Singular => "singular",
    }
}

fn cmd_eval(s: &Settings, a: &EvalArgs, echo: Vec<String>, out: Option<&Path>, stdout: &mut dyn Write) -> CmdResult {
    let tau_value = s.tau.ok_or_else(|| Failure::Usage("eval needs --tau".into()))?;
    let cfg = s.particle()?;
    let tau = MeasuringTime::new(tau_value)?;
    let n_sigma = a.n_sigma.unwrap_or(s.n_sigma);
    if on_light_cone(cfg.x(), tau_value) && !a.allow_singular {
        return Err(Failure::Singular(format!(
            "tau = {tau_value} is the round-trip time 2x; pass --allow-singular to report it"
        )));
    }

    let r = tau_value / cfg.x();
    let v = velocity_dispersion(&cfg, tau);
    let p = position_dispersion(&cfg, tau);
    let m = validity_metric(&cfg, tau);
    let mut report = RunReport::new(
        echo,
        json!({
            "g": cfg.g(), "m": cfg.m(), "x": cfg.x(), "tau": tau_value,
            "sigma": s.sigma, "n_sigma": n_sigma, "tol": s.tol,
        }),
    );
    report.results = vec![
        PointResult::new("velocity_dispersion", v.value, v.regular, Provenance::ClosedForm)
            .at_tau(r)
            .with_label(vacuum_label(classify(&v))),
        PointResult::new("position_dispersion", p.value, p.regular, Provenance::ClosedForm).at_tau(r),
        PointResult::new(
            "validity_relative_position",
            m.relative_position_dispersion,
            true,
            Provenance::ClosedForm,
        )
        .at_tau(r),
        PointResult::new("validity_global", m.global_constraint, true, Provenance::ClosedForm),
    ];

    if !s.sigma.is_empty() {
        let q = s.quadrature()?;
        for &sigma in &s.sigma {
            let sc = SmearingConfig::new(sigma, n_sigma)?;
            let sv = smeared_velocity_dispersion(&cfg, tau, &sc, &q)?;
            let mut point = PointResult::new("smeared_velocity_dispersion", sv.value, true, Provenance::Smeared)
                .at_tau(r)
                .at_sigma(sigma / cfg.x())
                .with_error(sv.error_estimate);
            if sv.boundary_in_window {
                point = point.with_label("boundary_in_window");
            }
            report.results.push(point);
        }
    }

    let text = match s.format.unwrap_or(OutputFormat::Json) {
        OutputFormat::Json => json_text(&report),
        OutputFormat::Csv => {
            let mut t = String::from("quantity,tau_over_x,sigma_over_x,value,regular,error_estimate,label\n");
            for p in &report.results {
                let _ = writeln!(
                    t,
                    "{},{},{},{},{},{},{}",
                    p.quantity,
                    cell(p.tau_over_x),
                    cell(p.sigma_over_x),
                    cell(Some(p.value)),
                    p.regular,
                    cell(p.error_estimate),
                    p.label.as_deref().unwrap_or("")
                );
            }
            t
        }
    };
    emit(out, &text, stdout)?;
    Ok(EXIT_OK)
}

fn resolve_grid(g: &GridArgs, start: f64, stop: f64, count: usize) -> std::result::Result<SweepGrid, Failure> {
    Ok(SweepGrid::new(
        SweepVariable::TauOverX,
        g.start.unwrap_or(start),
        g.stop.unwrap_or(stop),
        g.count.unwrap_or(count),
        g.scale.unwrap_or(GridScale::Linear),
    )?)
}

/// One figure row: `tau/x`, value (None when singular or failed), optional
/// `sigma/x`.
type Row = (f64, Option<f64>, Option<f64>);

fn cmd_figure(
    s: &Settings,
    a: &FigureArgs,
    echo: Vec<String>,
    out: Option<&Path>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> CmdResult {
    let started = Instant::now();
    let cfg = s.particle()?;
    let x = cfg.x();
    let unit = ParticleConfig::unit_coupling(x)?;
    let n_sigma = a.n_sigma.unwrap_or(s.n_sigma);

    let (rows, provenance): (Vec<Row>, Provenance) = match a.name {
        FigureName::Fig1 => {
            let grid = resolve_grid(&a.grid, 0.05, 4.0, 80)?;
            let rows = grid
                .points()
                .into_par_iter()
                .map(|r| Ok((r, velocity_dispersion(&unit, MeasuringTime::new(r * x)?).finite(), None)))
                .collect::<crate::Result<_>>()?;
            (rows, Provenance::ClosedForm)
        }
        FigureName::Fig2 => {
            let grid = resolve_grid(&a.grid, 0.05, 12.0, 240)?;
            let rows = grid
                .points()
                .into_par_iter()
                .map(|r| {
                    let p = position_dispersion(&cfg, MeasuringTime::new(r * x)?);
                    Ok((r, p.finite().map(|v| v / (x * x)), None))
                })
                .collect::<crate::Result<_>>()?;
            (rows, Provenance::ClosedForm)
        }
        FigureName::Fig3 => {
            if s.sigma.is_empty() {
                return Err(Failure::Usage("fig3 needs at least one --sigma".into()));
            }
            let grid = resolve_grid(&a.grid, 0.05, 4.0, 80)?;
            let q = s.quadrature()?;
            let mut rows = Vec::new();
            for &sigma in &s.sigma {
                let sc = SmearingConfig::new(sigma, n_sigma)?;
                for row in smeared_curve(&unit, &sc, &grid, &q)? {
                    if let Some(why) = &row.failure {
                        let _ = writeln!(stderr, "warning: sigma={sigma} tau/x={}: {why}", row.tau_over_x);
                    }
                    rows.push((row.tau_over_x, row.value, Some(sigma / x)));
                }
            }
            (rows, Provenance::Smeared)
        }
    };

    let name = match a.name {
        FigureName::Fig1 => "fig1",
        FigureName::Fig2 => "fig2",
        FigureName::Fig3 => "fig3",
    };
    let text = match s.format.unwrap_or(OutputFormat::Csv) {
        OutputFormat::Csv => {
            let with_sigma = a.name == FigureName::Fig3;
            let mut t = String::from(if with_sigma {
                "tau_over_x,value,sigma_over_x\n"
            } else {
                "tau_over_x,value\n"
            });
            for (r, v, sigma) in &rows {
                let _ = write!(t, "{r},{}", cell(*v));
                if with_sigma {
                    let _ = write!(t, ",{}", cell(*sigma));
                }
                t.push('\n');
            }
            t
        }
        OutputFormat::Json => {
            let mut report = RunReport::new(
                echo,
                json!({
                    "figure": name, "g": cfg.g(), "m": cfg.m(), "x": x,
                    "sigma": s.sigma, "n_sigma": n_sigma, "tol": s.tol,
                }),
            );
            report.results = rows
                .iter()
                .map(|&(r, v, sigma)| {
                    let p = PointResult::new(name, v.unwrap_or(f64::NAN), v.is_some(), provenance).at_tau(r);
                    match sigma {
                        Some(sg) => p.at_sigma(sg),
                        None => p,
                    }
                })
                .collect();
            json_text(&report)
        }
    };
    emit(out, &text, stdout)?;
    let _ = writeln!(
        stderr,
        "{name}: {} rows in {:.3} s",
        rows.len(),
        started.elapsed().as_secs_f64()
    );
    Ok(EXIT_OK)
}

fn cmd_verify(
    s: &Settings,
    a: &VerifyArgs,
    echo: Vec<String>,
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> CmdResult {
    if let Some(grid) = &a.grid {
        if grid.is_empty() || grid.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(Failure::Usage("--grid values must be positive".into()));
        }
    }
    let opts = VerifyOptions {
        x: s.particle()?.x(),
        fast: a.fast,
        grid: a.grid.clone(),
        perturbation: if a.inject_canary { CANARY_PERTURBATION } else { 0.0 },
        quadrature: s.quadrature()?,
    };
    let started = Instant::now();
    let mut report = RunReport::new(
        echo,
        json!({ "x": opts.x, "fast": opts.fast, "grid": opts.grid, "tol": s.tol }),
    );
    report.checks = run_checks(&opts);
    report.duration = Some(started.elapsed());

    let text = match s.format {
        Some(OutputFormat::Json) => json_text(&report),
        _ => report.check_table(),
    };
    emit(out, &text, stdout)?;
    Ok(if report.all_passed() { EXIT_OK } else { EXIT_FAILURE })
}

fn cmd_compare_em(
    s: &Settings,
    a: &CompareEmArgs,
    echo: Vec<String>,
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> CmdResult {
    let scalar = s.particle()?;
    let e = a.e.unwrap_or(s.e);
    let em = EmParticleConfig::new(e, s.m, s.x)?;
    let grid = resolve_grid(&a.grid, 0.0, 4.0, 81)?;
    let x = s.x;

    let rows = grid
        .points()
        .into_iter()
        .map(|r| {
            let t = MeasuringTime::new(r * x)?;
            Ok([
                r,
                velocity_dispersion(&scalar, t).value,
                em_velocity_dispersion_perp(&em, t).value,
                em_velocity_dispersion_parallel(&em, t).value,
            ])
        })
        .collect::<crate::Result<Vec<_>>>()?;

    let text = match s.format.unwrap_or(OutputFormat::Csv) {
        OutputFormat::Csv => {
            let mut t = String::from("tau_over_x,scalar_velocity,em_perp,em_parallel\n");
            for [r, sv, perp, par] in &rows {
                let _ = writeln!(t, "{r},{},{},{}", cell(Some(*sv)), cell(Some(*perp)), cell(Some(*par)));
            }
            t
        }
        OutputFormat::Json => {
            let mut report = RunReport::new(echo, json!({ "g": s.g, "e": e, "m": s.m, "x": x }));
            for [r, sv, perp, par] in &rows {
                for (q, v) in [("scalar_velocity", sv), ("em_perp", perp), ("em_parallel", par)] {
                    report
                        .results
                        .push(PointResult::new(q, *v, v.is_finite(), Provenance::ClosedForm).at_tau(*r));
                }
            }
            json_text(&report)
        }
    };
    emit(out, &text, stdout)?;
    Ok(EXIT_OK)
}
