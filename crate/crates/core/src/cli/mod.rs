//! Command line front end: `gscan`, `spectrum` and `exceptional`.
//!
//! Every flag may also come from a `--config` file of `key = value` lines
//! (flag names without the leading dashes). Flags on the command line win
//! over the file. Output goes to `--out`, else to `$ANISO_RABI_OUT_DIR`
//! under a default name, else to stdout.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 bad arguments, 3 a solver did
//! not converge somewhere (the partial output is still written).

pub mod svg;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::gfunc::{self, ExceptionalOptions, ExceptionalSolution, SeriesOptions, ZeroScanOptions};
use crate::model::{ModelParams, Parity};
use crate::oracle::{self, OracleOptions};
use crate::spectrum::{
    self, CouplingMode, Grid, Method, Row, SolverOptions, SpectrumTable, SweepSpec, SweepVariable, FLAG_NONCONVERGENCE,
};
use svg::{Item, Plot, Style};

/// Directory used for output when `--out` is not given.
pub const OUT_DIR_ENV: &str = "ANISO_RABI_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "aniso-rabi", version, about = "Spectra of the anisotropic quantum Rabi model")]
pub struct Cli {
    /// File of `key = value` lines supplying flag values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample G±(x) on a uniform grid.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Gscan(GscanArgs),
    /// Sweep a coupling and tabulate the lowest levels of each parity.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Spectrum(SpectrumArgs),
    /// Locate exceptional (doubly degenerate) points along g2 = r·g1.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Exceptional(ExceptionalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Svg => "svg",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParityChoice {
    Even,
    Odd,
    Both,
}

impl ParityChoice {
    fn sectors(self) -> Vec<Parity> {
        match self {
            ParityChoice::Even => vec![Parity::Even],
            ParityChoice::Odd => vec![Parity::Odd],
            ParityChoice::Both => Parity::BOTH.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GscanArgs {
    #[arg(long)]
    pub delta: f64,
    #[arg(long)]
    pub g1: f64,
    #[arg(long)]
    pub g2: f64,
    #[arg(long, default_value_t = 0.0)]
    pub xmin: f64,
    #[arg(long, default_value_t = 6.0)]
    pub xmax: f64,
    #[arg(long, default_value_t = 1201)]
    pub samples: usize,
    #[arg(long, value_enum, default_value_t = ParityChoice::Both)]
    pub parity: ParityChoice,
    #[arg(long, default_value_t = 1e-14)]
    pub series_tol: f64,
    #[arg(long, default_value_t = 2000)]
    pub n_max: usize,
    /// Vertical clip of the SVG plot.
    #[arg(long, default_value_t = 4.0)]
    pub ylim: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub delta: f64,
    /// Fixed ratio g2/g1.
    #[arg(long, conflicts_with = "g2")]
    pub r: Option<f64>,
    /// Fixed counter-rotating coupling.
    #[arg(long)]
    pub g2: Option<f64>,
    #[arg(long, default_value = "g1", value_parser = ["g1", "alpha"])]
    pub sweep: String,
    /// start:stop:step
    #[arg(long)]
    pub range: String,
    /// Levels per parity sector.
    #[arg(long, default_value_t = 4)]
    pub levels: usize,
    /// Comma separated: gfunc, oracle, adiabatic, grwa, truncatedN.
    #[arg(long, default_value = "oracle")]
    pub methods: String,
    #[arg(long, default_value_t = 1e-3)]
    pub grid_step: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub pole_width: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub bisect_tol: f64,
    #[arg(long, default_value_t = 1e-14)]
    pub series_tol: f64,
    #[arg(long, default_value_t = 2000)]
    pub n_max: usize,
    #[arg(long, default_value_t = 32)]
    pub cutoff_start: usize,
    #[arg(long, default_value_t = 1024)]
    pub cutoff_cap: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub oracle_tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ExceptionalArgs {
    #[arg(long)]
    pub delta: f64,
    #[arg(long)]
    pub r: f64,
    #[arg(long, default_value_t = 5)]
    pub nmax: usize,
    /// lo:hi
    #[arg(long, default_value = "0.001:1.5")]
    pub g1_range: String,
    #[arg(long, default_value_t = 1e-3)]
    pub grid_step: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Check every root for an even/odd degenerate pair in the oracle.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub verify: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

/// Result of one subcommand before it is written out.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub content: String,
    pub warnings: Vec<String>,
    /// Some solver failed to converge; the content is partial.
    pub nonconverged: bool,
    pub default_name: &'static str,
    pub format: Format,
    pub out: Option<PathBuf>,
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{name} must be positive, got {v}")))
    }
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

// ---------------------------------------------------------------- config

/// Parses `key = value` lines. Blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", i + 1)))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() || key == "config" {
            return Err(CliError::Usage(format!("config line {}: bad key '{key}'", i + 1)));
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

/// Splices the `--config` file contents in front of the subcommand's own
/// flags so that explicit flags override them.
fn expand_config(args: Vec<String>) -> Result<Vec<String>, CliError> {
    let mut rest = Vec::with_capacity(args.len());
    let mut path = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            path = Some(it.next().ok_or_else(|| CliError::Usage("--config needs a path".into()))?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Usage(format!("cannot read config {path}: {e}")))?;
    let pairs = parse_config(&text)?;
    let sub = rest
        .iter()
        .position(|a| matches!(a.as_str(), "gscan" | "spectrum" | "exceptional"))
        .ok_or_else(|| CliError::Usage("no subcommand given".into()))?;
    let mut out: Vec<String> = rest[..=sub].to_vec();
    for (k, v) in pairs {
        out.push(format!("--{k}={v}"));
    }
    out.extend_from_slice(&rest[sub + 1..]);
    Ok(out)
}

// ---------------------------------------------------------------- gscan

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GscanRow {
    pub x: f64,
    pub parity: Parity,
    #[serde(rename = "G")]
    pub g: Option<f64>,
    pub nearest_pole_distance: f64,
}

pub fn render_gscan(args: &GscanArgs) -> Result<Rendered, CliError> {
    let params = ModelParams::new(args.delta, args.g1, args.g2)?;
    if !(params.g1 > 0.0 && params.g2 > 0.0) {
        return Err(Error::ZeroCoupling {
            g1: params.g1,
            g2: params.g2,
        }
        .into());
    }
    if !(args.xmin < args.xmax) {
        return Err(CliError::Usage(format!("need xmin < xmax, got {} and {}", args.xmin, args.xmax)));
    }
    if args.samples == 0 {
        return Err(CliError::Usage("samples must be at least 1".into()));
    }
    positive("series-tol", args.series_tol)?;
    positive("ylim", args.ylim)?;
    let opts = SeriesOptions {
        tol: args.series_tol,
        n_max: args.n_max,
    };
    let xs: Vec<f64> = if args.samples == 1 {
        vec![args.xmin]
    } else {
        let h = (args.xmax - args.xmin) / (args.samples - 1) as f64;
        (0..args.samples).map(|i| args.xmin + i as f64 * h).collect()
    };

    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    let mut nonconverged = false;
    for parity in args.parity.sectors() {
        for &x in &xs {
            let (_, dist) = gfunc::nearest_pole(x);
            let g = match gfunc::g_function(&params, x, parity, &opts) {
                Ok(v) => Some(v.value),
                Err(err) => {
                    nonconverged |= matches!(err, Error::NonConvergence { .. });
                    warnings.push(format!("{parity} x = {x}: {err}"));
                    None
                }
            };
            rows.push(GscanRow {
                x,
                parity,
                g,
                nearest_pole_distance: dist,
            });
        }
    }

    let content = match args.format {
        Format::Csv => {
            let mut s = String::from("x,parity,G,nearest_pole_distance\n");
            for r in &rows {
                let g = r.g.map(float).unwrap_or_else(|| "NaN".into());
                let _ = writeln!(s, "{},{},{},{}", float(r.x), r.parity, g, float(r.nearest_pole_distance));
            }
            s
        }
        Format::Json => json_document(args, &rows, &warnings)?,
        Format::Svg => gscan_svg(args, &params, &rows),
    };
    Ok(Rendered {
        content,
        warnings,
        nonconverged,
        default_name: "gscan",
        format: args.format,
        out: args.out.clone(),
    })
}

fn parity_color(p: Parity) -> &'static str {
    match p {
        Parity::Even => "#1f4e9c",
        Parity::Odd => "#c0392b",
    }
}

fn gscan_svg(args: &GscanArgs, params: &ModelParams, rows: &[GscanRow]) -> String {
    let mut items = Vec::new();
    let gray = Style {
        color: "#999999",
        dash: Some("4 4"),
        width: 1.0,
    };
    let mut k = args.xmin.max(0.0).ceil();
    while k <= args.xmax {
        items.push(Item::VLine { x: k, style: gray.clone() });
        k += 1.0;
    }
    items.push(Item::HLine {
        y: 0.0,
        style: Style {
            color: "black",
            dash: None,
            width: 1.0,
        },
    });
    let mut legend = Vec::new();
    for parity in args.parity.sectors() {
        let mut points = Vec::new();
        let mut prev_cell: Option<f64> = None;
        for r in rows.iter().filter(|r| r.parity == parity) {
            let cell = r.x.floor();
            if prev_cell.is_some_and(|c| c != cell) {
                points.push((f64::NAN, f64::NAN));
            }
            prev_cell = Some(cell);
            let y = r.g.filter(|g| g.abs() <= args.ylim).unwrap_or(f64::NAN);
            points.push((r.x, y));
        }
        items.push(Item::Line {
            points,
            style: Style {
                color: parity_color(parity),
                dash: None,
                width: 1.5,
            },
        });
        let sign = if parity == Parity::Even { "+" } else { "-" };
        legend.push((format!("G{sign} ({parity})"), parity_color(parity)));
    }
    Plot {
        title: format!("G(x) for Δ = {}, g1 = {}, g2 = {}", params.delta, params.g1, params.g2),
        x_label: "x".into(),
        y_label: "G(x)".into(),
        x_range: (args.xmin, args.xmax),
        y_range: (-args.ylim, args.ylim),
        items,
        legend,
    }
    .render()
}

// ---------------------------------------------------------------- spectrum

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumConfig {
    pub spec: SweepSpec,
    pub format: Format,
    pub out: Option<PathBuf>,
}

/// Builds the sweep description from the flags.
pub fn spectrum_config(args: &SpectrumArgs) -> Result<SpectrumConfig, CliError> {
    let coupling = match (args.r, args.g2) {
        (Some(r), None) => CouplingMode::Ratio(r),
        (None, Some(g2)) => CouplingMode::FixedG2(g2),
        _ => return Err(CliError::Usage("exactly one of --r and --g2 is required".into())),
    };
    let grid: Grid = args.range.parse()?;
    let methods = args
        .methods
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<Method>, Error>>()?;
    for (name, v) in [
        ("grid-step", args.grid_step),
        ("pole-width", args.pole_width),
        ("bisect-tol", args.bisect_tol),
        ("series-tol", args.series_tol),
        ("oracle-tol", args.oracle_tol),
    ] {
        positive(name, v)?;
    }
    if args.cutoff_start == 0 || args.cutoff_cap < args.cutoff_start {
        return Err(CliError::Usage("need 0 < cutoff-start <= cutoff-cap".into()));
    }
    let spec = SweepSpec {
        delta: args.delta,
        coupling,
        sweep: args.sweep.parse()?,
        grid,
        n_levels: args.levels,
        methods,
        options: SolverOptions {
            scan: ZeroScanOptions {
                grid_step: args.grid_step,
                pole_width: args.pole_width,
                bisect_tol: args.bisect_tol,
                series: SeriesOptions {
                    tol: args.series_tol,
                    n_max: args.n_max,
                },
            },
            oracle: OracleOptions {
                start_cutoff: args.cutoff_start,
                cutoff_cap: args.cutoff_cap,
                tol: args.oracle_tol,
            },
        },
    };
    spec.validate()?;
    Ok(SpectrumConfig {
        spec,
        format: args.format,
        out: args.out.clone(),
    })
}

/// Table rows as CSV with the fixed header.
pub fn table_csv(rows: &[Row]) -> String {
    let mut s = String::from("sweep_value,method,parity,level,energy,flag\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            float(r.sweep_value),
            r.method,
            r.parity,
            r.level,
            float(r.energy),
            r.flag
        );
    }
    s
}

/// The JSON document written by every subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document<C, R> {
    pub config: C,
    pub rows: Vec<R>,
    pub warnings: Vec<String>,
}

fn json_document<C: Serialize, R: Serialize>(config: &C, rows: &[R], warnings: &[String]) -> Result<String, CliError> {
    let doc = serde_json::json!({ "config": config, "rows": rows, "warnings": warnings });
    let mut s = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Rebuilds the table from a JSON document written by `spectrum`.
pub fn table_from_json(text: &str) -> Result<SpectrumTable, CliError> {
    let doc: Document<SpectrumConfig, Row> =
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("bad spectrum JSON: {e}")))?;
    Ok(SpectrumTable {
        spec: doc.config.spec,
        rows: doc.rows,
    })
}

pub fn render_spectrum(args: &SpectrumArgs) -> Result<Rendered, CliError> {
    let config = spectrum_config(args)?;
    let table = spectrum::run_sweep(&config.spec)?;
    let warnings: Vec<String> = table
        .rows
        .iter()
        .filter(|r| r.flag != spectrum::FLAG_OK)
        .map(|r| format!("{} {} {} level {}: {}", r.sweep_value, r.method, r.parity, r.level, r.flag))
        .collect();
    let nonconverged = table.rows.iter().any(|r| r.flag.starts_with(FLAG_NONCONVERGENCE));
    let content = match config.format {
        Format::Csv => table_csv(&table.rows),
        Format::Json => json_document(&config, &table.rows, &warnings)?,
        Format::Svg => spectrum_svg(&table),
    };
    Ok(Rendered {
        content,
        warnings,
        nonconverged,
        default_name: "spectrum",
        format: config.format,
        out: config.out,
    })
}

/// Exceptional points inside the swept window, as (sweep value, energy).
fn exceptional_markers(spec: &SweepSpec, top_energy: f64) -> Vec<(f64, f64)> {
    let CouplingMode::Ratio(r) = spec.coupling else {
        return Vec::new();
    };
    if !(r > 0.0) {
        return Vec::new();
    }
    let to_g1 = |v: f64| match spec.sweep {
        SweepVariable::G1 => v,
        SweepVariable::Alpha => 2.0 * v / (1.0 + r),
    };
    let from_g1 = |g: f64| match spec.sweep {
        SweepVariable::G1 => g,
        SweepVariable::Alpha => 0.5 * g * (1.0 + r),
    };
    let lo = to_g1(spec.grid.start).max(1e-3);
    let hi = to_g1(spec.grid.stop);
    if !(hi > lo) {
        return Vec::new();
    }
    let n_top = (top_energy + 0.5 * (1.0 + r * r) * hi * hi).max(0.0).ceil() as usize;
    let mut out = Vec::new();
    for n in 0..=n_top {
        if let Ok(sols) = gfunc::find_exceptional(spec.delta, r, n, (lo, hi), &ExceptionalOptions::default()) {
            out.extend(sols.iter().map(|s| (from_g1(s.g1_star), s.energy)));
        }
    }
    out
}

fn method_style(method: Method, parity: Parity) -> Option<Style> {
    let color = parity_color(parity);
    match method {
        Method::Oracle | Method::GFunction => Some(Style {
            color,
            dash: None,
            width: 1.5,
        }),
        Method::Adiabatic => Some(Style {
            color,
            dash: Some("6 4"),
            width: 1.0,
        }),
        Method::Truncated(_) => Some(Style {
            color,
            dash: Some("2 3"),
            width: 1.0,
        }),
        Method::Grwa => None,
    }
}

fn spectrum_svg(table: &SpectrumTable) -> String {
    let spec = &table.spec;
    let mut items = Vec::new();
    for method in table.methods() {
        for parity in Parity::BOTH {
            let curves = table.curves(method, parity);
            for level in 0..spec.n_levels {
                let points: Vec<(f64, f64)> = curves.iter().map(|(v, e)| (*v, e[level])).collect();
                match method_style(method, parity) {
                    Some(style) => items.push(Item::Line { points, style }),
                    None => items.push(Item::Circles {
                        points,
                        radius: 2.0,
                        color: parity_color(parity),
                    }),
                }
            }
        }
    }
    let y_range = svg::data_range(table.rows.iter().map(|r| r.energy), (-1.0, 1.0));
    items.push(Item::Circles {
        points: exceptional_markers(spec, y_range.1),
        radius: 5.0,
        color: "black",
    });
    let mut legend = vec![("even".to_string(), parity_color(Parity::Even)), ("odd".to_string(), parity_color(Parity::Odd))];
    let names: Vec<String> = table.methods().iter().map(|m| m.to_string()).collect();
    legend.push((names.join(", "), "#555555"));
    let coupling = match spec.coupling {
        CouplingMode::Ratio(r) => format!("r = {r}"),
        CouplingMode::FixedG2(g2) => format!("g2 = {g2}"),
    };
    let x_label = match spec.sweep {
        SweepVariable::G1 => "g1",
        SweepVariable::Alpha => "α = (g1 + g2)/2",
    };
    Plot {
        title: format!("Δ = {}, {coupling}", spec.delta),
        x_label: x_label.into(),
        y_label: "E".into(),
        x_range: (spec.grid.start, spec.grid.stop),
        y_range,
        items,
        legend,
    }
    .render()
}

// ---------------------------------------------------------------- exceptional

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalRow {
    pub n: usize,
    pub g1: f64,
    pub g2: f64,
    pub energy: f64,
    pub residual: f64,
    /// None when verification was not requested.
    pub oracle_verified: Option<bool>,
}

fn verify_with_oracle(sol: &ExceptionalSolution, delta: f64) -> Result<bool, Error> {
    let p = ModelParams::new(delta, sol.g1_star, sol.g2_star)?;
    let res = oracle::spectrum(&p, sol.n + 3, &OracleOptions::default())?;
    Ok(Parity::BOTH.iter().all(|&parity| {
        res.sector(parity)
            .iter()
            .any(|e| (e - sol.energy).abs() < 1e-8)
    }))
}

pub fn render_exceptional(args: &ExceptionalArgs) -> Result<Rendered, CliError> {
    let (lo, hi) = args
        .g1_range
        .split_once(':')
        .and_then(|(a, b)| Some((a.trim().parse::<f64>().ok()?, b.trim().parse::<f64>().ok()?)))
        .ok_or_else(|| CliError::Usage(format!("g1-range must be lo:hi, got '{}'", args.g1_range)))?;
    positive("grid-step", args.grid_step)?;
    positive("tol", args.tol)?;
    ModelParams::with_ratio(args.delta, 1.0, args.r)?;
    let opts = ExceptionalOptions {
        grid_step: args.grid_step,
        tol: args.tol,
    };
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    let mut nonconverged = false;
    for n in 0..=args.nmax {
        for sol in gfunc::find_exceptional(args.delta, args.r, n, (lo, hi), &opts)? {
            if sol.condition_residual.abs() > opts.tol {
                warnings.push(format!("n = {n} g1 = {}: residual {:e} above tol", sol.g1_star, sol.condition_residual));
            }
            let oracle_verified = if args.verify {
                match verify_with_oracle(&sol, args.delta) {
                    Ok(v) => Some(v),
                    Err(err) => {
                        nonconverged |= matches!(err, Error::CutoffExceeded { .. });
                        warnings.push(format!("n = {n} g1 = {}: {err}", sol.g1_star));
                        Some(false)
                    }
                }
            } else {
                None
            };
            rows.push(ExceptionalRow {
                n,
                g1: sol.g1_star,
                g2: sol.g2_star,
                energy: sol.energy,
                residual: sol.condition_residual,
                oracle_verified,
            });
        }
    }
    let content = match args.format {
        Format::Csv => {
            let mut s = String::from("n,g1,energy,residual,oracle_verified\n");
            for r in &rows {
                let v = r.oracle_verified.map(|b| b.to_string()).unwrap_or_default();
                let _ = writeln!(s, "{},{},{},{},{}", r.n, float(r.g1), float(r.energy), float(r.residual), v);
            }
            s
        }
        Format::Json => json_document(args, &rows, &warnings)?,
        Format::Svg => exceptional_svg(args, (lo, hi), &rows),
    };
    Ok(Rendered {
        content,
        warnings,
        nonconverged,
        default_name: "exceptional",
        format: args.format,
        out: args.out.clone(),
    })
}

fn exceptional_svg(args: &ExceptionalArgs, (lo, hi): (f64, f64), rows: &[ExceptionalRow]) -> String {
    let mut items = Vec::new();
    let lambda = |g: f64| 0.5 * (1.0 + args.r * args.r) * g * g;
    let samples = 200;
    for n in 0..=args.nmax {
        let points = (0..=samples)
            .map(|i| {
                let g = lo + (hi - lo) * i as f64 / samples as f64;
                (g, n as f64 - lambda(g))
            })
            .collect();
        items.push(Item::Line {
            points,
            style: Style {
                color: "#999999",
                dash: Some("4 4"),
                width: 1.0,
            },
        });
    }
    items.push(Item::Circles {
        points: rows.iter().map(|r| (r.g1, r.energy)).collect(),
        radius: 5.0,
        color: "black",
    });
    let y_range = svg::data_range(
        [-lambda(hi), args.nmax as f64].into_iter().chain(rows.iter().map(|r| r.energy)),
        (-1.0, 1.0),
    );
    Plot {
        title: format!("Exceptional points, Δ = {}, r = {}", args.delta, args.r),
        x_label: "g1".into(),
        y_label: "E = n − λ₊".into(),
        x_range: (lo, hi),
        y_range,
        items,
        legend: vec![("n − λ₊".into(), "#999999")],
    }
    .render()
}

// ---------------------------------------------------------------- driver

fn write_output(r: &Rendered) -> Result<Option<PathBuf>, CliError> {
    let path = match (&r.out, std::env::var_os(OUT_DIR_ENV)) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(dir)) => Some(Path::new(&dir).join(format!("{}.{}", r.default_name, r.format.extension()))),
        (None, None) => None,
    };
    match &path {
        Some(p) => std::fs::write(p, &r.content).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?,
        None => print!("{}", r.content),
    }
    Ok(path)
}

pub fn render(cli: &Cli) -> Result<Rendered, CliError> {
    match &cli.command {
        Command::Gscan(a) => render_gscan(a),
        Command::Spectrum(a) => render_spectrum(a),
        Command::Exceptional(a) => render_exceptional(a),
    }
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<String> = args
        .into_iter()
        .map(|a| a.into().to_string_lossy().into_owned())
        .collect();
    let outcome = expand_config(args).and_then(|args| {
        Cli::try_parse_from(args).map_err(|e| {
            let code = e.exit_code();
            let _ = e.print();
            if code == 0 {
                CliError::Io(String::new())
            } else {
                CliError::Usage(String::new())
            }
        })
    });
    let cli = match outcome {
        Ok(cli) => cli,
        // help and version land here with an empty message
        Err(CliError::Io(m)) if m.is_empty() => return 0,
        Err(e) => {
            if !matches!(&e, CliError::Usage(m) if m.is_empty()) {
                eprintln!("{e}");
            }
            return e.exit_code();
        }
    };
    match render(&cli).and_then(|r| write_output(&r).map(|_| r)) {
        Ok(r) => {
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
            if r.nonconverged {
                3
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
