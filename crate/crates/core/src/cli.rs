//! Command-line front end. [`run`] parses arguments, writes results to the
//! given writers and returns the process exit code:
//! 0 success (all checks pass), 1 a check failed, 2 usage error,
//! 3 bad input data, 4 sampler efficiency error.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::analytic::{
    cap_delta_curve, cap_sigma_survival, delta_density_from_sigma, even_dim_cap_delta_density, linspace, DensityCurve,
    Interp, SigmaCdf,
};
use crate::error::Error;
use crate::geometry::{Body, ConvexSphericalBody, Dimension, SphericalCap, UnitVector};
use crate::mc::{delta_samples, sigma_samples, Execution};
use crate::verify::{run_checks, suite_checks, Suite};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_EFFICIENCY: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "sphsec", version, about = "Distance and chord distributions of spherical convex bodies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Distance density and CDF for two uniform points in a cap.
    CapDelta(CapArgs),
    /// Chord-length CDF of a cap (input for `transform`).
    CapSigma(CapArgs),
    /// Distance density from a tabulated chord-length CDF.
    Transform(TransformArgs),
    /// Monte Carlo samples or a summary of Δ or σ.
    Mc(McArgs),
    /// Run verification checks and print one JSON report per line.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct CapArgs {
    /// Ambient dimension d (the sphere is S^{d-1}).
    #[arg(long = "dim")]
    pub dim: usize,
    /// Spherical radius in radians, in (0, π/2).
    #[arg(long)]
    pub radius: f64,
    /// Number of grid points on [0, 2r].
    #[arg(long, default_value_t = 512)]
    pub grid: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Use the even-dimension closed form instead of quadrature.
    #[arg(long)]
    pub closed_form: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InterpArg {
    Linear,
    Step,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    /// CSV file with rows `s,F_sigma` (a header row is skipped).
    #[arg(long)]
    pub sigma_cdf: PathBuf,
    /// |K|
    #[arg(long)]
    pub volume: f64,
    /// |∂K|
    #[arg(long)]
    pub boundary: f64,
    #[arg(long = "dim")]
    pub dim: usize,
    /// Number of grid points on [0, last s].
    #[arg(long, default_value_t = 512)]
    pub grid: usize,
    #[arg(long, value_enum, default_value_t = InterpArg::Linear)]
    pub interp: InterpArg,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum What {
    Delta,
    Sigma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BodyKind {
    Cap,
    Halfspaces,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum McFormat {
    Summary,
    Raw,
}

#[derive(Debug, Args)]
pub struct BodyArgs {
    #[arg(long = "dim")]
    pub dim: Option<usize>,
    #[arg(long)]
    pub radius: Option<f64>,
    /// Halfspace body file: one normal per line, plus `interior: x1 x2 ...`.
    #[arg(long)]
    pub body_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(long, value_enum)]
    pub what: What,
    #[arg(long, value_enum, default_value_t = BodyKind::Cap)]
    pub body: BodyKind,
    #[command(flatten)]
    pub shape: BodyArgs,
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, value_enum, default_value_t = McFormat::Summary)]
    pub format: McFormat,
    /// Histogram bins in the summary.
    #[arg(long, default_value_t = 32)]
    pub bins: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    Default,
    Crofton,
    Bp,
    Theorem,
    CapSigma,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = SuiteArg::Default)]
    pub suite: SuiteArg,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    /// Cap dimension; with --radius (default π/3) replaces the suite's bodies.
    #[arg(long = "dim")]
    pub dim: Option<usize>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub body_file: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Record wall time in the `ms` field (makes output run-dependent).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
    Efficiency(String),
    Io(std::io::Error),
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Data(_) | Failure::Io(_) => EXIT_DATA,
            Failure::Efficiency(_) => EXIT_EFFICIENCY,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Efficiency(m) => m.clone(),
            Failure::Io(e) => e.to_string(),
        }
    }

    /// Library errors from argument-derived values are usage errors.
    fn usage(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }

    fn runtime(e: Error) -> Self {
        match e {
            Error::Efficiency { .. } => Failure::Efficiency(e.to_string()),
            other => Failure::Data(other.to_string()),
        }
    }
}

type CmdResult = std::result::Result<i32, Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::CapDelta(a) => cmd_cap_delta(&a, out),
        Command::CapSigma(a) => cmd_cap_sigma(&a, out),
        Command::Transform(a) => cmd_transform(&a, out),
        Command::Mc(a) => cmd_mc(&a, out),
        Command::Verify(a) => cmd_verify(&a, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message());
            f.code()
        }
    }
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_columns(out: &mut dyn Write, format: Format, names: &[&str], cols: &[&[f64]], meta: serde_json::Value) -> std::io::Result<()> {
    match format {
        Format::Csv => {
            writeln!(out, "{}", names.join(","))?;
            for i in 0..cols[0].len() {
                let row: Vec<String> = cols.iter().map(|c| fmt_f64(c[i])).collect();
                writeln!(out, "{}", row.join(","))?;
            }
        }
        Format::Json => {
            let mut obj = serde_json::Map::new();
            if let serde_json::Value::Object(m) = meta {
                obj.extend(m);
            }
            for (name, col) in names.iter().zip(cols) {
                obj.insert(name.to_string(), json!(col));
            }
            writeln!(out, "{}", serde_json::Value::Object(obj))?;
        }
    }
    Ok(())
}

fn cap_from(dim: usize, radius: f64) -> std::result::Result<SphericalCap, Failure> {
    SphericalCap::at_pole(Dimension::new(dim).map_err(Failure::usage)?, radius).map_err(Failure::usage)
}

fn grid_points(grid: usize) -> std::result::Result<usize, Failure> {
    if grid < 2 {
        return Err(Failure::Usage(format!("--grid needs at least 2 points, got {grid}")));
    }
    Ok(grid)
}

fn curve_meta(curve: &DensityCurve) -> serde_json::Value {
    json!({
        "dim": curve.dim.get(),
        "body": curve.body,
        "provenance": curve.provenance,
        "clamped_from": curve.clamped_from,
    })
}

fn cmd_cap_delta(a: &CapArgs, out: &mut dyn Write) -> CmdResult {
    let cap = cap_from(a.dim, a.radius)?;
    let grid = linspace(0.0, 2.0 * cap.radius(), grid_points(a.grid)?);
    let mut curve = cap_delta_curve(&cap, &grid).map_err(Failure::runtime)?;
    if a.closed_form {
        curve.density = grid
            .iter()
            .map(|&t| even_dim_cap_delta_density(&cap, t))
            .collect::<crate::Result<_>>()
            .map_err(Failure::usage)?;
        curve.provenance = "even-dimension closed form".into();
    }
    write_columns(out, a.format, &["t", "f_delta", "F_delta"], &[&curve.grid, &curve.density, &curve.cdf], curve_meta(&curve))?;
    Ok(EXIT_OK)
}

fn cmd_cap_sigma(a: &CapArgs, out: &mut dyn Write) -> CmdResult {
    let cap = cap_from(a.dim, a.radius)?;
    let grid = linspace(0.0, 2.0 * cap.radius(), grid_points(a.grid)?);
    let cdf: Vec<f64> = grid.iter().map(|&s| 1.0 - cap_sigma_survival(&cap, s).value).collect();
    let meta = json!({ "dim": a.dim, "body": Body::Cap(cap).describe() });
    write_columns(out, a.format, &["s", "F_sigma"], &[&grid, &cdf], meta)?;
    Ok(EXIT_OK)
}

/// Reads `s,F` rows; commas or whitespace separate fields, `#` starts a
/// comment and a non-numeric first row is treated as a header.
pub fn read_sigma_table(path: &Path) -> crate::Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Domain(format!("{}: {e}", path.display())))?;
    let (mut s, mut f) = (Vec::new(), Vec::new());
    let mut first = true;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|x| !x.is_empty()).collect();
        let parsed: Option<Vec<f64>> = fields.iter().map(|x| x.parse::<f64>().ok()).collect();
        match parsed {
            Some(v) if v.len() >= 2 => {
                s.push(v[0]);
                f.push(v[1]);
            }
            None if first => {}
            _ => return Err(Error::Domain(format!("line {}: expected two numbers, got '{raw}'", lineno + 1))),
        }
        first = false;
    }
    if s.is_empty() {
        return Err(Error::Domain(format!("{}: no data rows", path.display())));
    }
    Ok((s, f))
}

fn cmd_transform(a: &TransformArgs, out: &mut dyn Write) -> CmdResult {
    let d = Dimension::new(a.dim).map_err(Failure::usage)?;
    let points = grid_points(a.grid)?;
    let (s, f) = read_sigma_table(&a.sigma_cdf).map_err(Failure::runtime)?;
    let interp = match a.interp {
        InterpArg::Linear => Interp::Linear,
        InterpArg::Step => Interp::Step,
    };
    let sigma = SigmaCdf::tabulated(s, f, interp).map_err(Failure::runtime)?;
    let grid = linspace(0.0, sigma.support_max(), points);
    let mut curve = delta_density_from_sigma(&sigma, a.volume, a.boundary, d, &grid).map_err(|e| match e {
        Error::Domain(_) if !(a.volume > 0.0 && a.boundary > 0.0) => Failure::usage(e),
        other => Failure::runtime(other),
    })?;
    curve.body = format!("tabulated({})", a.sigma_cdf.display());
    write_columns(out, a.format, &["t", "f_delta", "F_delta"], &[&curve.grid, &curve.density, &curve.cdf], curve_meta(&curve))?;
    Ok(EXIT_OK)
}

/// Parses a halfspace body file: one normal per line (whitespace- or
/// comma-separated components, normalized on read) and a line
/// `interior: x1 x2 ...` with a strictly interior witness.
pub fn read_body_file(path: &Path) -> crate::Result<ConvexSphericalBody> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Domain(format!("{}: {e}", path.display())))?;
    let mut normals = Vec::new();
    let mut interior = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (is_interior, rest) = match line.strip_prefix("interior:") {
            Some(rest) => (true, rest),
            None => (false, line),
        };
        let coords: Vec<f64> = rest
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|x| !x.is_empty())
            .map(|x| x.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Domain(format!("line {}: {e}", lineno + 1)))?;
        let v = UnitVector::normalize(coords).map_err(|e| Error::Domain(format!("line {}: {e}", lineno + 1)))?;
        if is_interior {
            interior = Some(v);
        } else {
            normals.push(v);
        }
    }
    let interior = interior.ok_or_else(|| Error::Domain(format!("{}: missing 'interior:' line", path.display())))?;
    ConvexSphericalBody::new(normals, interior)
}

fn body_from(kind: Option<BodyKind>, shape: &BodyArgs, default_radius: Option<f64>) -> std::result::Result<Option<Body>, Failure> {
    let kind = kind.or(if shape.body_file.is_some() {
        Some(BodyKind::Halfspaces)
    } else if shape.dim.is_some() || shape.radius.is_some() {
        Some(BodyKind::Cap)
    } else {
        None
    });
    match kind {
        None => Ok(None),
        Some(BodyKind::Cap) => {
            let dim = shape.dim.ok_or_else(|| Failure::Usage("a cap needs --dim".into()))?;
            let radius = shape
                .radius
                .or(default_radius)
                .ok_or_else(|| Failure::Usage("a cap needs --radius".into()))?;
            Ok(Some(Body::Cap(cap_from(dim, radius)?)))
        }
        Some(BodyKind::Halfspaces) => {
            let path = shape
                .body_file
                .as_ref()
                .ok_or_else(|| Failure::Usage("--body halfspaces needs --body-file".into()))?;
            let body = read_body_file(path).map_err(|e| Failure::Data(e.to_string()))?;
            if let Some(d) = shape.dim {
                if d != body.dim().get() {
                    return Err(Failure::Usage(format!("--dim {d} does not match the body file dimension {}", body.dim())));
                }
            }
            Ok(Some(Body::Convex(body)))
        }
    }
}

fn cmd_mc(a: &McArgs, out: &mut dyn Write) -> CmdResult {
    if a.n == 0 {
        return Err(Failure::Usage("--n must be positive".into()));
    }
    let body = body_from(Some(a.body), &a.shape, None)?.expect("kind given");
    let exec = Execution::from_workers(a.workers);
    let batch = match a.what {
        What::Sigma => sigma_samples(&body, a.n, a.seed, exec),
        What::Delta => delta_samples(&body, a.n, a.seed, exec),
    }
    .map_err(Failure::runtime)?;
    match a.format {
        McFormat::Raw => {
            writeln!(out, "value")?;
            for v in &batch.values {
                writeln!(out, "{}", fmt_f64(*v))?;
            }
        }
        McFormat::Summary => {
            let n = batch.values.len() as f64;
            let mean = batch.values.iter().sum::<f64>() / n;
            let min = batch.values.iter().copied().fold(f64::INFINITY, f64::min);
            let max = batch.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let bins = a.bins.max(1);
            let hi = if max > 0.0 { max } else { 1.0 };
            let mut counts = vec![0u64; bins];
            for &v in &batch.values {
                let k = ((v / hi) * bins as f64).floor() as usize;
                counts[k.min(bins - 1)] += 1;
            }
            let rate_key = match a.what {
                What::Sigma => "hit_rate",
                What::Delta => "acceptance_rate",
            };
            let mut obj = serde_json::Map::new();
            obj.insert("what".into(), json!(format!("{:?}", a.what).to_lowercase()));
            obj.insert("body".into(), json!(body.describe()));
            obj.insert("n".into(), json!(batch.values.len()));
            obj.insert("seed".into(), json!(a.seed));
            obj.insert("attempted".into(), json!(batch.n_attempted));
            obj.insert("accepted".into(), json!(batch.n_accepted));
            obj.insert(rate_key.into(), json!(batch.acceptance_rate()));
            obj.insert(format!("{rate_key}_se"), json!(batch.acceptance_se()));
            obj.insert("mean".into(), json!(mean));
            obj.insert("min".into(), json!(min));
            obj.insert("max".into(), json!(max));
            obj.insert("histogram".into(), json!({ "lo": 0.0, "hi": hi, "counts": counts }));
            writeln!(out, "{}", serde_json::Value::Object(obj))?;
        }
    }
    Ok(EXIT_OK)
}

fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write) -> CmdResult {
    if a.n < 2 {
        return Err(Failure::Usage("--n must be at least 2".into()));
    }
    let suite = match a.suite {
        SuiteArg::Default => Suite::Default,
        SuiteArg::Crofton => Suite::Crofton,
        SuiteArg::Bp => Suite::Bp,
        SuiteArg::Theorem => Suite::Theorem,
        SuiteArg::CapSigma => Suite::CapSigma,
    };
    let shape = BodyArgs { dim: a.dim, radius: a.radius, body_file: a.body_file.clone() };
    let bodies: Vec<Body> = body_from(None, &shape, Some(std::f64::consts::FRAC_PI_3))?.into_iter().collect();
    let checks = suite_checks(suite, &bodies, a.n).map_err(Failure::usage)?;
    let exec = Execution::from_workers(a.workers);
    let reports = run_checks(&checks, a.n, a.seed, exec, a.timing).map_err(Failure::runtime)?;
    let mut all = true;
    for r in &reports {
        writeln!(out, "{}", r.to_json())?;
        all &= r.pass;
    }
    Ok(if all { EXIT_OK } else { EXIT_FAILED })
}
