//! Command-line front end: argument definitions, trajectory files, report
//! serialization and subcommand dispatch.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::averaging::{CheckpointSchedule, ObservableTrace};
use crate::error::{Error, Result};
use crate::fourier::{build_table, decay_fit};
use crate::harness::{
    compare_wb_vs_b, initial_point_spread, integrate_periodic, run_convergence_study,
    ConvergenceReport, Observable, SpeedupReport, SpreadReport, Truth,
};
use crate::rotation::{
    angles_from_trace, auto_avoid_angle, build_lift, project_trace, rotation_number, winding_check,
    RotationEstimate, UnwrapMode, WindingReport,
};
use crate::systems::{
    continued_fraction, iterate, small_denominator_scan, ContinuedFraction, ScanReport, SystemSpec,
    GOLDEN_MEAN, SQRT2_MINUS_1,
};
use crate::weights::WeightSpec;

// ---------------------------------------------------------------------------
// Trajectory files

/// A validated numeric matrix read from a CSV trajectory file.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryFile {
    pub path: PathBuf,
    pub header: Option<Vec<String>>,
    pub trace: ObservableTrace,
}

impl TrajectoryFile {
    pub fn n_rows(&self) -> usize {
        self.trace.len()
    }

    pub fn n_cols(&self) -> usize {
        self.trace.dim()
    }
}

fn is_number(token: &str) -> bool {
    token.trim().parse::<f64>().is_ok()
}

/// Parse CSV text. Blank lines and lines starting with `#` are skipped; the
/// first remaining line is a header if none of its fields is a number.
pub fn parse_trajectory_str(path: &Path, text: &str) -> Result<TrajectoryFile> {
    let parse_err = |line: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut header = None;
    let mut cols: Option<usize> = None;
    let mut data = Vec::new();
    let mut rows = 0usize;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.is_none() && header.is_none() && !fields.iter().any(|f| is_number(f)) {
            header = Some(fields.iter().map(|f| f.to_string()).collect::<Vec<_>>());
            cols = Some(fields.len());
            continue;
        }
        match cols {
            Some(c) if c != fields.len() => {
                return Err(parse_err(
                    line_no,
                    format!("expected {c} columns, found {}", fields.len()),
                ));
            }
            _ => cols = Some(fields.len()),
        }
        for (j, f) in fields.iter().enumerate() {
            let v: f64 = f.parse().map_err(|_| {
                parse_err(line_no, format!("column {}: `{f}` is not a number", j + 1))
            })?;
            if !v.is_finite() {
                return Err(parse_err(
                    line_no,
                    format!("column {}: non-finite value `{f}`", j + 1),
                ));
            }
            data.push(v);
        }
        rows += 1;
    }
    if rows < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            available: rows,
        });
    }
    let dim = cols.unwrap_or(0);
    Ok(TrajectoryFile {
        path: path.to_path_buf(),
        header,
        trace: ObservableTrace::new(dim, data)?,
    })
}

pub fn parse_trajectory(path: &Path) -> Result<TrajectoryFile> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_trajectory_str(path, &text)
}

/// CSV with header `x1,…,xD` and every value at 17 significant digits.
pub fn trajectory_csv(trace: &ObservableTrace) -> String {
    let mut out = String::with_capacity(trace.len() * trace.dim() * 24);
    let header: Vec<String> = (1..=trace.dim()).map(|j| format!("x{j}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in trace.rows() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{v:.16e}"));
        }
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// JSON output

/// Pretty printer that writes every float with 17 significant digits.
struct RoundTripFormatter(PrettyFormatter<'static>);

impl Formatter for RoundTripFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        write!(writer, "{:.16e}", value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serialize to pretty JSON with round-trip-safe floats.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(
        &mut buf,
        RoundTripFormatter(PrettyFormatter::new()),
    );
    value
        .serialize(&mut ser)
        .expect("report types serialize infallibly");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_stdout(contents: &str) -> Result<()> {
    io::stdout()
        .lock()
        .write_all(contents.as_bytes())
        .map_err(|source| Error::Io {
            path: PathBuf::from("<stdout>"),
            source,
        })
}

#[derive(Serialize)]
struct Metadata<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'a str,
    created_unix: u64,
}

/// `<out>.meta.json`: the only place a timestamp is written.
fn metadata_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Write a JSON report to `out` (plus its metadata sidecar) or to stdout.
fn emit<T: Serialize>(subcommand: &str, out: Option<&Path>, report: &T) -> Result<()> {
    let json = to_json_string(report);
    match out {
        Some(path) => {
            write_file(path, &json)?;
            let meta = Metadata {
                tool: "quasiavg",
                version: env!("CARGO_PKG_VERSION"),
                subcommand,
                created_unix: SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map_or(0, |d| d.as_secs()),
            };
            write_file(&metadata_path(path), &to_json_string(&meta))
        }
        None => write_stdout(&json),
    }
}

// ---------------------------------------------------------------------------
// Argument types

/// `<px>,<py>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Center(pub [f64; 2]);

impl FromStr for Center {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let v: Vec<f64> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::invalid("center", format!("`{s}` is not `px,py`")))?;
        match v[..] {
            [x, y] if x.is_finite() && y.is_finite() => Ok(Center([x, y])),
            _ => Err(Error::invalid("center", format!("`{s}` is not `px,py`"))),
        }
    }
}

/// Unwrap mode, with `avoid:auto` resolved from the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeArg {
    Fixed(UnwrapMode),
    AutoAvoid,
}

impl FromStr for ModeArg {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "avoid:auto" {
            Ok(ModeArg::AutoAvoid)
        } else {
            s.parse().map(ModeArg::Fixed)
        }
    }
}

/// `geometric`, `geometric:<lo>:<hi>:<per_decade>` or `n1,n2,…`.
#[derive(Debug, Clone, PartialEq)]
pub enum CheckpointsArg {
    Geometric(CheckpointSchedule),
    List(CheckpointSchedule),
}

impl FromStr for CheckpointsArg {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::invalid(
                "checkpoints",
                format!(
                    "`{s}` is not `geometric`, `geometric:lo:hi:per_decade` or a list n1,n2,..."
                ),
            )
        };
        if s == "geometric" {
            return Ok(CheckpointsArg::Geometric(
                CheckpointSchedule::default_geometric(),
            ));
        }
        if let Some(rest) = s.strip_prefix("geometric:") {
            let p: Vec<u32> = rest
                .split(':')
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad())?;
            return match p[..] {
                [lo, hi, pd] if hi <= 9 => {
                    CheckpointSchedule::geometric(lo, hi, pd).map(CheckpointsArg::Geometric)
                }
                _ => Err(bad()),
            };
        }
        let list: Vec<usize> = s
            .split(',')
            .map(|t| t.trim().parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        CheckpointSchedule::new(list).map(CheckpointsArg::List)
    }
}

impl CheckpointsArg {
    /// Fit the schedule to `available` samples. Geometric schedules are
    /// truncated; explicit lists must fit as given.
    pub fn resolve(&self, available: usize) -> Result<CheckpointSchedule> {
        match self {
            CheckpointsArg::Geometric(s) => {
                s.truncated(available).map_err(|_| Error::InsufficientData {
                    needed: s.checkpoints()[0],
                    available,
                })
            }
            CheckpointsArg::List(s) => {
                if s.max() > available {
                    Err(Error::InsufficientData {
                        needed: s.max(),
                        available,
                    })
                } else {
                    Ok(s.clone())
                }
            }
        }
    }
}

fn parse_scalar(name: &str, s: &str) -> Result<f64> {
    let v = match s {
        "golden" => GOLDEN_MEAN,
        "silver" => SQRT2_MINUS_1,
        _ => s
            .parse::<f64>()
            .map_err(|_| Error::invalid(name, format!("`{s}` is not a number")))?,
    };
    if !v.is_finite() {
        return Err(Error::invalid(name, format!("`{s}` is not finite")));
    }
    Ok(v)
}

/// Colon-separated numbers; `golden` and `silver` name `(√5−1)/2` and `√2−1`.
fn parse_vector(name: &str, s: &str) -> Result<Vec<f64>> {
    s.split(':').map(|t| parse_scalar(name, t.trim())).collect()
}

/// A rotation vector, or `auto` to estimate it from the data.
#[derive(Debug, Clone, PartialEq)]
pub enum RhoArg {
    Auto,
    Value(Vec<f64>),
}

impl FromStr for RhoArg {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            Ok(RhoArg::Auto)
        } else {
            parse_vector("rho", s).map(RhoArg::Value)
        }
    }
}

/// A reference value, or `auto` for a known closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruthArg {
    Auto,
    Value(f64),
}

impl FromStr for TruthArg {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            Ok(TruthArg::Auto)
        } else {
            parse_scalar("truth", s).map(TruthArg::Value)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SystemKind {
    Rotation,
    Conjcircle,
    Embed,
    Stdmap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    Binary64,
}

/// `key=value` pairs separated by commas; values may be colon-separated
/// vectors.
fn parse_params(s: &str) -> Result<Vec<(String, String)>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::invalid("params", format!("`{kv}` is not key=value")))
        })
        .collect()
}

/// Build a system from its kind and `--params`, with defaults for omitted
/// keys.
pub fn system_from_params(kind: SystemKind, params: &str) -> Result<SystemSpec> {
    let pairs = parse_params(params)?;
    let allowed: &[&str] = match kind {
        SystemKind::Rotation => &["rho", "theta0"],
        SystemKind::Conjcircle => &["rho", "eps", "theta0"],
        SystemKind::Embed => &["rho", "decay", "theta0"],
        SystemKind::Stdmap => &["k", "x0", "y0"],
    };
    for (k, _) in &pairs {
        if !allowed.contains(&k.as_str()) {
            return Err(Error::invalid(
                "params",
                format!(
                    "unknown key `{k}` (expected one of: {})",
                    allowed.join(", ")
                ),
            ));
        }
    }
    let get = |key: &str| {
        pairs
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    };
    let scalar = |key: &str, default: f64| get(key).map_or(Ok(default), |v| parse_scalar(key, v));
    let spec = match kind {
        SystemKind::Rotation => {
            let rho = get("rho").map_or(Ok(vec![GOLDEN_MEAN]), |v| parse_vector("rho", v))?;
            let theta0 =
                get("theta0").map_or(Ok(vec![0.0; rho.len()]), |v| parse_vector("theta0", v))?;
            if theta0.len() != rho.len() {
                return Err(Error::invalid("params", "theta0 and rho differ in length"));
            }
            SystemSpec::PureRotation { rho, theta0 }
        }
        SystemKind::Conjcircle => SystemSpec::ConjugatedCircle {
            rho: scalar("rho", GOLDEN_MEAN)?,
            eps: scalar("eps", 0.05)?,
            theta0: scalar("theta0", 0.0)?,
        },
        SystemKind::Embed => SystemSpec::AnalyticEmbedding {
            rho: scalar("rho", GOLDEN_MEAN)?,
            decay: scalar("decay", 0.5)?,
            theta0: scalar("theta0", 0.0)?,
        },
        SystemKind::Stdmap => SystemSpec::StandardMap {
            k: scalar("k", 0.5)?,
            x0: scalar("x0", 0.0)?,
            y0: scalar("y0", GOLDEN_MEAN)?,
        },
    };
    spec.validate()?;
    Ok(spec)
}

// ---------------------------------------------------------------------------
// Command line

/// Weighted Birkhoff averages for quasiperiodic trajectories.
#[derive(Debug, Parser)]
#[command(name = "quasiavg", version, about)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,

    /// Floating-point mode for accumulation.
    #[arg(long, global = true, value_enum, default_value = "binary64")]
    pub precision: Precision,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a trajectory of a test system as CSV.
    Simulate(SimulateArgs),
    /// Estimate a rotation number from a planar or angle trajectory.
    Rotnum(RotnumArgs),
    /// Estimate Fourier coefficients of the embedding along a trajectory.
    Fourier(FourierArgs),
    /// Average a periodic function along a rotation orbit.
    Integrate(IntegrateArgs),
    /// Error against averaging length for several weights.
    Converge(ConvergeArgs),
    /// Small-denominator scan and continued fractions of a rotation vector.
    Scan(ScanArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub system: SystemKind,
    /// Comma-separated key=value pairs, e.g. `rho=golden,eps=0.05`.
    #[arg(long, default_value = "")]
    pub params: String,
    /// Number of states, including the initial one.
    #[arg(long)]
    pub steps: usize,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RotnumArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Projection center `px,py` for planar input.
    #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
    pub center: Center,
    /// Treat the input columns as angles in turns instead of planar points.
    #[arg(long)]
    pub angles: bool,
    /// positive | shortest | avoid:<theta0> | avoid:auto
    #[arg(long, default_value = "shortest")]
    pub mode: ModeArg,
    #[arg(long, default_value = "exp")]
    pub weight: WeightSpec,
    #[arg(long, default_value = "geometric")]
    pub checkpoints: CheckpointsArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FourierArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Rotation vector (colon-separated) or `auto` for planar input.
    #[arg(long, default_value = "auto")]
    pub rho: RhoArg,
    /// Projection center used by `--rho auto`.
    #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
    pub center: Center,
    #[arg(long = "max-order", default_value_t = 8)]
    pub max_order: u32,
    #[arg(long, default_value = "exp")]
    pub weight: WeightSpec,
    /// Samples to use (all rows when omitted).
    #[arg(long)]
    pub n: Option<usize>,
    /// Coefficient table output path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the decay fit to this path.
    #[arg(long)]
    pub decay: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IntegrateArgs {
    /// cos | expcos | coord:<j> | const:<c>
    #[arg(long, default_value = "expcos")]
    pub function: Observable,
    #[arg(long, default_value = "golden")]
    pub rho: RhoArg,
    #[arg(long, default_value = "exp")]
    pub weight: WeightSpec,
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    /// Reference value, or `auto` for the built-in functions.
    #[arg(long, allow_hyphen_values = true)]
    pub truth: Option<TruthArg>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConvergeArgs {
    #[arg(long, value_enum, default_value = "rotation")]
    pub system: SystemKind,
    #[arg(long, default_value = "")]
    pub params: String,
    #[arg(long, default_value = "cos")]
    pub observable: Observable,
    /// Comma-separated weights.
    #[arg(long, value_delimiter = ',', default_value = "uniform,sin2,exp")]
    pub weight: Vec<WeightSpec>,
    #[arg(long, default_value = "geometric")]
    pub checkpoints: CheckpointsArg,
    /// Reference value, or `auto` (rotation systems only).
    #[arg(long, default_value = "auto", allow_hyphen_values = true)]
    pub truth: TruthArg,
    /// Random initial phases for a spread check at the largest checkpoint.
    #[arg(long, default_value_t = 0)]
    pub starts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Flat `N,weight,error` table.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long, default_value = "golden")]
    pub rho: RhoArg,
    #[arg(long = "max-norm", default_value_t = 1000)]
    pub max_norm: u32,
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    /// Continued-fraction terms per component.
    #[arg(long = "cf-terms", default_value_t = 20)]
    pub cf_terms: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn subcommand(&self) -> &'static str {
        match self.command {
            Command::Simulate(_) => "simulate",
            Command::Rotnum(_) => "rotnum",
            Command::Fourier(_) => "fourier",
            Command::Integrate(_) => "integrate",
            Command::Converge(_) => "converge",
            Command::Scan(_) => "scan",
        }
    }

    /// Cross-flag checks that clap cannot express.
    pub fn validate(&self) -> Result<()> {
        match &self.command {
            Command::Simulate(a) if a.steps < 2 => {
                Err(Error::invalid("steps", "need at least 2 steps"))
            }
            Command::Fourier(a) if a.n.is_some_and(|n| n < 2) => {
                Err(Error::invalid("n", "need at least 2 samples"))
            }
            Command::Integrate(a) => match &a.rho {
                RhoArg::Auto => Err(Error::invalid(
                    "rho",
                    "`auto` is not available for integrate",
                )),
                RhoArg::Value(v) if v.iter().any(|r| !(*r > 0.0 && *r < 1.0)) => {
                    Err(Error::invalid("rho", "components must lie in (0, 1)"))
                }
                _ if a.n < 2 => Err(Error::invalid("n", "need at least 2 samples")),
                _ => Ok(()),
            },
            Command::Converge(a) if a.weight.is_empty() => {
                Err(Error::invalid("weight", "at least one weight is required"))
            }
            Command::Scan(a) => match &a.rho {
                RhoArg::Auto => Err(Error::invalid("rho", "`auto` is not available for scan")),
                RhoArg::Value(v) if v.iter().any(|r| !(*r > 0.0 && *r < 1.0)) => {
                    Err(Error::invalid("rho", "components must lie in (0, 1)"))
                }
                _ if a.cf_terms > 40 => Err(Error::invalid("cf-terms", "at most 40")),
                _ => Ok(()),
            },
            _ => Ok(()),
        }
    }
}

// ---------------------------------------------------------------------------
// Reports

#[derive(Debug, Serialize)]
struct RotnumReport {
    input: PathBuf,
    rows: usize,
    dim: usize,
    center: Option<[f64; 2]>,
    mode: UnwrapMode,
    weight: WeightSpec,
    winding: Option<WindingReport>,
    ambiguous_steps: usize,
    max_lift_residual: f64,
    estimates: Vec<RotationEstimate>,
}

#[derive(Debug, Serialize)]
struct IntegrateReport {
    function: Observable,
    rho: Vec<f64>,
    weight: WeightSpec,
    #[serde(rename = "N")]
    n: usize,
    estimate: f64,
    truth: Option<Truth>,
    error: Option<f64>,
}

#[derive(Debug, Serialize)]
struct ConvergeReport {
    system: SystemSpec,
    #[serde(flatten)]
    study: ConvergenceReport,
    speedup: Option<SpeedupReport>,
    spread: Option<SpreadReport>,
}

#[derive(Debug, Serialize)]
struct ScanOutput {
    rho: Vec<f64>,
    scan: ScanReport,
    continued_fractions: Vec<ContinuedFraction>,
}

// ---------------------------------------------------------------------------
// Dispatch

/// Validate and execute a parsed command line.
pub fn run(config: &RunConfig) -> Result<()> {
    config.validate()?;
    let name = config.subcommand();
    match &config.command {
        Command::Simulate(a) => {
            let spec = system_from_params(a.system, &a.params)?;
            let csv = trajectory_csv(&iterate(&spec, a.steps)?);
            match &a.out {
                Some(p) => write_file(p, &csv),
                None => write_stdout(&csv),
            }
        }
        Command::Rotnum(a) => emit(name, a.out.as_deref(), &rotnum(a)?),
        Command::Fourier(a) => fourier(name, a),
        Command::Integrate(a) => emit(name, a.out.as_deref(), &integrate(a)?),
        Command::Converge(a) => {
            let report = converge(a)?;
            if let Some(p) = &a.csv {
                write_file(p, &report.study.to_csv())?;
            }
            emit(name, a.out.as_deref(), &report)
        }
        Command::Scan(a) => emit(name, a.out.as_deref(), &scan(a)?),
    }
}

fn rotnum(a: &RotnumArgs) -> Result<RotnumReport> {
    let file = parse_trajectory(&a.input)?;
    let angles = if a.angles {
        angles_from_trace(&file.trace)?
    } else {
        project_trace(&file.trace, a.center.0)?
    };
    let mode = match a.mode {
        ModeArg::Fixed(m) => m,
        ModeArg::AutoAvoid => {
            UnwrapMode::AvoidAngle(auto_avoid_angle(&angles).ok_or_else(|| {
                Error::invalid(
                    "mode",
                    "every step direction occurs; choose a mode explicitly",
                )
            })?)
        }
    };
    let lift = build_lift(&angles, mode)?;
    let schedule = a.checkpoints.resolve(lift.len() - 1)?;
    let winding = if a.angles {
        None
    } else {
        Some(winding_check(
            &angles,
            angles.len().min(schedule.max() + 1).max(3),
        )?)
    };
    Ok(RotnumReport {
        input: a.input.clone(),
        rows: file.n_rows(),
        dim: lift.dim(),
        center: (!a.angles).then_some(a.center.0),
        mode,
        weight: a.weight,
        winding,
        ambiguous_steps: lift.ambiguous_steps(),
        max_lift_residual: lift.max_lift_residual(),
        estimates: rotation_number(&lift, a.weight, &schedule)?,
    })
}

/// Rotation number of a planar trace about `center`, shortest-arc lift.
fn estimate_rho(trace: &ObservableTrace, center: [f64; 2], weight: WeightSpec) -> Result<Vec<f64>> {
    let lift = build_lift(&project_trace(trace, center)?, UnwrapMode::ShortestArc)?;
    let schedule = CheckpointSchedule::single(lift.len() - 1)?;
    let est = rotation_number(&lift, weight, &schedule)?;
    Ok(est[0].rho.coords().to_vec())
}

fn fourier(name: &str, a: &FourierArgs) -> Result<()> {
    let file = parse_trajectory(&a.input)?;
    let n = a.n.unwrap_or(file.n_rows());
    let rho = match &a.rho {
        RhoArg::Value(v) => v.clone(),
        RhoArg::Auto => estimate_rho(&file.trace, a.center.0, a.weight)?,
    };
    let table = build_table(&file.trace, &rho, a.max_order, a.weight, n)?;
    if let Some(p) = &a.decay {
        write_file(p, &to_json_string(&decay_fit(&table)?))?;
    }
    emit(name, a.out.as_deref(), &table.to_file())
}

fn integrate(a: &IntegrateArgs) -> Result<IntegrateReport> {
    let RhoArg::Value(rho) = &a.rho else {
        unreachable!("validated")
    };
    let f = a.function;
    let estimate = integrate_periodic(|x| f.eval(x), rho, a.weight, a.n)?;
    let truth = match a.truth {
        None => None,
        Some(TruthArg::Value(v)) => Some(Truth::user(v)),
        Some(TruthArg::Auto) => Some(f.torus_mean(rho.len()).ok_or_else(|| {
            Error::invalid(
                "truth",
                format!("no built-in value for `{f}` in dimension {}", rho.len()),
            )
        })?),
    };
    Ok(IntegrateReport {
        function: f,
        rho: rho.clone(),
        weight: a.weight,
        n: a.n,
        estimate,
        error: truth.map(|t| (estimate - t.value).abs()),
        truth,
    })
}

fn converge(a: &ConvergeArgs) -> Result<ConvergeReport> {
    let system = system_from_params(a.system, &a.params)?;
    let truth = match a.truth {
        TruthArg::Value(v) => Truth::user(v),
        TruthArg::Auto => match &system {
            SystemSpec::PureRotation { rho, .. } => a.observable.torus_mean(rho.len()),
            _ => None,
        }
        .ok_or_else(|| {
            Error::invalid(
                "truth",
                "no built-in value for this system and observable; pass --truth",
            )
        })?,
    };
    let schedule = match &a.checkpoints {
        CheckpointsArg::Geometric(s) | CheckpointsArg::List(s) => s.clone(),
    };
    let study = run_convergence_study(&a.weight, &system, a.observable, truth, &schedule)?;
    let n = schedule.max();
    let speedup = (a.weight.contains(&WeightSpec::Uniform)
        && a.weight.contains(&WeightSpec::Exponential))
    .then(|| compare_wb_vs_b(&system, a.observable, truth, n))
    .transpose()?;
    let spread = (a.starts > 0)
        .then(|| {
            initial_point_spread(
                &system,
                a.observable,
                truth,
                WeightSpec::Exponential,
                n,
                a.starts,
                a.seed,
            )
        })
        .transpose()?;
    Ok(ConvergeReport {
        system,
        study,
        speedup,
        spread,
    })
}

fn scan(a: &ScanArgs) -> Result<ScanOutput> {
    let RhoArg::Value(rho) = &a.rho else {
        unreachable!("validated")
    };
    Ok(ScanOutput {
        rho: rho.clone(),
        scan: small_denominator_scan(rho, a.max_norm, a.beta)?,
        continued_fractions: rho
            .iter()
            .map(|&r| continued_fraction(r, a.cf_terms))
            .collect::<Result<_>>()?,
    })
}

/// Machine-readable error record written to stderr on failure.
#[derive(Debug, Serialize)]
pub struct ErrorReport<'a> {
    pub subcommand: Option<&'a str>,
    pub kind: &'a str,
    pub message: String,
    pub exit_code: i32,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_detection_and_shape() {
        let f = parse_trajectory_str(Path::new("t.csv"), "x1,x2\n1,2\n3,4\n5,6\n").unwrap();
        assert_eq!((f.n_rows(), f.n_cols()), (3, 2));
        assert_eq!(f.header.unwrap(), vec!["x1", "x2"]);
        let g = parse_trajectory_str(Path::new("t.csv"), "1,2\n3,4\n").unwrap();
        assert!(g.header.is_none());
    }

    #[test]
    fn rejects_bad_rows() {
        let err = parse_trajectory_str(Path::new("t.csv"), "1,2\nnan,4\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_trajectory_str(Path::new("t.csv"), "1,2\n3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_trajectory_str(Path::new("t.csv"), "1,2\n3,abc\n").unwrap_err();
        assert!(err.to_string().contains("abc"));
        assert!(parse_trajectory_str(Path::new("t.csv"), "1,2\n").is_err());
        let err = parse_trajectory_str(Path::new("t.csv"), "1,2\n3,inf\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn json_uses_seventeen_digits() {
        let s = to_json_string(&vec![0.1f64, 1.0, -2.5e-300]);
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        let back: Vec<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, vec![0.1, 1.0, -2.5e-300]);
    }

    #[test]
    fn argument_parsers() {
        assert_eq!("0.5,-1".parse::<Center>().unwrap(), Center([0.5, -1.0]));
        assert!("1".parse::<Center>().is_err());
        assert_eq!("avoid:auto".parse::<ModeArg>().unwrap(), ModeArg::AutoAvoid);
        assert_eq!(
            "golden:silver".parse::<RhoArg>().unwrap(),
            RhoArg::Value(vec![GOLDEN_MEAN, SQRT2_MINUS_1])
        );
        match "100,1000".parse::<CheckpointsArg>().unwrap() {
            CheckpointsArg::List(s) => assert_eq!(s.checkpoints(), &[100, 1000]),
            other => panic!("{other:?}"),
        }
        match "geometric:2:3:2".parse::<CheckpointsArg>().unwrap() {
            CheckpointsArg::Geometric(s) => assert_eq!(s.checkpoints(), &[100, 316, 1000]),
            other => panic!("{other:?}"),
        }
        assert!("1000,100".parse::<CheckpointsArg>().is_err());
    }

    #[test]
    fn checkpoint_resolution() {
        let geo: CheckpointsArg = "geometric".parse().unwrap();
        assert_eq!(geo.resolve(1000).unwrap().max(), 1000);
        assert!(geo.resolve(50).is_err());
        let list: CheckpointsArg = "100,5000".parse().unwrap();
        assert!(matches!(
            list.resolve(1000),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn params_defaults_and_errors() {
        let s = system_from_params(SystemKind::Conjcircle, "eps=0.1").unwrap();
        assert_eq!(
            s,
            SystemSpec::ConjugatedCircle {
                rho: GOLDEN_MEAN,
                eps: 0.1,
                theta0: 0.0
            }
        );
        let r = system_from_params(SystemKind::Rotation, "rho=golden:silver").unwrap();
        assert_eq!(r.domain_dim(), 2);
        assert!(system_from_params(SystemKind::Rotation, "eps=1").is_err());
        assert!(system_from_params(SystemKind::Conjcircle, "eps=0.5").is_err());
        assert!(system_from_params(SystemKind::Rotation, "rho").is_err());
    }
}
