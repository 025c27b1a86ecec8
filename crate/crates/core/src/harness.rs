//! Convergence studies: error against averaging length, fitted orders,
//! weighted against unweighted averages, and integration of periodic
//! functions along rotation orbits.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::averaging::{average_schedule, weighted_average, CheckpointSchedule, ObservableTrace};
use crate::error::{Error, Result};
use crate::systems::{iterate, SystemSpec};
use crate::weights::WeightSpec;

/// Number of trailing checkpoints used to estimate the error plateau.
const FLOOR_TAIL: usize = 3;
/// A plateau is only accepted below this multiple of `max(1, |truth|)`.
const FLOOR_CEILING: f64 = 1e-10;
const MIN_FIT_POINTS: usize = 4;

/// Scalar function of a system state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observable {
    /// `cos 2π x₀`.
    Cos,
    /// `Π_j exp(cos 2π x_j)`.
    ExpCos,
    /// The raw coordinate `x_j`.
    Coordinate(usize),
    Constant(f64),
}

impl Observable {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            Observable::Cos => (TAU * x[0]).cos(),
            Observable::ExpCos => x.iter().map(|&t| (TAU * t).cos().exp()).product(),
            Observable::Coordinate(j) => x[j],
            Observable::Constant(c) => c,
        }
    }

    /// Spatial mean over the uniform measure on `[0, 1)^d`, when known.
    pub fn torus_mean(&self, d: usize) -> Option<Truth> {
        match *self {
            Observable::Cos => Some(Truth::closed_form(0.0)),
            Observable::ExpCos => Some(Truth::oracle(bessel_i0(1.0).powi(d as i32))),
            Observable::Coordinate(j) if j < d => Some(Truth::closed_form(0.5)),
            Observable::Coordinate(_) => None,
            Observable::Constant(c) => Some(Truth::closed_form(c)),
        }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if let Observable::Coordinate(j) = *self {
            if j >= dim {
                return Err(Error::invalid(
                    "observable",
                    format!("coordinate {j} out of range for dimension {dim}"),
                ));
            }
        }
        Ok(())
    }

    /// Apply to every row of a trace.
    pub fn sample(&self, trace: &ObservableTrace) -> Result<ObservableTrace> {
        self.check_dim(trace.dim())?;
        trace.map(1, |x, out| out[0] = self.eval(x))
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::Cos => f.write_str("cos"),
            Observable::ExpCos => f.write_str("expcos"),
            Observable::Coordinate(j) => write!(f, "coord:{j}"),
            Observable::Constant(c) => write!(f, "const:{c}"),
        }
    }
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::invalid(
                "observable",
                format!("unknown observable `{s}` (expected cos, expcos, coord:<j> or const:<c>)"),
            )
        };
        match s {
            "cos" => Ok(Observable::Cos),
            "expcos" => Ok(Observable::ExpCos),
            _ => {
                if let Some(j) = s.strip_prefix("coord:") {
                    j.parse().map(Observable::Coordinate).map_err(|_| bad())
                } else if let Some(c) = s.strip_prefix("const:") {
                    match c.parse::<f64>() {
                        Ok(c) if c.is_finite() => Ok(Observable::Constant(c)),
                        _ => Err(bad()),
                    }
                } else {
                    Err(bad())
                }
            }
        }
    }
}

impl Serialize for Observable {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Where a reference value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    /// Computed by an independent numerical method (series, quadrature).
    Oracle,
    UserSupplied,
}

/// Reference value for an average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Truth {
    pub value: f64,
    pub provenance: Provenance,
}

impl Truth {
    pub fn closed_form(value: f64) -> Self {
        Self {
            value,
            provenance: Provenance::ClosedForm,
        }
    }

    pub fn oracle(value: f64) -> Self {
        Self {
            value,
            provenance: Provenance::Oracle,
        }
    }

    pub fn user(value: f64) -> Self {
        Self {
            value,
            provenance: Provenance::UserSupplied,
        }
    }

    fn scale(&self) -> f64 {
        self.value.abs().max(1.0)
    }
}

/// `I₀(x) = Σ (x²/4)^k / (k!)²`.
pub fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > f64::EPSILON * 1e-3 * sum {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

/// One estimate in a convergence study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub weight: WeightSpec,
    #[serde(rename = "N")]
    pub n: usize,
    pub estimate: f64,
    pub error: f64,
}

/// Log-log fit of error against `N` for one weight.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderFit {
    pub weight: WeightSpec,
    /// Least-squares slope of `log error` against `log N` over the pre-floor
    /// points; `None` when fewer than two such points exist.
    pub slope: Option<f64>,
    pub points_used: usize,
    /// Error plateau, if one was detected.
    pub floor: Option<f64>,
    pub floor_dominated: bool,
    pub fit_unreliable: bool,
    pub min_error: f64,
}

/// Errors and fitted orders for a set of weights on one observable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub study: String,
    pub observable: String,
    pub truth: Truth,
    pub rows: Vec<ConvergenceRow>,
    pub fits: Vec<OrderFit>,
}

impl ConvergenceReport {
    pub fn fit(&self, weight: WeightSpec) -> Option<&OrderFit> {
        self.fits.iter().find(|f| f.weight == weight)
    }

    pub fn errors(&self, weight: WeightSpec) -> Vec<(usize, f64)> {
        self.rows
            .iter()
            .filter(|r| r.weight == weight)
            .map(|r| (r.n, r.error))
            .collect()
    }

    /// Flat `N,weight,error` table.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,weight,error\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{:.16e}\n", r.n, r.weight, r.error));
        }
        out
    }
}

/// Fit an order to `(N, error)` pairs, excluding an error plateau.
///
/// The error has stalled when neither of the last two checkpoints improves on
/// the running minimum by a factor of two. The plateau is then the median of
/// the last three errors, accepted only under `1e-10 · scale` so that slowly
/// oscillating errors are not mistaken for a floor. The slope is then fitted on the
/// leading run of points whose error exceeds ten times the plateau.
pub fn fit_order(weight: WeightSpec, points: &[(usize, f64)], scale: f64) -> OrderFit {
    let errors: Vec<f64> = points.iter().map(|p| p.1).collect();
    let min_error = errors.iter().copied().fold(f64::INFINITY, f64::min);
    let floor = if errors.len() > FLOOR_TAIL {
        let n = errors.len();
        let running_min = |end: usize| errors[..end].iter().copied().fold(f64::INFINITY, f64::min);
        let stalled = (n - 2..n).all(|i| errors[i] > 0.5 * running_min(i));
        let mut tail = errors[n - FLOOR_TAIL..].to_vec();
        tail.sort_by(f64::total_cmp);
        let med = tail[FLOOR_TAIL / 2];
        (stalled && med <= FLOOR_CEILING * scale).then_some(med)
    } else {
        None
    };
    let cut = floor.map_or(0.0, |f| 10.0 * f);
    let used = points.iter().take_while(|p| p.1 > cut).count();
    let slope = (used >= 2).then(|| {
        let xs: Vec<f64> = points[..used].iter().map(|p| (p.0 as f64).ln()).collect();
        let ys: Vec<f64> = points[..used].iter().map(|p| p.1.ln()).collect();
        let n = used as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        sxy / sxx
    });
    OrderFit {
        weight,
        slope,
        points_used: used,
        floor,
        floor_dominated: floor.is_some() && used < MIN_FIT_POINTS,
        fit_unreliable: used < MIN_FIT_POINTS,
        min_error,
    }
}

/// Convergence study on a precomputed scalar sample sequence.
pub fn study_trace(
    study: &str,
    observable: &str,
    samples: &ObservableTrace,
    truth: Truth,
    specs: &[WeightSpec],
    schedule: &CheckpointSchedule,
) -> Result<ConvergenceReport> {
    if samples.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: samples.dim(),
        });
    }
    if specs.is_empty() {
        return Err(Error::invalid("weight", "at least one weight is required"));
    }
    if !truth.value.is_finite() {
        return Err(Error::invalid("truth", "must be finite"));
    }
    let per_spec = specs
        .par_iter()
        .map(|&spec| {
            let res = average_schedule(samples, spec, schedule)?;
            let rows: Vec<ConvergenceRow> = res
                .estimates
                .into_iter()
                .map(|e| ConvergenceRow {
                    weight: spec,
                    n: e.n,
                    estimate: e.value[0],
                    error: (e.value[0] - truth.value).abs(),
                })
                .collect();
            let pts: Vec<(usize, f64)> = rows.iter().map(|r| (r.n, r.error)).collect();
            let fit = fit_order(spec, &pts, truth.scale());
            Ok((rows, fit))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for (r, f) in per_spec {
        rows.extend(r);
        fits.push(f);
    }
    Ok(ConvergenceReport {
        study: study.to_string(),
        observable: observable.to_string(),
        truth,
        rows,
        fits,
    })
}

/// Iterate `system` to the longest checkpoint and study `observable` along
/// the orbit.
pub fn run_convergence_study(
    specs: &[WeightSpec],
    system: &SystemSpec,
    observable: Observable,
    truth: Truth,
    schedule: &CheckpointSchedule,
) -> Result<ConvergenceReport> {
    let trace = iterate(system, schedule.max())?;
    let samples = observable.sample(&trace)?;
    let study = match system {
        SystemSpec::PureRotation { .. } => "rotation",
        SystemSpec::ConjugatedCircle { .. } => "conjcircle",
        SystemSpec::AnalyticEmbedding { .. } => "embed",
        SystemSpec::StandardMap { .. } => "stdmap",
    };
    study_trace(
        study,
        &observable.to_string(),
        &samples,
        truth,
        specs,
        schedule,
    )
}

/// Weighted average of `f` along the rotation orbit of `0` by `rho`.
pub fn integrate_periodic<F>(f: F, rho: &[f64], spec: WeightSpec, n_terms: usize) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let system = SystemSpec::PureRotation {
        rho: rho.to_vec(),
        theta0: vec![0.0; rho.len()],
    };
    let trace = iterate(&system, n_terms)?;
    let samples = trace.map(1, |x, out| out[0] = f(x))?;
    Ok(weighted_average(&samples, spec, n_terms)?[0])
}

/// Uniform against exponential weight at a single length.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedupReport {
    #[serde(rename = "N")]
    pub n: usize,
    pub error_uniform: f64,
    pub error_exponential: f64,
    /// `error_uniform / error_exponential`, each clamped below at
    /// `ε · max(1, |truth|)`.
    pub ratio: f64,
}

pub fn compare_wb_vs_b(
    system: &SystemSpec,
    observable: Observable,
    truth: Truth,
    n: usize,
) -> Result<SpeedupReport> {
    let trace = iterate(system, n)?;
    let samples = observable.sample(&trace)?;
    let err =
        |spec| -> Result<f64> { Ok((weighted_average(&samples, spec, n)?[0] - truth.value).abs()) };
    let error_uniform = err(WeightSpec::Uniform)?;
    let error_exponential = err(WeightSpec::Exponential)?;
    let eps = f64::EPSILON * truth.scale();
    Ok(SpeedupReport {
        n,
        error_uniform,
        error_exponential,
        ratio: error_uniform.max(eps) / error_exponential.max(eps),
    })
}

/// Errors from several random initial phases at one length.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpreadReport {
    #[serde(rename = "N")]
    pub n: usize,
    pub weight: WeightSpec,
    pub phases: Vec<Vec<f64>>,
    pub errors: Vec<f64>,
    pub max_error: f64,
    pub min_error: f64,
}

/// Repeat an average from `n_starts` phases drawn from a seeded generator.
pub fn initial_point_spread(
    system: &SystemSpec,
    observable: Observable,
    truth: Truth,
    spec: WeightSpec,
    n: usize,
    n_starts: usize,
    seed: u64,
) -> Result<SpreadReport> {
    if n_starts == 0 {
        return Err(Error::invalid("starts", "need at least one initial point"));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let phases: Vec<Vec<f64>> = (0..n_starts)
        .map(|_| (0..system.domain_dim()).map(|_| rng.gen::<f64>()).collect())
        .collect();
    let errors = phases
        .par_iter()
        .map(|p| {
            let trace = iterate(&system.with_phase(p), n)?;
            let samples = observable.sample(&trace)?;
            Ok((weighted_average(&samples, spec, n)?[0] - truth.value).abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    let max_error = errors.iter().copied().fold(0.0, f64::max);
    let min_error = errors.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(SpreadReport {
        n,
        weight: spec,
        phases,
        errors,
        max_error,
        min_error,
    })
}
