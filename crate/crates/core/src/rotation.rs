//! Rotation numbers from trajectories.
//!
//! A trajectory is reduced to a sequence of torus angles (for planar curves,
//! by projecting onto the circle around a center point), the angle steps are
//! unwrapped into real increments `Δφ_n`, and the weighted average of the
//! increments gives a lift of the rotation vector.
//!
//! For `d ≥ 2` the caller's angle coordinates are assumed to already have the
//! identity homology matrix; only the `d = 1` winding sign is checked here.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::averaging::{average_schedule, weighted_average, CheckpointSchedule, ObservableTrace};
use crate::compensated::{frac, two_sum};
use crate::error::{Error, Result};
use crate::weights::WeightSpec;

/// Steps within this distance of ±1/2 are flagged as ambiguous.
const ANTIPODAL_MARGIN: f64 = 1e-9;
/// Histogram resolution for automatic avoided-angle selection.
const GAP_BINS: usize = 100;

/// A point on the `d`-torus with coordinates in `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct AngleVector(Vec<f64>);

impl AngleVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid(
                "angle",
                "angle vector must have at least one coordinate",
            ));
        }
        if let Some(&bad) = coords.iter().find(|&&c| !(0.0..1.0).contains(&c)) {
            return Err(Error::invalid(
                "angle",
                format!("coordinate {bad} not in [0, 1)"),
            ));
        }
        Ok(Self(coords))
    }

    /// Reduce arbitrary finite coordinates mod 1.
    pub fn wrapped(coords: &[f64]) -> Result<Self> {
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite { index: i });
        }
        Self::new(coords.iter().map(|&c| frac(c)).collect())
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Angle of `x − center` in turns, in `[0, 1)`.
pub fn angle_projection(x: [f64; 2], center: [f64; 2]) -> Result<AngleVector> {
    let dx = x[0] - center[0];
    let dy = x[1] - center[1];
    let distance = dx.hypot(dy);
    if distance.is_nan() || distance < 1e-300 {
        return Err(Error::DegenerateProjection { distance });
    }
    Ok(AngleVector(vec![frac(dy.atan2(dx) / TAU)]))
}

/// How an angle step `φ_{n+1} − φ_n` is lifted to a real increment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UnwrapMode {
    /// Representative in `[0, 1)`.
    PositiveArc,
    /// Representative in `[−1/2, 1/2)`.
    ShortestArc,
    /// Representative in `[θ₀, θ₀ + 1)`: the arc that avoids angle `θ₀`.
    AvoidAngle(f64),
}

impl UnwrapMode {
    pub fn lift_step(self, raw: f64) -> f64 {
        match self {
            UnwrapMode::PositiveArc => frac(raw),
            UnwrapMode::ShortestArc => frac(raw + 0.5) - 0.5,
            UnwrapMode::AvoidAngle(theta0) => frac(raw - theta0) + theta0,
        }
    }
}

impl fmt::Display for UnwrapMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UnwrapMode::PositiveArc => f.write_str("positive"),
            UnwrapMode::ShortestArc => f.write_str("shortest"),
            UnwrapMode::AvoidAngle(t) => write!(f, "avoid:{t}"),
        }
    }
}

impl Serialize for UnwrapMode {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl FromStr for UnwrapMode {
    type Err = Error;

    /// `positive`, `shortest` or `avoid:<θ₀>`. (`avoid:auto` is resolved by
    /// the caller with [`auto_avoid_angle`].)
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "positive" => Ok(UnwrapMode::PositiveArc),
            "shortest" => Ok(UnwrapMode::ShortestArc),
            _ => {
                let theta0 = s
                    .strip_prefix("avoid:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        Error::invalid(
                            "mode",
                            format!("`{s}` is not one of positive, shortest, avoid:<theta0>, avoid:auto"),
                        )
                    })?;
                Ok(UnwrapMode::AvoidAngle(theta0))
            }
        }
    }
}

/// Real increment from `from` to `to`, coordinate-wise, per `mode`.
pub fn unwrap_delta(from: &AngleVector, to: &AngleVector, mode: UnwrapMode) -> Vec<f64> {
    debug_assert_eq!(from.dim(), to.dim());
    from.0
        .iter()
        .zip(&to.0)
        .map(|(&a, &b)| mode.lift_step(b - a))
        .collect()
}

/// Pick an avoided angle as the midpoint of the widest empty run (cyclic)
/// in a 100-bin histogram of the raw steps `(φ_{n+1} − φ_n) mod 1`, pooled
/// over coordinates. The result is returned in `[−1/2, 1/2]`. `None` when
/// every bin is occupied.
pub fn auto_avoid_angle(angles: &[AngleVector]) -> Option<f64> {
    let mut occupied = [false; GAP_BINS];
    for pair in angles.windows(2) {
        for (&a, &b) in pair[0].0.iter().zip(&pair[1].0) {
            let bin = ((frac(b - a) * GAP_BINS as f64) as usize).min(GAP_BINS - 1);
            occupied[bin] = true;
        }
    }
    let start = occupied.iter().position(|&o| o)?;
    // walk once around the circle starting at an occupied bin
    let (mut best_len, mut best_start) = (0usize, 0usize);
    let mut run = 0usize;
    for i in 1..=GAP_BINS {
        let bin = (start + i) % GAP_BINS;
        if occupied[bin] {
            if run > best_len {
                best_len = run;
                best_start = (bin + GAP_BINS - run) % GAP_BINS;
            }
            run = 0;
        } else {
            run += 1;
        }
    }
    if best_len == 0 {
        return None;
    }
    let mid = (best_start as f64 + best_len as f64 / 2.0) / GAP_BINS as f64;
    let mid = frac(mid);
    Some(if mid > 0.5 { mid - 1.0 } else { mid })
}

/// Angles with their lift and unwrapped increments.
///
/// The lift of coordinate `j` at step `n` is stored as an integer turn count
/// plus the base angle, so `lift mod 1 == base` holds exactly no matter how
/// many turns have accumulated.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedTrace {
    dim: usize,
    base: Vec<f64>,
    turns: Vec<i64>,
    deltas: Vec<f64>,
    mode: UnwrapMode,
    ambiguous_steps: usize,
}

impl LiftedTrace {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of angles (one more than the number of increments).
    pub fn len(&self) -> usize {
        self.base.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn mode(&self) -> UnwrapMode {
        self.mode
    }

    pub fn base(&self, n: usize) -> &[f64] {
        &self.base[n * self.dim..(n + 1) * self.dim]
    }

    pub fn turns(&self, n: usize) -> &[i64] {
        &self.turns[n * self.dim..(n + 1) * self.dim]
    }

    pub fn delta(&self, n: usize) -> &[f64] {
        &self.deltas[n * self.dim..(n + 1) * self.dim]
    }

    /// Lifted angle `φ̄_n` rounded to binary64.
    pub fn lift(&self, n: usize) -> Vec<f64> {
        self.turns(n)
            .iter()
            .zip(self.base(n))
            .map(|(&k, &b)| k as f64 + b)
            .collect()
    }

    /// Steps where the shortest-arc choice was within 1e-9 of ±1/2.
    pub fn ambiguous_steps(&self) -> usize {
        self.ambiguous_steps
    }

    /// Largest `|φ̄_{n+1} − φ̄_n − Δφ_n|` over the trace, evaluated from the
    /// split representation so it is independent of the lift's magnitude.
    pub fn max_recurrence_residual(&self) -> f64 {
        let d = self.dim;
        (0..self.len() - 1)
            .flat_map(|n| (0..d).map(move |j| (n, j)))
            .map(|(n, j)| {
                let i = n * d + j;
                let dk = (self.turns[i + d] - self.turns[i]) as f64;
                let db = self.base[i + d] - self.base[i];
                (dk + db - self.deltas[i]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Largest distance between `φ̄_n mod 1` and `φ_n`, with `φ̄_n` reduced
    /// in double-double arithmetic.
    pub fn max_lift_residual(&self) -> f64 {
        self.turns
            .iter()
            .zip(&self.base)
            .map(|(&k, &b)| {
                let (hi, lo) = two_sum(k as f64, b);
                let r = (frac(frac(hi) + lo) - b).abs();
                r.min(1.0 - r)
            })
            .fold(0.0, f64::max)
    }

    /// The increments as an observable trace (`len() − 1` samples).
    pub fn deltas_trace(&self) -> Result<ObservableTrace> {
        ObservableTrace::new(self.dim, self.deltas.clone())
    }
}

/// Lift an angle sequence: `φ̄₀ = φ₀ ∈ [0,1)^d`, `φ̄_{n+1} = φ̄_n + Δφ_n`.
pub fn build_lift(angles: &[AngleVector], mode: UnwrapMode) -> Result<LiftedTrace> {
    if angles.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            available: angles.len(),
        });
    }
    let dim = angles[0].dim();
    if let Some(bad) = angles.iter().find(|a| a.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: bad.dim(),
        });
    }
    let mut base = Vec::with_capacity(angles.len() * dim);
    let mut turns = Vec::with_capacity(angles.len() * dim);
    let mut deltas = Vec::with_capacity((angles.len() - 1) * dim);
    let mut ambiguous_steps = 0;
    base.extend_from_slice(angles[0].coords());
    turns.extend(std::iter::repeat_n(0i64, dim));
    for (n, pair) in angles.windows(2).enumerate() {
        let (from, to) = (&pair[0], &pair[1]);
        let mut ambiguous = false;
        for j in 0..dim {
            let raw = to.0[j] - from.0[j];
            let delta = mode.lift_step(raw);
            if mode == UnwrapMode::ShortestArc && delta.abs() >= 0.5 - ANTIPODAL_MARGIN {
                ambiguous = true;
            }
            let k = (delta - raw).round() as i64;
            turns.push(turns[n * dim + j] + k);
            deltas.push(delta);
        }
        base.extend_from_slice(to.coords());
        if ambiguous {
            ambiguous_steps += 1;
        }
    }
    Ok(LiftedTrace {
        dim,
        base,
        turns,
        deltas,
        mode,
        ambiguous_steps,
    })
}

/// Project planar points onto angles around `center`.
pub fn project_trace(trace: &ObservableTrace, center: [f64; 2]) -> Result<Vec<AngleVector>> {
    if trace.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: trace.dim(),
        });
    }
    trace
        .rows()
        .map(|r| angle_projection([r[0], r[1]], center))
        .collect()
}

/// Interpret each row of `trace` as torus angles (reduced mod 1).
pub fn angles_from_trace(trace: &ObservableTrace) -> Result<Vec<AngleVector>> {
    trace.rows().map(AngleVector::wrapped).collect()
}

/// Winding sign of a projected planar curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Winding {
    /// `+1`/`−1`: the angle advances on average in the positive/negative
    /// direction under shortest-arc unwrapping, as for a center enclosed by
    /// the curve.
    Degree(i32),
    /// Mean step too small to tell a center outside the curve (zero mean
    /// step) from a tiny rotation number.
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindingReport {
    pub winding: Winding,
    /// `φ̄_{n−1} − φ̄_0` under shortest-arc unwrapping.
    pub net_turns: f64,
    /// Weighted mean step, the same quantity [`rotation_number`] reports.
    pub mean_step: f64,
    pub n_check: usize,
}

/// Check that a one-dimensional angle sequence winds around the projection
/// center, using its first `n_check` angles.
pub fn winding_check(angles: &[AngleVector], n_check: usize) -> Result<WindingReport> {
    if n_check > angles.len() {
        return Err(Error::InsufficientData {
            needed: n_check,
            available: angles.len(),
        });
    }
    if n_check < 3 {
        return Err(Error::invalid("n_check", "need at least 3 angles"));
    }
    if angles[0].dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: angles[0].dim(),
        });
    }
    let lift = build_lift(&angles[..n_check], UnwrapMode::ShortestArc)?;
    let mean_step =
        weighted_average(&lift.deltas_trace()?, WeightSpec::Exponential, n_check - 1)?[0];
    let first = lift.lift(0)[0];
    let last = lift.lift(n_check - 1)[0];
    let winding = if mean_step.abs() < 10.0 / n_check as f64 {
        Winding::Indeterminate
    } else {
        Winding::Degree(mean_step.signum() as i32)
    };
    Ok(WindingReport {
        winding,
        net_turns: last - first,
        mean_step,
        n_check,
    })
}

/// Rotation-vector estimate at one averaging length.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RotationEstimate {
    /// Lift `ρ̄` (weighted mean increment).
    pub rho_lift: Vec<f64>,
    /// `ρ̄ mod 1`.
    pub rho: AngleVector,
    pub n_used: usize,
    pub weight: WeightSpec,
}

impl RotationEstimate {
    /// `1 − ρ` per coordinate: the other legitimate representative when the
    /// curve orientation is unknown.
    pub fn complement(&self) -> Vec<f64> {
        self.rho.coords().iter().map(|&r| frac(1.0 - r)).collect()
    }
}

/// Weighted mean of the increments at every checkpoint.
pub fn rotation_number(
    trace: &LiftedTrace,
    spec: WeightSpec,
    schedule: &CheckpointSchedule,
) -> Result<Vec<RotationEstimate>> {
    let deltas = trace.deltas_trace()?;
    let res = average_schedule(&deltas, spec, schedule)?;
    res.estimates
        .into_iter()
        .map(|e| {
            Ok(RotationEstimate {
                rho: AngleVector::wrapped(&e.value)?,
                rho_lift: e.value,
                n_used: e.n,
                weight: spec,
            })
        })
        .collect()
}

/// Distance between two angles on the circle.
pub fn circle_distance(a: f64, b: f64) -> f64 {
    let r = frac(a - b);
    r.min(1.0 - r)
}
