//! Built-in quasiperiodic test systems and Diophantine utilities.
//!
//! Every system is driven by an underlying rotation `θ ↦ θ + ρ mod 1`
//! advanced with a [`TurnAccumulator`], so orbit phases stay accurate to a
//! few ulp even after millions of steps. Note that every binary64 `ρ` is
//! rational; orbits only look quasiperiodic for lengths well below the first
//! huge continued-fraction denominator of `ρ`, which
//! [`continued_fraction`] and [`small_denominator_scan`] make inspectable.

use std::f64::consts::TAU;

use serde::Serialize;

use crate::averaging::ObservableTrace;
use crate::compensated::{frac, TurnAccumulator};
use crate::error::{Error, Result};

/// `(√5 − 1) / 2`.
pub const GOLDEN_MEAN: f64 = 0.618_033_988_749_894_9;
/// `√2 − 1`.
pub const SQRT2_MINUS_1: f64 = 0.414_213_562_373_095_03;

const NEWTON_TOL: f64 = 1e-14;
const NEWTON_MAX_ITER: usize = 50;

/// A test system together with its initial condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemSpec {
    /// `θ ↦ θ + ρ` on the `d`-torus; states are angles in `[0, 1)^d`.
    PureRotation { rho: Vec<f64>, theta0: Vec<f64> },
    /// Circle rotation seen through the warp `h(θ) = θ + ε sin 2πθ` and
    /// embedded in the plane as `(cos 2πh, sin 2πh)`.
    ConjugatedCircle { rho: f64, eps: f64, theta0: f64 },
    /// `Σ_{k≥1} r^k (cos 2πkθ, sin 2πkθ)`: a planar curve whose Fourier
    /// coefficients decay exactly like `r^|k|`.
    AnalyticEmbedding { rho: f64, decay: f64, theta0: f64 },
    /// The standard map on the unit torus, `y' = y + (K/2π) sin 2πx`,
    /// `x' = x + y'`. Demonstration only: no closed-form rotation number.
    StandardMap { k: f64, x0: f64, y0: f64 },
}

fn check_rho(name: &str, rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::invalid(
            name,
            format!("rotation number {rho} not in (0, 1)"),
        ));
    }
    Ok(())
}

fn check_finite(name: &str, x: f64) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::invalid(name, "must be finite"));
    }
    Ok(())
}

impl SystemSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            SystemSpec::PureRotation { rho, theta0 } => {
                if rho.is_empty() {
                    return Err(Error::invalid("rho", "rotation vector is empty"));
                }
                if theta0.len() != rho.len() {
                    return Err(Error::DimensionMismatch {
                        expected: rho.len(),
                        found: theta0.len(),
                    });
                }
                for &r in rho {
                    check_rho("rho", r)?;
                }
                for &t in theta0 {
                    check_finite("theta0", t)?;
                }
            }
            SystemSpec::ConjugatedCircle { rho, eps, theta0 } => {
                check_rho("rho", *rho)?;
                check_finite("theta0", *theta0)?;
                if eps.is_nan() || eps.abs() >= 1.0 / TAU {
                    return Err(Error::invalid(
                        "eps",
                        format!("warp amplitude {eps} must satisfy |eps| < 1/(2π)"),
                    ));
                }
            }
            SystemSpec::AnalyticEmbedding { rho, decay, theta0 } => {
                check_rho("rho", *rho)?;
                check_finite("theta0", *theta0)?;
                if !(*decay > 0.0 && *decay < 1.0) {
                    return Err(Error::invalid("r", format!("decay {decay} not in (0, 1)")));
                }
            }
            SystemSpec::StandardMap { k, x0, y0 } => {
                check_finite("k", *k)?;
                check_finite("x0", *x0)?;
                check_finite("y0", *y0)?;
            }
        }
        Ok(())
    }

    /// Dimension of the underlying torus.
    pub fn domain_dim(&self) -> usize {
        match self {
            SystemSpec::PureRotation { rho, .. } => rho.len(),
            SystemSpec::StandardMap { .. } => 2,
            _ => 1,
        }
    }

    /// Number of coordinates per state.
    pub fn embedding_dim(&self) -> usize {
        match self {
            SystemSpec::PureRotation { rho, .. } => rho.len(),
            _ => 2,
        }
    }

    /// The underlying rotation vector, when known in closed form.
    pub fn rotation_vector(&self) -> Option<Vec<f64>> {
        match self {
            SystemSpec::PureRotation { rho, .. } => Some(rho.clone()),
            SystemSpec::ConjugatedCircle { rho, .. }
            | SystemSpec::AnalyticEmbedding { rho, .. } => Some(vec![*rho]),
            SystemSpec::StandardMap { .. } => None,
        }
    }

    /// Same system with a different initial phase (ignored for the standard
    /// map, whose initial condition is a point, not a phase).
    pub fn with_phase(&self, phase: &[f64]) -> Self {
        let mut out = self.clone();
        match &mut out {
            SystemSpec::PureRotation { theta0, .. } => {
                for (t, &p) in theta0.iter_mut().zip(phase) {
                    *t = p;
                }
            }
            SystemSpec::ConjugatedCircle { theta0, .. }
            | SystemSpec::AnalyticEmbedding { theta0, .. } => {
                if let Some(&p) = phase.first() {
                    *theta0 = p;
                }
            }
            SystemSpec::StandardMap { .. } => {}
        }
        out
    }
}

/// Underlying rotation orbit `θ_n = θ₀ + nρ mod 1`, one row per step.
fn rotation_phases(rho: &[f64], theta0: &[f64], n_steps: usize) -> Vec<f64> {
    let d = rho.len();
    let mut accs: Vec<TurnAccumulator> = theta0.iter().map(|&t| TurnAccumulator::new(t)).collect();
    let mut out = Vec::with_capacity(n_steps * d);
    for _ in 0..n_steps {
        for (acc, &r) in accs.iter_mut().zip(rho) {
            out.push(acc.angle());
            acc.advance(r, 0.0);
        }
    }
    out
}

/// Iterate `spec` for `n_steps` states, the first being the initial state.
pub fn iterate(spec: &SystemSpec, n_steps: usize) -> Result<ObservableTrace> {
    spec.validate()?;
    if n_steps < 2 {
        return Err(Error::invalid(
            "steps",
            format!("need at least 2 steps, got {n_steps}"),
        ));
    }
    let data = match spec {
        SystemSpec::PureRotation { rho, theta0 } => rotation_phases(rho, theta0, n_steps),
        SystemSpec::ConjugatedCircle { rho, eps, theta0 } => {
            let circle = ConjugatedCircle::new(*rho, *eps)?;
            rotation_phases(&[*rho], &[*theta0], n_steps)
                .into_iter()
                .flat_map(|th| circle.embed(frac(circle.warp(th))))
                .collect()
        }
        SystemSpec::AnalyticEmbedding { rho, decay, theta0 } => {
            let terms = analytic_terms(*decay);
            rotation_phases(&[*rho], &[*theta0], n_steps)
                .into_iter()
                .flat_map(|th| analytic_point(*decay, terms, th))
                .collect()
        }
        SystemSpec::StandardMap { k, x0, y0 } => {
            let mut state = (frac(*x0), frac(*y0));
            let mut out = Vec::with_capacity(2 * n_steps);
            for _ in 0..n_steps {
                out.push(state.0);
                out.push(state.1);
                state = standard_map_step(*k, state);
            }
            out
        }
    };
    ObservableTrace::new(spec.embedding_dim(), data)
}

/// One step of the standard map in unit-torus coordinates.
pub fn standard_map_step(k: f64, (x, y): (f64, f64)) -> (f64, f64) {
    let y1 = frac(y + k / TAU * (TAU * x).sin());
    let x1 = frac(x + y1);
    (x1, y1)
}

/// Number of harmonics kept in the analytic embedding: all `k` with
/// `r^k >= 1e-17`.
fn analytic_terms(decay: f64) -> usize {
    ((1e-17f64).ln() / decay.ln()).floor() as usize
}

fn analytic_point(decay: f64, terms: usize, theta: f64) -> [f64; 2] {
    let (s1, c1) = (TAU * theta).sin_cos();
    let (mut re, mut im) = (1.0, 0.0);
    let mut amp = 1.0;
    let (mut x, mut y) = (0.0, 0.0);
    for _ in 0..terms {
        let nre = re * c1 - im * s1;
        im = re * s1 + im * c1;
        re = nre;
        amp *= decay;
        x += amp * re;
        y += amp * im;
    }
    [x, y]
}

/// The circle map `T = h ∘ T_ρ ∘ h⁻¹` with `h(θ) = θ + ε sin 2πθ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugatedCircle {
    rho: f64,
    eps: f64,
}

impl ConjugatedCircle {
    pub fn new(rho: f64, eps: f64) -> Result<Self> {
        SystemSpec::ConjugatedCircle {
            rho,
            eps,
            theta0: 0.0,
        }
        .validate()?;
        Ok(Self { rho, eps })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `h(θ)` on the lift: `θ + ε sin 2πθ`.
    pub fn warp(&self, theta: f64) -> f64 {
        theta + self.eps * (TAU * theta).sin()
    }

    /// Solve `h(θ) = x` for the lifted `θ` by Newton's method, falling back
    /// to bisection on the bracket `[x − |ε|, x + |ε|]`.
    pub fn warp_inverse(&self, x: f64) -> Result<f64> {
        let g = |t: f64| self.warp(t) - x;
        let dg = |t: f64| 1.0 + TAU * self.eps * (TAU * t).cos();
        let mut t = x;
        for _ in 0..NEWTON_MAX_ITER {
            let step = g(t) / dg(t);
            t -= step;
            if step.abs() <= NEWTON_TOL {
                return Ok(t);
            }
        }
        // monotone bracket: h(x - |ε|) <= x <= h(x + |ε|)
        let (mut lo, mut hi) = (x - self.eps.abs(), x + self.eps.abs());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= NEWTON_TOL {
                return Ok(0.5 * (lo + hi));
            }
        }
        Err(Error::NoConvergence {
            what: "warp inversion",
            iterations: NEWTON_MAX_ITER + 200,
            residual: g(0.5 * (lo + hi)).abs(),
        })
    }

    /// `T` on circle angles in turns.
    pub fn circle_map(&self, x: f64) -> Result<f64> {
        let theta = self.warp_inverse(x)?;
        Ok(frac(self.warp(theta + self.rho)))
    }

    /// Planar embedding of a circle angle.
    pub fn embed(&self, x: f64) -> [f64; 2] {
        let (s, c) = (TAU * x).sin_cos();
        [c, s]
    }

    /// `T` acting on embedded points of the unit circle.
    pub fn map_point(&self, p: [f64; 2]) -> Result<[f64; 2]> {
        let angle = frac(p[1].atan2(p[0]) / TAU);
        Ok(self.embed(self.circle_map(angle)?))
    }
}

/// Partial quotients and convergents of a number in `(0, 1)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContinuedFraction {
    pub partial_quotients: Vec<u64>,
    /// `(p_j, q_j)` for `j = 1..`, with `p_j / q_j → x`.
    pub convergents: Vec<(u64, u64)>,
}

/// Continued fraction `[0; a_1, a_2, …]` of the binary64 value `x`.
///
/// The expansion is computed exactly by Euclid's algorithm on the dyadic
/// rational `x = m / 2^e`, so it terminates for every input; it also stops
/// early if a quotient or convergent would overflow `u64`.
pub fn continued_fraction(x: f64, n_terms: usize) -> Result<ContinuedFraction> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::invalid("x", format!("{x} not in (0, 1)")));
    }
    if n_terms > 40 {
        return Err(Error::invalid(
            "n_terms",
            "at most 40 terms are meaningful in binary64",
        ));
    }
    const DEN_BITS: i32 = 120;
    // x = mant * 2^exp with mant < 2^53
    let bits = x.to_bits();
    let raw_exp = ((bits >> 52) & 0x7ff) as i32;
    let (mant, exp) = if raw_exp == 0 {
        (bits & ((1 << 52) - 1), -1074)
    } else {
        ((bits & ((1 << 52) - 1)) | (1 << 52), raw_exp - 1075)
    };
    let shift = exp + DEN_BITS;
    let mut out = ContinuedFraction {
        partial_quotients: Vec::new(),
        convergents: Vec::new(),
    };
    if shift < 0 {
        // x < 2^-67: first quotient overflows u64
        return Ok(out);
    }
    let (mut num, mut den): (u128, u128) = ((mant as u128) << shift, 1u128 << DEN_BITS);
    let (mut p_prev, mut p) = (1u64, 0u64);
    let (mut q_prev, mut q) = (0u64, 1u64);
    while out.partial_quotients.len() < n_terms && num != 0 {
        let a = den / num;
        let Ok(a) = u64::try_from(a) else { break };
        let (Some(p_next), Some(q_next)) = (
            a.checked_mul(p).and_then(|v| v.checked_add(p_prev)),
            a.checked_mul(q).and_then(|v| v.checked_add(q_prev)),
        ) else {
            break;
        };
        out.partial_quotients.push(a);
        out.convergents.push((p_next, q_next));
        (p_prev, p) = (p, p_next);
        (q_prev, q) = (q, q_next);
        let r = den % num;
        den = num;
        num = r;
    }
    Ok(out)
}

/// Result of [`small_denominator_scan`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    /// `min dist(k·ρ, ℤ) · ‖k‖∞^(d+β)` over the box.
    pub c_emp: f64,
    pub argmin: Vec<i64>,
    /// `dist(k·ρ, ℤ)` at the minimizer.
    pub distance: f64,
    pub max_norm: u32,
    pub beta: f64,
}

/// Distance from `x` to the nearest integer.
pub fn dist_to_integer(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// Brute-force scan of `dist(k·ρ, ℤ) · ‖k‖∞^(d+β)` over all nonzero `k`
/// with `‖k‖∞ ≤ max_norm`; returns the smallest value and its `k`.
pub fn small_denominator_scan(rho: &[f64], max_norm: u32, beta: f64) -> Result<ScanReport> {
    if rho.is_empty() {
        return Err(Error::invalid("rho", "rotation vector is empty"));
    }
    if max_norm < 1 {
        return Err(Error::invalid("max_norm", "must be at least 1"));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::invalid("beta", "must be a finite value >= 0"));
    }
    let d = rho.len();
    let kmax = max_norm as i64;
    let side = (2 * kmax + 1) as usize;
    let total = side
        .checked_pow(d as u32)
        .ok_or_else(|| Error::invalid("max_norm", "scan box too large"))?;
    let exponent = d as f64 + beta;
    let mut best = ScanReport {
        c_emp: f64::INFINITY,
        argmin: vec![0; d],
        distance: f64::INFINITY,
        max_norm,
        beta,
    };
    let mut k = vec![0i64; d];
    for idx in 0..total {
        let mut rem = idx;
        for kj in k.iter_mut().rev() {
            *kj = (rem % side) as i64 - kmax;
            rem /= side;
        }
        let norm = k.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0);
        if norm == 0 {
            continue;
        }
        let dot = k
            .iter()
            .zip(rho)
            .fold(0.0, |acc, (&kj, &r)| acc + kj as f64 * r);
        let dist = dist_to_integer(dot);
        let c = dist * (norm as f64).powf(exponent);
        if c < best.c_emp {
            best.c_emp = c;
            best.distance = dist;
            best.argmin.clone_from(&k);
        }
    }
    Ok(best)
}
