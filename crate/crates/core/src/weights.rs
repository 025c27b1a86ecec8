//! Bump functions on `[0, 1]` and the normalized weight vectors built from
//! them.
//!
//! All bump kinds are symmetric about `t = 1/2` and vanish at both endpoints;
//! [`WeightSpec::Uniform`] is the flat baseline that turns a weighted average
//! back into a plain time average.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::compensated::NeumaierSum;
use crate::error::{Error, Result};

/// Below this exponent `exp` returns a subnormal or zero; the exponential
/// bump is clamped to exact zero there.
const EXP_UNDERFLOW: f64 = -708.396_418_532_264_1; // ln(f64::MIN_POSITIVE)

/// Weighting function used in a weighted time average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WeightSpec {
    /// `exp(1 / (t (t - 1)))` on `(0, 1)`; every derivative vanishes at the
    /// endpoints.
    Exponential,
    /// `sin²(π t)`, continuously differentiable once at the endpoints.
    SinSquared,
    /// `t (1 - t)`, merely continuous at the endpoints.
    Quadratic,
    /// Constant 1: the unweighted time average.
    Uniform,
}

impl WeightSpec {
    pub const ALL: [WeightSpec; 4] = [
        WeightSpec::Exponential,
        WeightSpec::SinSquared,
        WeightSpec::Quadratic,
        WeightSpec::Uniform,
    ];

    /// Short CLI name.
    pub fn name(self) -> &'static str {
        match self {
            WeightSpec::Exponential => "exp",
            WeightSpec::SinSquared => "sin2",
            WeightSpec::Quadratic => "quad",
            WeightSpec::Uniform => "uniform",
        }
    }

    pub fn is_bump(self) -> bool {
        self != WeightSpec::Uniform
    }

    /// Evaluate the weight at `t`. Total on finite input; bumps are exactly
    /// zero outside `(0, 1)`.
    pub fn eval(self, t: f64) -> f64 {
        match self {
            WeightSpec::Uniform => {
                if (0.0..1.0).contains(&t) {
                    1.0
                } else {
                    0.0
                }
            }
            _ => {
                if !(t > 0.0 && t < 1.0) {
                    return 0.0;
                }
                // fold onto [0, 1/2]; 1 - t is exact for t >= 1/2
                let u = if t > 0.5 { 1.0 - t } else { t };
                self.eval_folded(u)
            }
        }
    }

    /// Bump evaluated at `u ∈ (0, 1/2]`.
    fn eval_folded(self, u: f64) -> f64 {
        match self {
            WeightSpec::Exponential => {
                let exponent = -1.0 / (u * (1.0 - u));
                if exponent < EXP_UNDERFLOW {
                    0.0
                } else {
                    exponent.exp()
                }
            }
            WeightSpec::SinSquared => {
                let s = (PI * u).sin();
                s * s
            }
            WeightSpec::Quadratic => u * (1.0 - u),
            WeightSpec::Uniform => 1.0,
        }
    }
}

impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WeightSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        WeightSpec::ALL
            .into_iter()
            .find(|w| w.name() == s)
            .ok_or_else(|| {
                Error::invalid(
                    "weight",
                    format!("unknown weight `{s}` (expected one of: exp, sin2, quad, uniform)"),
                )
            })
    }
}

impl Serialize for WeightSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

/// Free-function form of [`WeightSpec::eval`].
pub fn eval_weight(spec: WeightSpec, t: f64) -> f64 {
    spec.eval(t)
}

/// Weights `w(n/N)` for `n = 0..N` together with their compensated total.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    spec: WeightSpec,
    values: Vec<f64>,
    total: f64,
}

impl WeightVector {
    pub fn spec(&self) -> WeightSpec {
        self.spec
    }

    pub fn n_terms(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `A_N`, the compensated sum of the weights.
    pub fn total(&self) -> f64 {
        self.total
    }
}

/// Build the weight vector for a trajectory of `n_terms` samples.
///
/// For the symmetric bumps the argument is folded on the integer index,
/// `t = min(n, N - n) / N`, so that `values[n] == values[N - n]` holds
/// exactly and reversal of the interior samples leaves an average unchanged.
pub fn build_weights(spec: WeightSpec, n_terms: usize) -> Result<WeightVector> {
    if n_terms < 2 {
        return Err(Error::invalid(
            "n_terms",
            format!("weight vector needs at least 2 terms, got {n_terms}"),
        ));
    }
    let nf = n_terms as f64;
    let values: Vec<f64> = (0..n_terms)
        .map(|n| {
            if spec.is_bump() {
                let m = n.min(n_terms - n);
                spec.eval(m as f64 / nf)
            } else {
                spec.eval(n as f64 / nf)
            }
        })
        .collect();
    let total = values.iter().sum::<NeumaierSum>().value();
    Ok(WeightVector {
        spec,
        values,
        total,
    })
}
