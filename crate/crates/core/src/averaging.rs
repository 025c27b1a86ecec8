//! Weighted and plain time averages over stored observable sequences.
//!
//! A weighted average at length `N` is
//! `(1 / A_N) Σ_{n<N} w(n/N) f_n` with `A_N = Σ_{n<N} w(n/N)`. Since the
//! weights depend on `N`, every checkpoint is an independent pass over the
//! stored trace; nothing is carried between checkpoints.

use rayon::prelude::*;
use serde::Serialize;

use crate::compensated::NeumaierSum;
use crate::error::{Error, Result};
use crate::weights::{build_weights, WeightSpec, WeightVector};

/// Samples `f(Tⁿ x₀)` of a vector-valued observable, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableTrace {
    dim: usize,
    data: Vec<f64>,
}

impl ObservableTrace {
    /// Build from row-major `data` with `dim` values per sample.
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid(
                "dim",
                "observable dimension must be at least 1",
            ));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: data.len() % dim,
            });
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index: pos / dim });
        }
        let len = data.len() / dim;
        if len < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                available: len,
            });
        }
        Ok(Self { dim, data })
    }

    pub fn from_scalars(values: Vec<f64>) -> Result<Self> {
        Self::new(1, values)
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.data[n * self.dim..(n + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Apply `f` to every sample, producing a new trace of dimension `dim`.
    pub fn map<F>(&self, dim: usize, f: F) -> Result<Self>
    where
        F: Fn(&[f64], &mut [f64]),
    {
        let mut data = vec![0.0; self.len() * dim];
        for (src, dst) in self.rows().zip(data.chunks_exact_mut(dim)) {
            f(src, dst);
        }
        Self::new(dim, data)
    }
}

/// Strictly increasing list of averaging lengths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct CheckpointSchedule(Vec<usize>);

impl CheckpointSchedule {
    pub fn new(checkpoints: Vec<usize>) -> Result<Self> {
        if checkpoints.is_empty() {
            return Err(Error::invalid("checkpoints", "schedule is empty"));
        }
        if let Some(&n) = checkpoints.iter().find(|&&n| n < 2) {
            return Err(Error::invalid(
                "checkpoints",
                format!("checkpoint {n} is below the minimum of 2"),
            ));
        }
        if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(
                "checkpoints",
                "checkpoints must be strictly increasing",
            ));
        }
        Ok(Self(checkpoints))
    }

    pub fn single(n: usize) -> Result<Self> {
        Self::new(vec![n])
    }

    /// `round(10^(lo + j / per_decade))` for `j = 0..=(hi - lo) * per_decade`,
    /// with duplicates from rounding removed.
    pub fn geometric(lo_exp: u32, hi_exp: u32, per_decade: u32) -> Result<Self> {
        if hi_exp < lo_exp || per_decade == 0 {
            return Err(Error::invalid(
                "checkpoints",
                "geometric schedule needs lo <= hi and at least one point per decade",
            ));
        }
        let steps = (hi_exp - lo_exp) * per_decade;
        let mut out: Vec<usize> = Vec::with_capacity(steps as usize + 1);
        for j in 0..=steps {
            let e = lo_exp as f64 + j as f64 / per_decade as f64;
            let n = 10f64.powf(e).round() as usize;
            if out.last().is_none_or(|&last| n > last) {
                out.push(n);
            }
        }
        Self::new(out)
    }

    /// The default study schedule: 13 points from 10² to 10⁵, four per decade.
    pub fn default_geometric() -> Self {
        Self::geometric(2, 5, 4).expect("static schedule is valid")
    }

    /// Drop checkpoints above `max`.
    pub fn truncated(&self, max: usize) -> Result<Self> {
        Self::new(self.0.iter().copied().filter(|&n| n <= max).collect())
    }

    pub fn checkpoints(&self) -> &[usize] {
        &self.0
    }

    pub fn max(&self) -> usize {
        *self.0.last().expect("schedule is non-empty")
    }
}

/// One checkpoint of an [`AverageResult`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckpointEstimate {
    pub n: usize,
    pub value: Vec<f64>,
}

/// Estimates at every checkpoint of a schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AverageResult {
    pub weight: WeightSpec,
    pub estimates: Vec<CheckpointEstimate>,
}

/// Weighted average of the first `weights.n_terms()` samples using a
/// prebuilt weight vector.
pub fn weighted_average_with(trace: &ObservableTrace, weights: &WeightVector) -> Result<Vec<f64>> {
    let n_terms = weights.n_terms();
    if n_terms > trace.len() {
        return Err(Error::InsufficientData {
            needed: n_terms,
            available: trace.len(),
        });
    }
    let mut acc = vec![NeumaierSum::new(); trace.dim()];
    for (&w, row) in weights.values().iter().zip(trace.rows()) {
        if w == 0.0 {
            continue;
        }
        for (a, &x) in acc.iter_mut().zip(row) {
            a.add(w * x);
        }
    }
    let total = weights.total();
    Ok(acc.iter().map(|a| a.value() / total).collect())
}

/// `(1/A_N) Σ w(n/N) f_n` over the first `n_terms` samples, accumulated per
/// coordinate with compensated summation. With [`WeightSpec::Uniform`] this
/// is the plain Birkhoff average.
pub fn weighted_average(
    trace: &ObservableTrace,
    spec: WeightSpec,
    n_terms: usize,
) -> Result<Vec<f64>> {
    if n_terms > trace.len() {
        return Err(Error::InsufficientData {
            needed: n_terms,
            available: trace.len(),
        });
    }
    let weights = build_weights(spec, n_terms)?;
    weighted_average_with(trace, &weights)
}

/// Weighted averages at every checkpoint; each one is an independent pass
/// and checkpoints are evaluated in parallel.
pub fn average_schedule(
    trace: &ObservableTrace,
    spec: WeightSpec,
    schedule: &CheckpointSchedule,
) -> Result<AverageResult> {
    if schedule.max() > trace.len() {
        return Err(Error::InsufficientData {
            needed: schedule.max(),
            available: trace.len(),
        });
    }
    let estimates = schedule
        .checkpoints()
        .par_iter()
        .map(|&n| weighted_average(trace, spec, n).map(|value| CheckpointEstimate { n, value }))
        .collect::<Result<Vec<_>>>()?;
    Ok(AverageResult {
        weight: spec,
        estimates,
    })
}
