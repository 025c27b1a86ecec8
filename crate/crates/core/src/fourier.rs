//! Fourier coefficients of a conjugacy estimated from orbit samples.
//!
//! With samples `x_n = h(θ₀ + nρ)`, the weighted average of
//! `x_n e^{−2πi n k·ρ}` converges to `e^{2πi k·θ₀} a_k(h)`. Phases are
//! generated by compensated repeated addition of `frac(k·ρ)` so that they
//! stay accurate for long orbits.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::averaging::ObservableTrace;
use crate::compensated::{frac_dot, NeumaierSum, TurnAccumulator};
use crate::error::{Error, Result};
use crate::weights::{build_weights, WeightSpec, WeightVector};

/// Shells whose magnitude is below `NOISE_FACTOR × max(NOISE_MIN, median of
/// the outermost shell)` are excluded from the decay fit.
const NOISE_FACTOR: f64 = 100.0;
const NOISE_MIN: f64 = 1e-14;
const ANALYTIC_SLOPE: f64 = -0.5;
const NO_DECAY_SLOPE: f64 = -0.05;
/// RMS misfit (natural-log units) still considered a clean exponential.
const ANALYTIC_RESIDUAL: f64 = 0.5;

/// One coefficient `a_k` as a complex vector over the embedding coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierEntry {
    pub k: Vec<i64>,
    pub coeff: Vec<Complex64>,
}

/// Coefficients `a_k` for every `k` with `‖k‖∞ ≤ K`, in lexicographic order
/// of `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierTable {
    dim_domain: usize,
    dim_range: usize,
    max_order: u32,
    rho: Vec<f64>,
    n_used: usize,
    weight: WeightSpec,
    entries: Vec<FourierEntry>,
}

impl FourierTable {
    pub fn dim_domain(&self) -> usize {
        self.dim_domain
    }

    pub fn dim_range(&self) -> usize {
        self.dim_range
    }

    pub fn max_order(&self) -> u32 {
        self.max_order
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn n_used(&self) -> usize {
        self.n_used
    }

    pub fn weight(&self) -> WeightSpec {
        self.weight
    }

    pub fn entries(&self) -> &[FourierEntry] {
        &self.entries
    }

    /// Coefficient vector for `k`, if `‖k‖∞ ≤ K`.
    pub fn get(&self, k: &[i64]) -> Option<&[Complex64]> {
        if k.len() != self.dim_domain {
            return None;
        }
        let kmax = self.max_order as i64;
        let side = 2 * kmax + 1;
        let mut idx = 0i64;
        for &kj in k {
            if kj.abs() > kmax {
                return None;
            }
            idx = idx * side + (kj + kmax);
        }
        Some(&self.entries[idx as usize].coeff)
    }

    /// Largest `‖a_k − conj(a_{−k})‖∞` over the table.
    pub fn conjugate_symmetry_error(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| {
                let neg: Vec<i64> = e.k.iter().map(|v| -v).collect();
                let other = self.get(&neg).expect("box is symmetric");
                e.coeff
                    .iter()
                    .zip(other)
                    .map(|(a, b)| (a - b.conj()).norm())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Serializable form: `{d, D, K, rho, N, entries: [{k, re, im}]}`.
    pub fn to_file(&self) -> FourierTableFile {
        FourierTableFile {
            d: self.dim_domain,
            range_dim: self.dim_range,
            max_order: self.max_order,
            rho: self.rho.clone(),
            n: self.n_used,
            entries: self
                .entries
                .iter()
                .map(|e| FourierEntryFile {
                    k: e.k.clone(),
                    re: e.coeff.iter().map(|c| c.re).collect(),
                    im: e.coeff.iter().map(|c| c.im).collect(),
                })
                .collect(),
        }
    }

    /// Rebuild a table from its file form; `weight` is not stored in the file.
    pub fn from_file(file: &FourierTableFile, weight: WeightSpec) -> Result<Self> {
        let side = 2 * file.max_order as usize + 1;
        let expected = side.pow(file.d as u32);
        if file.entries.len() != expected || file.rho.len() != file.d {
            return Err(Error::invalid(
                "table",
                "entry count does not match d and K",
            ));
        }
        let keys = box_indices(file.d, file.max_order);
        let mut entries = Vec::with_capacity(expected);
        for (e, k) in file.entries.iter().zip(keys) {
            if e.k != k || e.re.len() != file.range_dim || e.im.len() != file.range_dim {
                return Err(Error::invalid(
                    "table",
                    format!("malformed entry for k = {:?}", e.k),
                ));
            }
            entries.push(FourierEntry {
                k,
                coeff: e
                    .re
                    .iter()
                    .zip(&e.im)
                    .map(|(&r, &i)| Complex64::new(r, i))
                    .collect(),
            });
        }
        Ok(Self {
            dim_domain: file.d,
            dim_range: file.range_dim,
            max_order: file.max_order,
            rho: file.rho.clone(),
            n_used: file.n,
            weight,
            entries,
        })
    }
}

/// On-disk layout of a [`FourierTable`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierTableFile {
    pub d: usize,
    #[serde(rename = "D")]
    pub range_dim: usize,
    #[serde(rename = "K")]
    pub max_order: u32,
    pub rho: Vec<f64>,
    #[serde(rename = "N")]
    pub n: usize,
    pub entries: Vec<FourierEntryFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierEntryFile {
    pub k: Vec<i64>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

/// All `k ∈ ℤ^d` with `‖k‖∞ ≤ K`, lexicographic.
fn box_indices(d: usize, max_order: u32) -> Vec<Vec<i64>> {
    let kmax = max_order as i64;
    let side = (2 * kmax + 1) as usize;
    let total = side.pow(d as u32);
    (0..total)
        .map(|mut idx| {
            let mut k = vec![0i64; d];
            for kj in k.iter_mut().rev() {
                *kj = (idx % side) as i64 - kmax;
                idx /= side;
            }
            k
        })
        .collect()
}

fn check_inputs(samples: &ObservableTrace, rho: &[f64], n_terms: usize) -> Result<()> {
    if rho.is_empty() || rho.iter().any(|r| !r.is_finite()) {
        return Err(Error::invalid(
            "rho",
            "rotation vector must be non-empty and finite",
        ));
    }
    if n_terms > samples.len() {
        return Err(Error::InsufficientData {
            needed: n_terms,
            available: samples.len(),
        });
    }
    Ok(())
}

fn coefficient_with(
    samples: &ObservableTrace,
    rho: &[f64],
    k: &[i64],
    weights: &WeightVector,
) -> Vec<Complex64> {
    let dim = samples.dim();
    let step = frac_dot(k, rho);
    let mut phase = TurnAccumulator::new(0.0);
    let mut re = vec![NeumaierSum::new(); dim];
    let mut im = vec![NeumaierSum::new(); dim];
    for (&w, row) in weights.values().iter().zip(samples.rows()) {
        if w != 0.0 {
            let (s, c) = (TAU * phase.angle()).sin_cos();
            let (wc, ws) = (w * c, -w * s);
            for j in 0..dim {
                re[j].add(wc * row[j]);
                im[j].add(ws * row[j]);
            }
        }
        phase.advance(step.hi, step.lo);
    }
    let total = weights.total();
    re.iter()
        .zip(&im)
        .map(|(r, i)| Complex64::new(r.value() / total, i.value() / total))
        .collect()
}

/// `(1/A_N) Σ w(n/N) x_n e^{−2πi n k·ρ}` over the first `n_terms` samples.
pub fn fourier_coefficient(
    samples: &ObservableTrace,
    rho: &[f64],
    k: &[i64],
    spec: WeightSpec,
    n_terms: usize,
) -> Result<Vec<Complex64>> {
    check_inputs(samples, rho, n_terms)?;
    if k.len() != rho.len() {
        return Err(Error::DimensionMismatch {
            expected: rho.len(),
            found: k.len(),
        });
    }
    let weights = build_weights(spec, n_terms)?;
    Ok(coefficient_with(samples, rho, k, &weights))
}

/// Every coefficient with `‖k‖∞ ≤ max_order`, computed in parallel.
pub fn build_table(
    samples: &ObservableTrace,
    rho: &[f64],
    max_order: u32,
    spec: WeightSpec,
    n_terms: usize,
) -> Result<FourierTable> {
    check_inputs(samples, rho, n_terms)?;
    let d = rho.len();
    let side = 2 * max_order as usize + 1;
    if side.checked_pow(d as u32).is_none_or(|n| n > 1 << 24) {
        return Err(Error::invalid("max_order", "coefficient box too large"));
    }
    let weights = build_weights(spec, n_terms)?;
    let entries = box_indices(d, max_order)
        .into_par_iter()
        .map(|k| {
            let coeff = coefficient_with(samples, rho, &k, &weights);
            FourierEntry { k, coeff }
        })
        .collect();
    Ok(FourierTable {
        dim_domain: d,
        dim_range: samples.dim(),
        max_order,
        rho: rho.to_vec(),
        n_used: n_terms,
        weight: spec,
        entries,
    })
}

/// Truncated series `Σ a_k e^{2πi k·θ}`, real part.
pub fn reconstruct(table: &FourierTable, theta: &[f64]) -> Vec<f64> {
    debug_assert_eq!(theta.len(), table.dim_domain);
    let mut acc = vec![NeumaierSum::new(); table.dim_range];
    for e in &table.entries {
        let t = frac_dot(&e.k, theta).value();
        let (s, c) = (TAU * t).sin_cos();
        for (a, coeff) in acc.iter_mut().zip(&e.coeff) {
            // Re(a e^{iφ}), which equals the symmetrized pair average
            a.add(coeff.re * c - coeff.im * s);
        }
    }
    acc.iter().map(NeumaierSum::value).collect()
}

/// Combine coordinate pairs `(2j, 2j+1)` into complex values `x + i y`.
pub fn complexify_pairs(coeff: &[Complex64]) -> Vec<Complex64> {
    coeff
        .chunks_exact(2)
        .map(|p| p[0] + Complex64::i() * p[1])
        .collect()
}

/// Smoothness classification of a coefficient table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayClass {
    AnalyticLike,
    FiniteSmoothness,
    NoDecay,
    /// Fewer than three shells above the noise floor and no evidence of a
    /// flat spectrum.
    Indeterminate,
}

/// Least-squares fit `log max_{‖k‖∞ = s} ‖a_k‖ ≈ A + B s`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub slope_b: f64,
    pub intercept_a: f64,
    /// RMS misfit of the log magnitudes.
    pub residual: f64,
    pub classification: DecayClass,
    pub noise_floor: f64,
    /// Shell indices that entered the fit.
    pub shells_used: Vec<u32>,
    /// Max coefficient magnitude per shell `s = 0..=K`.
    pub shell_magnitudes: Vec<f64>,
}

fn line_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, intercept, rms)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// Exponential-decay diagnostic over the shells `‖k‖∞ = s`, `s ≥ 1`.
///
/// The constant term `a_0` is the mean of the embedding and carries no
/// smoothness information, so shell 0 never enters the fit.
pub fn decay_fit(table: &FourierTable) -> Result<DecayFit> {
    let kmax = table.max_order;
    if kmax < 3 {
        return Err(Error::invalid("max_order", "decay fit needs K >= 3"));
    }
    let mut shell_magnitudes = vec![0.0f64; kmax as usize + 1];
    let mut outer = Vec::new();
    for e in &table.entries {
        let s = e.k.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0) as usize;
        let mag = e.coeff.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        shell_magnitudes[s] = shell_magnitudes[s].max(mag);
        if s == kmax as usize {
            outer.push(mag);
        }
    }
    let noise_floor = NOISE_FACTOR * median(&mut outer).max(NOISE_MIN);
    let shells_used: Vec<u32> = (1..=kmax)
        .filter(|&s| shell_magnitudes[s as usize] > noise_floor)
        .collect();

    let fit_over = |shells: &[u32]| {
        let xs: Vec<f64> = shells.iter().map(|&s| s as f64).collect();
        let ys: Vec<f64> = shells
            .iter()
            .map(|&s| shell_magnitudes[s as usize].max(f64::MIN_POSITIVE).ln())
            .collect();
        line_fit(&xs, &ys)
    };

    let (slope_b, intercept_a, residual, classification) = if shells_used.len() >= 3 {
        let (b, a, r) = fit_over(&shells_used);
        let class = if b >= NO_DECAY_SLOPE {
            DecayClass::NoDecay
        } else if b <= ANALYTIC_SLOPE && r <= ANALYTIC_RESIDUAL {
            DecayClass::AnalyticLike
        } else {
            DecayClass::FiniteSmoothness
        };
        (b, a, r, class)
    } else {
        // too few shells above the floor: either numerically exact (a short
        // trigonometric polynomial) or a flat spectrum that sets its own floor
        let all: Vec<u32> = (1..=kmax).collect();
        let (b, a, r) = fit_over(&all);
        let class = if b >= NO_DECAY_SLOPE {
            DecayClass::NoDecay
        } else {
            DecayClass::Indeterminate
        };
        (b, a, r, class)
    };
    Ok(DecayFit {
        slope_b,
        intercept_a,
        residual,
        classification,
        noise_floor,
        shells_used,
        shell_magnitudes,
    })
}
