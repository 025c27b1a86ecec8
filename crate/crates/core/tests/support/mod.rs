//! Independent oracles and property suites shared by the integration tests
//! and the acceptance runner.
#![allow(dead_code)]

use std::f64::consts::{PI, TAU};
use std::path::Path;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRng, TestRunner};

use quasiavg::cli::{parse_trajectory_str, to_json_string, trajectory_csv};
use quasiavg::fourier::build_table;
use quasiavg::harness::{integrate_periodic, run_convergence_study, Observable, Truth};
use quasiavg::rotation::{build_lift, AngleVector, UnwrapMode};
use quasiavg::systems::{continued_fraction, small_denominator_scan, SystemSpec, GOLDEN_MEAN};
use quasiavg::{build_weights, weighted_average, CheckpointSchedule, ObservableTrace, WeightSpec};

// ---------------------------------------------------------------------------
// Oracles

/// Adaptive Simpson quadrature.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// `I₀(x) = (1/π) ∫₀^π exp(x cos t) dt`, by quadrature.
pub fn bessel_i0_quadrature(x: f64) -> f64 {
    simpson(&|t: f64| (x * t.cos()).exp(), 0.0, PI, 1e-16) / PI
}

/// Exact `frac(θ₀ + nρ)` for dyadic binary64 inputs, via 128-bit integers.
/// Both inputs must lie in `[0, 1)`.
pub fn exact_rotation_phase(theta0: f64, rho: f64, n: u64) -> f64 {
    const SHIFT: u32 = 64;
    let to_fixed = |x: f64| -> u128 {
        assert!((0.0..1.0).contains(&x));
        // x = m · 2^e with |e| small enough for a 64-bit fraction
        let scaled = x * (1u128 << SHIFT) as f64;
        assert_eq!(
            scaled.fract(),
            0.0,
            "input needs more than 64 fraction bits"
        );
        scaled as u128
    };
    let mask = (1u128 << SHIFT) - 1;
    let phase = (to_fixed(theta0) + (to_fixed(rho) * n as u128)) & mask;
    phase as f64 / (1u128 << SHIFT) as f64
}

/// Brute-force `min_k dist(k·ρ, ℤ) ‖k‖∞^(d+β)`, scanning `k` in
/// lexicographic order and keeping the first minimizer.
pub fn brute_force_scan(rho: &[f64], max_norm: i64, beta: f64) -> (f64, Vec<i64>) {
    let d = rho.len();
    let mut best = (f64::INFINITY, vec![0; d]);
    let mut k = vec![-max_norm; d];
    loop {
        let norm = k.iter().map(|v: &i64| v.abs()).max().unwrap();
        if norm > 0 {
            let mut dot = 0.0;
            for j in 0..d {
                dot += k[j] as f64 * rho[j];
            }
            // both gaps to the bracketing integers; the smaller is exact
            let below = dot.floor();
            let dist = (dot - below).min(below + 1.0 - dot);
            let c = dist * (norm as f64).powf(d as f64 + beta);
            if c < best.0 {
                best = (c, k.clone());
            }
        }
        // odometer increment, last coordinate fastest
        let mut j = d;
        loop {
            if j == 0 {
                return best;
            }
            j -= 1;
            if k[j] < max_norm {
                k[j] += 1;
                break;
            }
            k[j] = -max_norm;
        }
    }
}

/// `x = m / 2^s` exactly, for `x ∈ (0, 1)` with a short enough expansion.
pub fn dyadic(x: f64) -> (i128, u32) {
    let mut m = x;
    let mut s = 0u32;
    while m.fract() != 0.0 {
        m *= 2.0;
        s += 1;
    }
    (m as i128, s)
}

/// Two-harmonic planar embedding `(cos 2πθ + 0.3 cos 4πθ, sin 2πθ − 0.3 sin 4πθ)`.
pub fn two_harmonic(theta: f64) -> [f64; 2] {
    [
        (TAU * theta).cos() + 0.3 * (2.0 * TAU * theta).cos(),
        (TAU * theta).sin() - 0.3 * (2.0 * TAU * theta).sin(),
    ]
}

pub fn two_harmonic_trace(rho: f64, theta0: f64, n: usize) -> ObservableTrace {
    let rot = SystemSpec::PureRotation {
        rho: vec![rho],
        theta0: vec![theta0],
    };
    quasiavg::systems::iterate(&rot, n)
        .unwrap()
        .map(2, |th, out| out.copy_from_slice(&two_harmonic(th[0])))
        .unwrap()
}

// ---------------------------------------------------------------------------
// Property suites

pub type Property = (&'static str, fn() -> Result<(), String>);

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        failure_persistence: None,
        ..Config::with_cases(cases)
    };
    let rng = TestRng::deterministic_rng(config.rng_algorithm);
    TestRunner::new_with_rng(config, rng)
}

fn bumps() -> impl Strategy<Value = WeightSpec> {
    prop_oneof![
        Just(WeightSpec::Exponential),
        Just(WeightSpec::SinSquared),
        Just(WeightSpec::Quadratic),
    ]
}

fn any_weight() -> impl Strategy<Value = WeightSpec> {
    prop_oneof![bumps(), Just(WeightSpec::Uniform)]
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn weight_symmetry() -> Result<(), String> {
    runner(2000)
        .run(&(bumps(), 1u32..(1 << 14)), |(spec, i)| {
            // dyadic grid, so 1 - t is exact
            let t = i as f64 / (1u32 << 14) as f64;
            prop_assert_eq!(spec.eval(t), spec.eval(1.0 - t));
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    runner(200)
        .run(&(bumps(), 2usize..5000), |(spec, n)| {
            let w = build_weights(spec, n).unwrap();
            for k in 1..n {
                prop_assert_eq!(w.values()[k], w.values()[n - k]);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn weight_endpoint_flatness() -> Result<(), String> {
    runner(2000)
        .run(&(1e-6f64..0.02), |t| {
            let w = WeightSpec::Exponential;
            prop_assert!(w.eval(t) <= t.powi(8));
            prop_assert!(w.eval(1.0 - t) <= t.powi(8));
            // finite-smoothness bumps vanish at their known polynomial rate
            prop_assert!(WeightSpec::SinSquared.eval(t) <= (PI * t).powi(2) * (1.0 + 1e-12));
            prop_assert!(WeightSpec::Quadratic.eval(t) <= t);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn samples(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, len)
}

pub fn averaging_linearity() -> Result<(), String> {
    let strat = (2usize..2000).prop_flat_map(|n| {
        (
            samples(n..n + 1),
            samples(n..n + 1),
            -5.0f64..5.0,
            -5.0f64..5.0,
            any_weight(),
        )
    });
    runner(200)
        .run(&strat, |(f, g, a, b, spec)| {
            let n = f.len();
            let h: Vec<f64> = f.iter().zip(&g).map(|(x, y)| a * x + b * y).collect();
            let avg = |v: &Vec<f64>| {
                weighted_average(&ObservableTrace::from_scalars(v.clone()).unwrap(), spec, n)
                    .unwrap()[0]
            };
            let lhs = avg(&h);
            let rhs = a * avg(&f) + b * avg(&g);
            let scale = a.abs() * max_abs(&f) + b.abs() * max_abs(&g) + 1.0;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale, "{lhs} vs {rhs}");
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn averaging_constant_exactness() -> Result<(), String> {
    runner(300)
        .run(
            &(-1e6f64..1e6, 2usize..5000, any_weight()),
            |(c, n, spec)| {
                let trace = ObservableTrace::from_scalars(vec![c; n]).unwrap();
                let v = weighted_average(&trace, spec, n).unwrap()[0];
                prop_assert!((v - c).abs() <= 4.0 * f64::EPSILON * c.abs(), "{v} vs {c}");
                Ok(())
            },
        )
        .map_err(|e| e.to_string())
}

pub fn averaging_reversal_symmetry() -> Result<(), String> {
    runner(200)
        .run(&(samples(2..3000), bumps()), |(f, spec)| {
            let n = f.len();
            // w(0) = 0, so reverse the samples 1..N
            let mut g = f.clone();
            g[1..].reverse();
            let avg = |v: Vec<f64>| {
                weighted_average(&ObservableTrace::from_scalars(v).unwrap(), spec, n).unwrap()[0]
            };
            let (a, b) = (avg(f.clone()), avg(g));
            prop_assert!((a - b).abs() <= 1e-12 * (max_abs(&f) + 1.0), "{a} vs {b}");
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn modes() -> impl Strategy<Value = UnwrapMode> {
    prop_oneof![
        Just(UnwrapMode::PositiveArc),
        Just(UnwrapMode::ShortestArc),
        (-1.0f64..0.5).prop_map(UnwrapMode::AvoidAngle),
    ]
}

pub fn lift_consistency() -> Result<(), String> {
    let strat = (
        prop::collection::vec(prop::collection::vec(0.0f64..1.0, 2..3), 2..2000),
        modes(),
    );
    runner(200)
        .run(&strat, |(rows, mode)| {
            let angles: Vec<AngleVector> = rows
                .iter()
                .map(|r| AngleVector::new(r.clone()).unwrap())
                .collect();
            let lift = build_lift(&angles, mode).unwrap();
            prop_assert!(lift.max_lift_residual() <= 1e-12);
            prop_assert!(lift.max_recurrence_residual() <= 1e-12);
            for n in 0..lift.len() - 1 {
                for j in 0..lift.dim() {
                    let d = lift.delta(n)[j];
                    let (lo, hi) = match mode {
                        UnwrapMode::PositiveArc => (0.0, 1.0),
                        UnwrapMode::ShortestArc => (-0.5, 0.5),
                        UnwrapMode::AvoidAngle(t) => (t, t + 1.0),
                    };
                    prop_assert!(d >= lo && d < hi, "{d} outside [{lo}, {hi})");
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn fourier_conjugate_symmetry() -> Result<(), String> {
    let strat = (
        prop::collection::vec(-3.0f64..3.0, 200..2000),
        0.01f64..0.99,
        any_weight(),
    );
    runner(50)
        .run(&strat, |(f, rho, spec)| {
            let n = f.len();
            let trace = ObservableTrace::from_scalars(f).unwrap();
            let table = build_table(&trace, &[rho], 3, spec, n).unwrap();
            prop_assert!(table.conjugate_symmetry_error() <= 1e-10);
            let a0 = weighted_average(&trace, spec, n).unwrap()[0];
            let t0 = table.get(&[0]).unwrap()[0];
            prop_assert!((t0.re - a0).abs() <= 1e-13 && t0.im == 0.0);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn continued_fraction_invariants() -> Result<(), String> {
    runner(500)
        .run(&(1e-3f64..0.999, 1usize..40), |(x, terms)| {
            let cf = continued_fraction(x, terms).unwrap();
            let (m, s) = dyadic(x);
            let conv = &cf.convergents;
            prop_assert_eq!(conv.len(), cf.partial_quotients.len());
            prop_assert!(cf.partial_quotients.iter().all(|&a| a >= 1));
            let mut prev_err = i128::MAX;
            for (j, &(p, q)) in conv.iter().enumerate() {
                let (p, q) = (p as i128, q as i128);
                // seeds (p, q) = (1, 0), (0, 1) for x = [0; a_1, a_2, ...]
                let (pm1, qm1) = if j == 0 {
                    (0, 1)
                } else {
                    (conv[j - 1].0 as i128, conv[j - 1].1 as i128)
                };
                let (pm2, qm2) = if j == 0 {
                    (1, 0)
                } else if j == 1 {
                    (0, 1)
                } else {
                    (conv[j - 2].0 as i128, conv[j - 2].1 as i128)
                };
                let a = cf.partial_quotients[j] as i128;
                prop_assert_eq!(p, a * pm1 + pm2);
                prop_assert_eq!(q, a * qm1 + qm2);
                prop_assert_eq!((p * qm1 - pm1 * q).abs(), 1);
                if j > 0 {
                    prop_assert!(q > qm1);
                }
                // |q x − p| scaled by 2^s, exact
                let err = (q * m - (p << s)).abs();
                prop_assert!(err < prev_err, "|q x - p| not decreasing at j = {j}");
                prev_err = err;
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn scan_matches_brute_force() -> Result<(), String> {
    let strat = (
        prop::collection::vec(0.001f64..0.999, 1..3),
        1u32..60,
        0.0f64..2.0,
    );
    runner(100)
        .run(&strat, |(rho, k, beta)| {
            let rep = small_denominator_scan(&rho, k, beta).unwrap();
            let (c, argmin) = brute_force_scan(&rho, k as i64, beta);
            prop_assert_eq!(rep.c_emp.to_bits(), c.to_bits());
            prop_assert_eq!(rep.argmin, argmin);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn trig_polynomial_integration() -> Result<(), String> {
    let strat = (prop::collection::vec(-1.0f64..1.0, 11), 0.0f64..1.0);
    runner(50)
        .run(&strat, |(c, phase)| {
            let f = |x: &[f64]| {
                let t = x[0] + phase;
                let mut s = c[0];
                for k in 1..=5 {
                    let a = TAU * k as f64 * t;
                    s += c[2 * k - 1] * a.cos() + c[2 * k] * a.sin();
                }
                s
            };
            let v = integrate_periodic(f, &[GOLDEN_MEAN], WeightSpec::Exponential, 10_000).unwrap();
            prop_assert!((v - c[0]).abs() <= 1e-12, "{v} vs {}", c[0]);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn finite_f64() -> impl Strategy<Value = f64> {
    prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO
}

pub fn trajectory_roundtrip() -> Result<(), String> {
    let strat = (1usize..6).prop_flat_map(|d| {
        prop::collection::vec(prop::collection::vec(finite_f64(), d..d + 1), 2..40)
    });
    runner(300)
        .run(&strat, |rows| {
            let trace = ObservableTrace::from_rows(&rows).unwrap();
            let text = trajectory_csv(&trace);
            let back = parse_trajectory_str(Path::new("mem.csv"), &text).unwrap();
            prop_assert_eq!(back.n_rows(), rows.len());
            let same = back
                .trace
                .as_flat()
                .iter()
                .zip(trace.as_flat())
                .all(|(a, b)| a.to_bits() == b.to_bits());
            prop_assert!(same);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn report_determinism() -> Result<(), String> {
    runner(10)
        .run(&(0.0f64..1.0, 0.05f64..0.95), |(theta0, rho)| {
            let sys = SystemSpec::PureRotation {
                rho: vec![rho],
                theta0: vec![theta0],
            };
            let sched = CheckpointSchedule::geometric(2, 4, 4).unwrap();
            let specs = WeightSpec::ALL;
            let study = || {
                to_json_string(
                    &run_convergence_study(
                        &specs,
                        &sys,
                        Observable::Cos,
                        Truth::closed_form(0.0),
                        &sched,
                    )
                    .unwrap(),
                )
            };
            prop_assert_eq!(study(), study());
            let trace = two_harmonic_trace(rho, theta0, 2000);
            let table = || {
                to_json_string(
                    &build_table(&trace, &[rho], 3, WeightSpec::Exponential, 2000)
                        .unwrap()
                        .to_file(),
                )
            };
            prop_assert_eq!(table(), table());
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Every property suite, by name.
pub const PROPERTIES: &[Property] = &[
    ("weights: symmetry", weight_symmetry),
    ("weights: endpoint flatness", weight_endpoint_flatness),
    ("averaging: linearity", averaging_linearity),
    (
        "averaging: constant exactness",
        averaging_constant_exactness,
    ),
    ("averaging: reversal symmetry", averaging_reversal_symmetry),
    ("rotation: lift mod-1 consistency", lift_consistency),
    ("fourier: conjugate symmetry", fourier_conjugate_symmetry),
    (
        "systems: continued fraction invariants",
        continued_fraction_invariants,
    ),
    ("systems: scan equals brute force", scan_matches_brute_force),
    (
        "harness: trigonometric polynomials integrate exactly",
        trig_polynomial_integration,
    ),
    ("cli: trajectory round-trip", trajectory_roundtrip),
    ("cli: report determinism", report_determinism),
];
