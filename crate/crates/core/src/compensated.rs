//! Error-free transformations and compensated accumulators.
//!
//! [`NeumaierSum`] is the Kahan–Babuška–Neumaier accumulator used for every
//! weighted sum in the crate. [`TurnAccumulator`] tracks an angle measured in
//! turns as an integer winding count plus a double-double fractional part, so
//! that repeated addition of a rotation step stays accurate to a few ulp of 1
//! even after millions of steps.

use std::iter::Sum;

/// Knuth's branch-free two-sum: `a + b == s + e` exactly.
#[inline]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// `a * b == p + e` exactly (barring overflow), via fused multiply-add.
#[inline]
pub fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let e = a.mul_add(b, -p);
    (p, e)
}

/// Kahan–Babuška–Neumaier running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub const fn new() -> Self {
        Self {
            sum: 0.0,
            comp: 0.0,
        }
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    /// The unevaluated pair `(sum, compensation)`.
    pub fn parts(&self) -> (f64, f64) {
        (self.sum, self.comp)
    }
}

impl Sum<f64> for NeumaierSum {
    fn sum<I: Iterator<Item = f64>>(iter: I) -> Self {
        let mut acc = NeumaierSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

impl<'a> Sum<&'a f64> for NeumaierSum {
    fn sum<I: Iterator<Item = &'a f64>>(iter: I) -> Self {
        iter.copied().sum()
    }
}

/// Compensated sum of a slice.
pub fn sum(values: &[f64]) -> f64 {
    values.iter().sum::<NeumaierSum>().value()
}

/// Fractional part in `[0, 1)`; values that round up to 1 map to 0.
#[inline]
pub fn frac(x: f64) -> f64 {
    let f = x - x.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// A double-double value reduced mod 1: `hi ∈ [0, 1)`, `|lo| ≲ ulp(hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mod1 {
    pub hi: f64,
    pub lo: f64,
}

impl Mod1 {
    /// Reduce the unevaluated sum `hi + lo` mod 1, returning the number of
    /// whole turns removed.
    fn reduce(hi: f64, lo: f64) -> (i64, Mod1) {
        let (mut s, mut e) = two_sum(hi, lo);
        let whole = s.floor();
        let mut turns = whole as i64;
        if whole != 0.0 {
            // s - whole may be inexact when s is tiny and negative; carry the
            // rounding error into the low word.
            let (s2, e2) = two_sum(s, -whole);
            s = s2;
            e += e2;
        }
        let (mut s3, mut e3) = two_sum(s, e);
        if s3 >= 1.0 {
            let (s4, e4) = two_sum(s3, -1.0);
            s3 = s4;
            e3 += e4;
            turns += 1;
        } else if s3 < 0.0 {
            let (s4, e4) = two_sum(s3, 1.0);
            s3 = s4;
            e3 += e4;
            turns -= 1;
        }
        if s3 >= 1.0 {
            // 1 - tiny rounded to 1.0
            s3 = 0.0;
            turns += 1;
        }
        (turns, Mod1 { hi: s3, lo: e3 })
    }

    /// Best binary64 value in `[0, 1)`.
    pub fn value(&self) -> f64 {
        frac(self.hi + self.lo)
    }
}

/// `frac(k · x)` computed in double-double arithmetic.
pub fn frac_dot(k: &[i64], x: &[f64]) -> Mod1 {
    debug_assert_eq!(k.len(), x.len());
    let mut hi = 0.0;
    let mut lo = 0.0;
    for (&kj, &xj) in k.iter().zip(x) {
        let (p, pe) = two_prod(kj as f64, xj);
        let (s, se) = two_sum(hi, p);
        // keep hi bounded so the low word never loses significance
        let (_, m) = Mod1::reduce(s, se + pe + lo);
        hi = m.hi;
        lo = m.lo;
    }
    Mod1::reduce(hi, lo).1
}

/// Angle in turns with an integer winding count and a compensated
/// fractional part. Adding a fixed step `n` times reproduces `n * step`
/// to within a few ulp of 1, independent of `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurnAccumulator {
    turns: i64,
    frac: Mod1,
}

impl TurnAccumulator {
    pub fn new(start: f64) -> Self {
        let (turns, frac) = Mod1::reduce(start, 0.0);
        Self { turns, frac }
    }

    /// Add the unevaluated step `step_hi + step_lo` (any sign, any size).
    #[inline]
    pub fn advance(&mut self, step_hi: f64, step_lo: f64) {
        let (s, e) = two_sum(self.frac.hi, step_hi);
        let (t, m) = Mod1::reduce(s, e + self.frac.lo + step_lo);
        self.turns += t;
        self.frac = m;
    }

    pub fn turns(&self) -> i64 {
        self.turns
    }

    pub fn fractional(&self) -> Mod1 {
        self.frac
    }

    /// Angle reduced to `[0, 1)`.
    pub fn angle(&self) -> f64 {
        self.frac.value()
    }

    /// The lifted (unreduced) value rounded to binary64.
    pub fn lift(&self) -> f64 {
        self.turns as f64 + (self.frac.hi + self.frac.lo)
    }
}
