//! Cesaro and logarithmic averages over initial segments of the integers.
//!
//! The logarithmic average of f over [N] is
//!
//! ```text
//!   E^log_{n<=N} f(n) = ( sum_{n<=N} f(n)/n ) / H(N),     H(N) = sum_{n<=N} 1/n.
//! ```
//!
//! Numerator and denominator of an average are accumulated in the same
//! compensated pass, so constants are averaged to themselves bitwise and
//! rounding errors stay correlated. The standalone `HarmonicTable` exists for
//! closed forms such as `E^log_{n<=N} 1_{d|n} = H(floor(N/d)) / (d H(N))`,
//! where exact prefix values at arbitrary arguments are needed; it is built
//! in double-double arithmetic and satisfies, for every tabulated N,
//!
//! ```text
//!   1/(2N) - 1/(8N^2)  <=  H(N) - log N - gamma  <=  1/(2N).
//! ```
//!
//! Beyond the table cap, `log N + gamma + 1/(2N)` is used; its error
//! 1/(12N^2) is below f64 resolution at those sizes.

use std::sync::{Arc, OnceLock, RwLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seq::SequenceSpec;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Hard cap on exact harmonic tabulation (64 MiB of f64).
pub const HARMONIC_TABLE_CAP: u64 = 1 << 23;

/// Evaluation budget for a single averaging pass.
pub const EVAL_BUDGET: u64 = 4_000_000_000;

/// Neumaier-compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    #[inline]
    pub fn new() -> Self {
        Kahan::default()
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
}

/// Complex accumulator: one compensated lane per component.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanComplex {
    re: Kahan,
    im: Kahan,
}

impl KahanComplex {
    #[inline]
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    #[inline]
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

// Double-double helpers for the harmonic table build. `two_sum` is exact;
// `recip_dd` returns 1/n with a correction term via one fused multiply-add.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn recip_dd(n: f64) -> (f64, f64) {
    let hi = 1.0 / n;
    let lo = (-hi).mul_add(n, 1.0) / n;
    (hi, lo)
}

/// Exact prefix sums H(0..=cap), asymptotic continuation above.
pub struct HarmonicTable {
    prefix: Vec<f64>,
}

impl HarmonicTable {
    pub fn with_cap(cap: u64) -> Self {
        let cap = cap as usize;
        let mut prefix = Vec::with_capacity(cap + 1);
        prefix.push(0.0);
        let (mut hi, mut lo) = (0.0f64, 0.0f64);
        for n in 1..=cap {
            let (rhi, rlo) = recip_dd(n as f64);
            let (s, e) = two_sum(hi, rhi);
            hi = s;
            lo += e + rlo;
            // renormalize so |lo| stays tiny relative to hi
            let (s2, e2) = two_sum(hi, lo);
            hi = s2;
            lo = e2;
            prefix.push(hi + lo);
        }
        HarmonicTable { prefix }
    }

    pub fn cap(&self) -> u64 {
        (self.prefix.len() - 1) as u64
    }

    /// H(n): tabulated when available, asymptotic otherwise.
    #[inline]
    pub fn value(&self, n: u64) -> f64 {
        if (n as usize) < self.prefix.len() {
            self.prefix[n as usize]
        } else {
            asymptotic_harmonic(n)
        }
    }

    pub fn tabulated(&self, n: u64) -> Option<f64> {
        self.prefix.get(n as usize).copied()
    }
}

#[inline]
fn asymptotic_harmonic(n: u64) -> f64 {
    let x = n as f64;
    x.ln() + EULER_GAMMA + 0.5 / x
}

static HARMONIC: OnceLock<RwLock<Arc<HarmonicTable>>> = OnceLock::new();

fn harmonic_lock() -> &'static RwLock<Arc<HarmonicTable>> {
    HARMONIC.get_or_init(|| RwLock::new(Arc::new(HarmonicTable::with_cap(0))))
}

/// Shared harmonic table covering at least `min_cap`; grows geometrically,
/// refuses past `HARMONIC_TABLE_CAP`.
pub fn harmonic(min_cap: u64) -> Result<Arc<HarmonicTable>> {
    if min_cap > HARMONIC_TABLE_CAP {
        return Err(Error::CostGuard {
            what: "harmonic table length",
            needed: min_cap,
            budget: HARMONIC_TABLE_CAP,
        });
    }
    {
        let guard = harmonic_lock().read().unwrap();
        if guard.cap() >= min_cap {
            return Ok(Arc::clone(&guard));
        }
    }
    let mut guard = harmonic_lock().write().unwrap();
    if guard.cap() >= min_cap {
        return Ok(Arc::clone(&guard));
    }
    let cap = min_cap.max(2 * guard.cap()).max(1 << 16).min(HARMONIC_TABLE_CAP);
    *guard = Arc::new(HarmonicTable::with_cap(cap));
    Ok(Arc::clone(&guard))
}

/// H(n) through the shared table (exact if already tabulated, asymptotic
/// otherwise; never grows the table).
pub fn harmonic_value(n: u64) -> f64 {
    harmonic_lock().read().unwrap().value(n)
}

/// Strictly increasing cutoffs N_1 < N_2 < ... < N_k.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u64>", into = "Vec<u64>")]
pub struct TruncationLadder {
    cutoffs: Vec<u64>,
}

impl TruncationLadder {
    pub fn new(cutoffs: Vec<u64>) -> Result<Self> {
        if cutoffs.is_empty() {
            return Err(Error::param("truncation ladder must be non-empty"));
        }
        if cutoffs[0] == 0 {
            return Err(Error::param("truncation cutoffs must be >= 1"));
        }
        if !cutoffs.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::param(format!(
                "truncation cutoffs must be strictly increasing, got {cutoffs:?}"
            )));
        }
        Ok(TruncationLadder { cutoffs })
    }

    /// `start, start*factor, ...` (`count` entries), a convenient default.
    pub fn geometric(start: u64, factor: u64, count: usize) -> Result<Self> {
        if start == 0 || factor < 2 || count == 0 {
            return Err(Error::param("geometric ladder needs start >= 1, factor >= 2, count >= 1"));
        }
        let mut cutoffs = Vec::with_capacity(count);
        let mut v = start;
        for i in 0..count {
            cutoffs.push(v);
            if i + 1 < count {
                v = v.checked_mul(factor).ok_or_else(|| Error::param("ladder overflows u64"))?;
            }
        }
        TruncationLadder::new(cutoffs)
    }

    pub fn cutoffs(&self) -> &[u64] {
        &self.cutoffs
    }

    pub fn top(&self) -> u64 {
        *self.cutoffs.last().unwrap()
    }
}

impl TryFrom<Vec<u64>> for TruncationLadder {
    type Error = Error;
    fn try_from(v: Vec<u64>) -> Result<Self> {
        TruncationLadder::new(v)
    }
}

impl From<TruncationLadder> for Vec<u64> {
    fn from(l: TruncationLadder) -> Vec<u64> {
        l.cutoffs
    }
}

fn check_pass(f: &SequenceSpec, n: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::param("average over [N] needs N >= 1"));
    }
    if n > EVAL_BUDGET {
        return Err(Error::CostGuard { what: "averaging pass length", needed: n, budget: EVAL_BUDGET });
    }
    f.validate_domain(n)
}

/// (1/N) sum_{n<=N} f(n).
pub fn cesaro_average(f: &SequenceSpec, n: u64) -> Result<Complex64> {
    check_pass(f, n)?;
    let mut acc = KahanComplex::default();
    for k in 1..=n {
        acc.add(f.eval(k));
    }
    Ok(acc.value() / n as f64)
}

/// E^log_{n<=N} f(n); numerator and H(N) accumulated in one pass.
pub fn log_average(f: &SequenceSpec, n: u64) -> Result<Complex64> {
    check_pass(f, n)?;
    let mut num = KahanComplex::default();
    let mut den = Kahan::default();
    for k in 1..=n {
        let w = 1.0 / k as f64;
        num.add(f.eval(k) * w);
        den.add(w);
    }
    Ok(num.value() / den.value())
}

/// Logarithmic averages along a ladder, one evaluation pass total, plus the
/// maximum gap between successive values. The gap is a stabilization
/// diagnostic only: logarithmic averages need not converge at all, so no
/// convergence claim is attached.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LadderValues {
    pub cutoffs: Vec<u64>,
    pub values: Vec<Complex64>,
    /// max_i |v_{i+1} - v_i|; NaN-free, 0.0 for a single cutoff.
    pub max_successive_gap: f64,
}

pub fn log_average_ladder(f: &SequenceSpec, ladder: &TruncationLadder) -> Result<LadderValues> {
    let top = ladder.top();
    check_pass(f, top)?;
    let mut num = KahanComplex::default();
    let mut den = Kahan::default();
    let mut values = Vec::with_capacity(ladder.cutoffs().len());
    let mut next = 0usize;
    for k in 1..=top {
        let w = 1.0 / k as f64;
        num.add(f.eval(k) * w);
        den.add(w);
        while next < ladder.cutoffs().len() && ladder.cutoffs()[next] == k {
            values.push(num.value() / den.value());
            next += 1;
        }
    }
    let max_successive_gap = values
        .windows(2)
        .map(|w| (w[1] - w[0]).norm())
        .fold(0.0f64, f64::max);
    Ok(LadderValues { cutoffs: ladder.cutoffs().to_vec(), values, max_successive_gap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seq::SequenceSpec;

    fn even_indicator() -> SequenceSpec {
        SequenceSpec::ResidueIndicator { modulus: 2, residue: 0 }
    }

    #[test]
    fn kahan_survives_catastrophic_cancellation() {
        let mut k = Kahan::default();
        k.add(1e16);
        for _ in 0..1_000_000 {
            k.add(1.0);
        }
        k.add(-1e16);
        assert_eq!(k.value(), 1_000_000.0);
    }

    #[test]
    fn harmonic_small_values_are_exact_fractions() {
        let t = HarmonicTable::with_cap(10);
        assert_eq!(t.value(0), 0.0);
        assert_eq!(t.value(1), 1.0);
        assert_eq!(t.value(2), 1.5);
        assert!((t.value(3) - 11.0 / 6.0).abs() < 1e-16);
        assert!((t.value(4) - 25.0 / 12.0).abs() < 1e-16);
        assert!((t.value(10) - 7381.0 / 2520.0).abs() < 2e-16);
    }

    #[test]
    fn harmonic_sandwich_for_all_tabulated_n_to_1e6() {
        let t = harmonic(1_000_000).unwrap();
        for n in 1..=1_000_000u64 {
            let x = n as f64;
            let d = t.value(n) - x.ln() - EULER_GAMMA;
            let upper = 0.5 / x;
            let lower = 0.5 / x - 0.125 / (x * x);
            assert!(
                d <= upper && d >= lower,
                "sandwich fails at N = {n}: d = {d:e}, window [{lower:e}, {upper:e}]"
            );
        }
    }

    #[test]
    fn asymptotic_continuation_is_seamless() {
        let t = HarmonicTable::with_cap(100_000);
        let exact = t.value(100_000);
        let asym = asymptotic_harmonic(100_000);
        assert!((exact - asym).abs() < 1e-11); // 1/(12 N^2) ~ 8e-12 here
    }

    #[test]
    fn log_average_frozen_value_even_indicator_n4() {
        // (1/2 + 1/4) / (1 + 1/2 + 1/3 + 1/4) = 9/25
        let v = log_average(&even_indicator(), 4).unwrap();
        assert!((v.re - 0.36).abs() < 1e-15 && v.im == 0.0);
    }

    #[test]
    fn log_average_matches_direct_oracle() {
        // independent oracle: plain f64 loop, no shared code with log_average
        let f = even_indicator();
        for n in [1u64, 7, 100, 12_345] {
            let mut num = 0.0f64;
            let mut den = 0.0f64;
            for k in 1..=n {
                if k % 2 == 0 {
                    num += 1.0 / k as f64;
                }
                den += 1.0 / k as f64;
            }
            let got = log_average(&f, n).unwrap();
            assert!((got.re - num / den).abs() < 1e-12, "N = {n}");
        }
    }

    #[test]
    fn cesaro_frozen_value_multiples_of_three_n10() {
        let f = SequenceSpec::ResidueIndicator { modulus: 3, residue: 0 };
        let v = cesaro_average(&f, 10).unwrap();
        assert_eq!(v.re, 0.3);
        assert_eq!(v.im, 0.0);
    }

    #[test]
    fn constant_one_averages_to_one_bitwise() {
        let one = SequenceSpec::constant(1.0);
        for n in [1u64, 10, 1000, 99_991] {
            let v = log_average(&one, n).unwrap();
            assert_eq!(v.re, 1.0);
            assert_eq!(v.im, 0.0);
            let c = cesaro_average(&one, n).unwrap();
            assert_eq!(c.re, 1.0);
        }
    }

    #[test]
    fn zero_length_average_is_a_parameter_error() {
        assert!(log_average(&SequenceSpec::constant(1.0), 0).is_err());
        assert!(cesaro_average(&SequenceSpec::constant(1.0), 0).is_err());
    }

    #[test]
    fn linearity_within_compensated_tolerance() {
        use num_complex::Complex64 as C;
        let f = even_indicator();
        let g = SequenceSpec::Liouville;
        let alpha = C::new(0.7, -0.3);
        let beta = C::new(-1.2, 0.4);
        let combo = SequenceSpec::Combination(vec![
            (alpha, f.clone()),
            (beta, g.clone()),
        ]);
        for n in [10u64, 1000, 100_000] {
            let lhs = log_average(&combo, n).unwrap();
            let rhs = alpha * log_average(&f, n).unwrap() + beta * log_average(&g, n).unwrap();
            assert!((lhs - rhs).norm() < 1e-12, "N = {n}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn shift_near_invariance_bound() {
        let specs = vec![
            SequenceSpec::constant(1.0),
            even_indicator(),
            SequenceSpec::Liouville,
            SequenceSpec::alternating(),
        ];
        for f in specs {
            for n in [1000u64, 10_000] {
                let shifted = SequenceSpec::Shift { inner: Box::new(f.clone()), offset: 1 };
                let a = log_average(&f, n).unwrap();
                let b = log_average(&shifted, n).unwrap();
                let bound = f.bound();
                let h = harmonic_value(n);
                assert!(
                    (a - b).norm() <= 2.0 * bound * (1.0 / h + 1.0 / n as f64) + 1e-12,
                    "shift bound fails for {f} at N = {n}"
                );
            }
        }
    }

    #[test]
    fn averages_respect_the_declared_bound() {
        let specs = vec![
            SequenceSpec::constant(1.0),
            even_indicator(),
            SequenceSpec::Liouville,
            SequenceSpec::alternating(),
            SequenceSpec::MultEvenIndicator,
        ];
        for f in &specs {
            for n in [1u64, 17, 1000] {
                let b = f.bound() + 1e-12;
                assert!(log_average(f, n).unwrap().norm() <= b);
                assert!(cesaro_average(f, n).unwrap().norm() <= b);
            }
        }
    }

    #[test]
    fn ladder_requires_strict_increase() {
        assert!(TruncationLadder::new(vec![]).is_err());
        assert!(TruncationLadder::new(vec![0, 5]).is_err());
        assert!(TruncationLadder::new(vec![5, 5]).is_err());
        assert!(TruncationLadder::new(vec![5, 4]).is_err());
        assert!(TruncationLadder::new(vec![1, 2, 30]).is_ok());
        let g = TruncationLadder::geometric(100, 10, 3).unwrap();
        assert_eq!(g.cutoffs(), &[100, 1000, 10_000]);
    }

    #[test]
    fn ladder_values_match_individual_averages() {
        let f = SequenceSpec::Liouville;
        let ladder = TruncationLadder::new(vec![10, 100, 1000, 10_000]).unwrap();
        let lv = log_average_ladder(&f, &ladder).unwrap();
        let mut max_gap = 0.0f64;
        for (i, &n) in ladder.cutoffs().iter().enumerate() {
            let direct = log_average(&f, n).unwrap();
            assert!((lv.values[i] - direct).norm() < 1e-13);
            if i > 0 {
                max_gap = max_gap.max((lv.values[i] - lv.values[i - 1]).norm());
            }
        }
        assert!((lv.max_successive_gap - max_gap).abs() < 1e-15);
    }
}
