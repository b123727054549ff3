//! Integer sets, sum-product pattern search, densities, and the iterated
//! affine correlation estimator.
//!
//! The searches look for configurations {x + Q(y), x*y} inside a set, with
//! the degenerate x = y = 2 singleton excluded by default. Two structured
//! families are built in: `DoubleExpBlocks`, a union of blocks
//! [2^(2^n), 2^(2^n) * sqrt2) whose Cesaro density oscillates while the
//! logarithmic density stays small, and `ValuationBlocks`, where membership
//! is pinned to an odd 2-adic valuation inside towers of scales 2^(5^(k^2+l));
//! the latter carries no sum-product pair at all, which
//! `valuation_obstruction_check` certifies from the 2-adic side.

use std::fmt;
use std::fs;
use std::io::{Read as _, Write as _};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Serialize, Serializer};

use crate::avg::{self, Kahan};
use crate::error::{Error, Result};
use crate::poly::IntPolynomial;
use crate::primes;

/// Explicit membership table over [1, n_max].
#[derive(Clone, Debug)]
pub struct Bitmask {
    n_max: u64,
    words: Vec<u64>,
    label: String,
}

impl Bitmask {
    pub fn from_members<I: IntoIterator<Item = u64>>(n_max: u64, members: I) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::param("bitmask needs n_max >= 1"));
        }
        let words = vec![0u64; (n_max as usize).div_ceil(64)];
        let mut mask = Bitmask { n_max, words, label: "inline".into() };
        for n in members {
            if n == 0 || n > n_max {
                return Err(Error::param(format!("member {n} outside [1, {n_max}]")));
            }
            mask.words[((n - 1) / 64) as usize] |= 1u64 << ((n - 1) % 64);
        }
        Ok(mask)
    }

    #[inline]
    pub fn contains(&self, n: u64) -> bool {
        n >= 1
            && n <= self.n_max
            && self.words[((n - 1) / 64) as usize] >> ((n - 1) % 64) & 1 == 1
    }

    pub fn n_max(&self) -> u64 {
        self.n_max
    }

    pub fn count(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Binary layout: 8-byte little-endian n_max, then ceil(n_max/8) bytes,
    /// bit i (LSB-first within each byte) = membership of i+1.
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let n_bytes = (self.n_max as usize).div_ceil(8);
        let mut buf = Vec::with_capacity(8 + n_bytes);
        buf.extend_from_slice(&self.n_max.to_le_bytes());
        for i in 0..n_bytes {
            let word = self.words[i / 8];
            buf.push((word >> (8 * (i % 8))) as u8);
        }
        let mut file = fs::File::create(path)?;
        file.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let mut file = fs::File::open(path)?;
        let mut header = [0u8; 8];
        file.read_exact(&mut header)
            .map_err(|_| Error::Format(format!("{}: missing 8-byte header", path.display())))?;
        let n_max = u64::from_le_bytes(header);
        if n_max == 0 {
            return Err(Error::Format(format!("{}: n_max must be >= 1", path.display())));
        }
        let n_bytes = (n_max as usize).div_ceil(8);
        let mut bytes = vec![0u8; n_bytes];
        file.read_exact(&mut bytes)
            .map_err(|_| Error::Format(format!("{}: expected {n_bytes} payload bytes", path.display())))?;
        let mut words = vec![0u64; (n_max as usize).div_ceil(64)];
        for (i, b) in bytes.iter().enumerate() {
            words[i / 8] |= (*b as u64) << (8 * (i % 8));
        }
        // bits past n_max must be zero so count() stays honest
        let tail = n_max % 64;
        if tail != 0 {
            let last = words.len() - 1;
            if words[last] >> tail != 0 {
                return Err(Error::Format(format!("{}: set bits beyond n_max", path.display())));
            }
        }
        Ok(Bitmask { n_max, words, label: path.display().to_string() })
    }
}

/// Block ranges [2^(2^n), floor(2^(2^n) sqrt2)] for n >= 4 that fit in u64.
/// The right endpoint is the exact integer floor, via isqrt(2^(2*2^n + 1)).
fn double_exp_ranges() -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    for n in 4u32.. {
        let e = 1u32 << n; // 2^n
        if e > 63 {
            break;
        }
        let lo = 1u64 << e;
        let hi = primes::isqrt_u128(1u128 << (2 * e + 1)) as u64;
        out.push((lo, hi));
    }
    out
}

/// Scale/valuation pairs (E, v) with membership n in (2^(E/2), 2^E],
/// v2(n) = v, for l <= k <= k_max and E = 5^(k^2+l) reachable from u64.
fn valuation_blocks(k_max: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for k in 1..=k_max {
        for l in 1..=k {
            let ex = k * k + l;
            // need 2^(E/2) <= u64::MAX, i.e. E <= 127
            let mut e: u128 = 1;
            for _ in 0..ex {
                e *= 5;
                if e > 127 {
                    break;
                }
            }
            if e <= 127 {
                out.push((e as u32, 2 * l - 1));
            }
        }
    }
    out
}

#[inline]
fn v2(n: u64) -> u32 {
    debug_assert!(n >= 1);
    n.trailing_zeros()
}

/// An integer set with O(1) deterministic membership.
#[derive(Clone)]
pub enum SetSpec {
    All,
    /// n = residue (mod modulus).
    Residue { modulus: u64, residue: u64 },
    /// Union of [2^(2^n), 2^(2^n) sqrt2) blocks, n >= 4.
    DoubleExpBlocks,
    /// Union over l <= k <= k_max of {v2(n) = 2l-1} inside (2^(E/2), 2^E],
    /// E = 5^(k^2+l).
    ValuationBlocks { k_max: u32 },
    /// n with an even number of prime factors (with multiplicity).
    MultEven,
    /// {p + shift : p prime}.
    PrimesShifted { shift: i64 },
    Bitmask(Arc<Bitmask>),
    Custom(Arc<dyn Fn(u64) -> bool + Send + Sync>),
}

impl fmt::Debug for SetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetSpec::Custom(_) => write!(f, "Custom(..)"),
            other => write!(f, "{other}"),
        }
    }
}

impl SetSpec {
    #[inline]
    pub fn contains(&self, n: u64) -> bool {
        if n == 0 {
            return false;
        }
        match self {
            SetSpec::All => true,
            SetSpec::Residue { modulus, residue } => n % modulus == *residue,
            SetSpec::DoubleExpBlocks => {
                double_exp_ranges().iter().any(|&(lo, hi)| n >= lo && n <= hi)
            }
            SetSpec::ValuationBlocks { k_max } => {
                let val = v2(n);
                valuation_blocks(*k_max).iter().any(|&(e, v)| {
                    val == v
                        && (e >= 64 || n <= 1u64 << e)
                        && (n as u128) * (n as u128) >= 1u128 << e
                })
            }
            SetSpec::MultEven => primes::liouville(n) == 1,
            SetSpec::PrimesShifted { shift } => {
                let t = n as i128 - *shift as i128;
                t >= 2 && t <= u64::MAX as i128 && primes::is_prime_u64(t as u64)
            }
            SetSpec::Bitmask(mask) => mask.contains(n),
            SetSpec::Custom(pred) => pred(n),
        }
    }

    /// Membership for arguments that may exceed 64 bits; only kinds with
    /// modular or trivial membership support this, others refuse.
    pub fn contains_wide(&self, n: u128) -> Result<bool> {
        if n == 0 {
            return Ok(false);
        }
        if let Ok(small) = u64::try_from(n) {
            return Ok(self.contains(small));
        }
        match self {
            SetSpec::All => Ok(true),
            SetSpec::Residue { modulus, residue } => Ok(n % *modulus as u128 == *residue as u128),
            _ => Err(Error::Overflow(format!(
                "membership argument {n} exceeds 64 bits for set {self}"
            ))),
        }
    }

    /// Exact period of the indicator, when one exists.
    pub fn period(&self) -> Option<u64> {
        match self {
            SetSpec::All => Some(1),
            SetSpec::Residue { modulus, .. } => Some(*modulus),
            _ => None,
        }
    }

    /// Checks that averaging the indicator over [1, max_n] is affordable.
    pub fn validate_to(&self, max_n: u64) -> Result<()> {
        match self {
            SetSpec::MultEven => primes::liouville_table(max_n).map(|_| ()),
            SetSpec::Bitmask(mask) => {
                if mask.n_max() < max_n {
                    Err(Error::param(format!(
                        "bitmask covers [1, {}] but the average needs [1, {max_n}]",
                        mask.n_max()
                    )))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Materializes membership over [1, n_max]. For `DoubleExpBlocks` this is
    /// the canonical constructor at a finite scale; scales below 2^16 yield
    /// an empty mask (first block starts at 65536).
    pub fn to_bitmask(&self, n_max: u64) -> Result<Bitmask> {
        if n_max == 0 {
            return Err(Error::param("bitmask needs n_max >= 1"));
        }
        self.validate_to(n_max)?;
        let mut words = vec![0u64; (n_max as usize).div_ceil(64)];
        match self {
            // block structure beats the n-loop when blocks are sparse
            SetSpec::DoubleExpBlocks => {
                for (lo, hi) in double_exp_ranges() {
                    let (lo, hi) = (lo.max(1), hi.min(n_max));
                    for n in lo..=hi {
                        words[((n - 1) / 64) as usize] |= 1u64 << ((n - 1) % 64);
                    }
                }
            }
            _ => {
                for n in 1..=n_max {
                    if self.contains(n) {
                        words[((n - 1) / 64) as usize] |= 1u64 << ((n - 1) % 64);
                    }
                }
            }
        }
        Ok(Bitmask { n_max, words, label: format!("{self}@{n_max}") })
    }
}

impl fmt::Display for SetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetSpec::All => write!(f, "all"),
            SetSpec::Residue { modulus, residue } => write!(f, "residue:{modulus},{residue}"),
            SetSpec::DoubleExpBlocks => write!(f, "double-exp-blocks"),
            SetSpec::ValuationBlocks { k_max } => write!(f, "valuation-blocks:{k_max}"),
            SetSpec::MultEven => write!(f, "mult-even"),
            SetSpec::PrimesShifted { shift } => write!(f, "primes-shifted:{shift}"),
            SetSpec::Bitmask(mask) => write!(f, "file:{}", mask.label),
            SetSpec::Custom(_) => write!(f, "custom"),
        }
    }
}

impl Serialize for SetSpec {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl FromStr for SetSpec {
    type Err = Error;

    /// `all`, `evens`, `odds`, `residue:M,R`, `double-exp-blocks`,
    /// `valuation-blocks[:KMAX]`, `mult-even`, `primes-shifted:C`,
    /// `file:PATH`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t {
            "all" => return Ok(SetSpec::All),
            "evens" => return Ok(SetSpec::Residue { modulus: 2, residue: 0 }),
            "odds" => return Ok(SetSpec::Residue { modulus: 2, residue: 1 }),
            "double-exp-blocks" => return Ok(SetSpec::DoubleExpBlocks),
            "valuation-blocks" => return Ok(SetSpec::ValuationBlocks { k_max: 3 }),
            "mult-even" | "multiplicatively-even" => return Ok(SetSpec::MultEven),
            _ => {}
        }
        if let Some(rest) = t.strip_prefix("residue:") {
            let (m, r) = rest
                .split_once(',')
                .ok_or_else(|| Error::param("residue set needs 'modulus,residue'"))?;
            let modulus: u64 = m.trim().parse().map_err(|_| Error::param(format!("bad modulus '{m}'")))?;
            let residue: u64 = r.trim().parse().map_err(|_| Error::param(format!("bad residue '{r}'")))?;
            if modulus == 0 || residue >= modulus {
                return Err(Error::param("residue set needs modulus >= 1 and residue < modulus"));
            }
            return Ok(SetSpec::Residue { modulus, residue });
        }
        if let Some(rest) = t.strip_prefix("valuation-blocks:") {
            let k_max: u32 = rest
                .trim()
                .parse()
                .map_err(|_| Error::param(format!("bad k_max '{rest}'")))?;
            if k_max == 0 {
                return Err(Error::param("valuation-blocks needs k_max >= 1"));
            }
            return Ok(SetSpec::ValuationBlocks { k_max });
        }
        if let Some(rest) = t.strip_prefix("primes-shifted:") {
            let shift: i64 = rest
                .trim()
                .parse()
                .map_err(|_| Error::param(format!("bad shift '{rest}'")))?;
            return Ok(SetSpec::PrimesShifted { shift });
        }
        if let Some(rest) = t.strip_prefix("file:") {
            return Ok(SetSpec::Bitmask(Arc::new(Bitmask::read_from(Path::new(rest.trim()))?)));
        }
        Err(Error::param(format!("cannot parse set spec '{s}'")))
    }
}

/// True iff every pair 1 <= x, y <= bound with v2(x+y) = v2(xy) has that
/// common valuation even. Equal valuations force v2(x) = v2(y) = t (else the
/// sum's valuation is the smaller summand's, below v2(x) + v2(y)), and then
/// v2(xy) = 2t.
pub fn valuation_obstruction_check(bound: u64) -> Result<bool> {
    if bound < 2 {
        return Err(Error::param("obstruction check needs bound >= 2"));
    }
    if bound.saturating_mul(bound) > avg::EVAL_BUDGET {
        return Err(Error::CostGuard {
            what: "valuation obstruction pair scan",
            needed: bound.saturating_mul(bound),
            budget: avg::EVAL_BUDGET,
        });
    }
    for x in 1..=bound {
        for y in 1..=bound {
            if v2(x + y) == v2(x * y) && v2(x + y) % 2 == 1 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// A witnessed configuration: both x + Q(y) and x*y lie in the set.
#[derive(Clone, Copy, Debug, Serialize, PartialEq, Eq)]
pub struct PatternHit {
    pub x: u64,
    pub y: u64,
    pub sum: u64,
    pub product: u64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PatternConstraints {
    /// Both x and y must be >= this (2 excludes the x = y = 1 trivia).
    pub min_xy: u64,
    /// Require x + Q(y) != x*y (drops the {4} singleton at x = y = 2).
    pub require_distinct: bool,
}

impl Default for PatternConstraints {
    fn default() -> Self {
        PatternConstraints { min_xy: 2, require_distinct: true }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PatternReport {
    pub set: String,
    pub poly: String,
    pub x_range: (u64, u64),
    pub y_range: (u64, u64),
    pub n_max: u64,
    pub constraints: PatternConstraints,
    pub total_hits: u64,
    /// First hits in scan order, capped; total_hits counts all of them.
    pub hits: Vec<PatternHit>,
    pub pairs_scanned: u64,
    pub overflow_skips: u64,
}

const MAX_STORED_HITS: usize = 1000;

/// Exhaustive scan for {x + Q(y), x*y} inside the set, both values required
/// to land in [1, n_max]. Pairs where Q(y) overflows i128 are skipped and
/// counted.
pub fn find_patterns(
    set: &SetSpec,
    q: &IntPolynomial,
    x_range: (u64, u64),
    y_range: (u64, u64),
    n_max: u64,
    constraints: PatternConstraints,
) -> Result<PatternReport> {
    if x_range.0 > x_range.1 || y_range.0 > y_range.1 {
        return Err(Error::param("empty pattern search range"));
    }
    if x_range.0 == 0 || y_range.0 == 0 {
        return Err(Error::param("pattern ranges start at 1"));
    }
    let y_len = y_range.1 - y_range.0 + 1;
    if y_len > 100_000_000 {
        return Err(Error::CostGuard { what: "pattern y-range", needed: y_len, budget: 100_000_000 });
    }
    // the x-loop breaks once both values exceed n_max, so the true cost per y
    // is about n_max / y; refuse only on the post-break estimate
    let mut est: u128 = 0;
    for y in y_range.0..=y_range.1 {
        let x_len = (x_range.1 - x_range.0 + 1) as u128;
        est += x_len.min((n_max / y) as u128 + 2);
        if est > avg::EVAL_BUDGET as u128 {
            return Err(Error::CostGuard {
                what: "pattern pair scan",
                needed: u64::MAX,
                budget: avg::EVAL_BUDGET,
            });
        }
    }

    let mut report = PatternReport {
        set: set.to_string(),
        poly: q.to_string(),
        x_range,
        y_range,
        n_max,
        constraints,
        total_hits: 0,
        hits: Vec::new(),
        pairs_scanned: 0,
        overflow_skips: 0,
    };
    for y in y_range.0.max(constraints.min_xy)..=y_range.1 {
        let qy = match q.eval_checked(y as i128) {
            Some(v) => v,
            None => {
                report.overflow_skips += (x_range.1 - x_range.0 + 1).max(1);
                continue;
            }
        };
        for x in x_range.0.max(constraints.min_xy)..=x_range.1 {
            report.pairs_scanned += 1;
            let sum = x as i128 + qy;
            let product = x as u128 * y as u128;
            if product > n_max as u128 && sum > n_max as i128 {
                break;
            }
            if sum < 1 || sum > n_max as i128 || product > n_max as u128 {
                continue;
            }
            let (sum, product) = (sum as u64, product as u64);
            if constraints.require_distinct && sum == product {
                continue;
            }
            if set.contains(sum) && set.contains(product) {
                report.total_hits += 1;
                if report.hits.len() < MAX_STORED_HITS {
                    report.hits.push(PatternHit { x, y, sum, product });
                }
            }
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct DensityReport {
    pub set: String,
    pub cutoffs: Vec<u64>,
    pub counts: Vec<u64>,
    pub cesaro: Vec<f64>,
    pub logarithmic: Vec<f64>,
}

/// Cesaro and logarithmic densities of the set along the ladder, one pass.
/// The logarithmic value divides by the same-pass harmonic sum, so the full
/// set reports exactly 1.
pub fn density_report(set: &SetSpec, ladder: &crate::avg::TruncationLadder) -> Result<DensityReport> {
    let top = ladder.top();
    if top > avg::EVAL_BUDGET {
        return Err(Error::CostGuard { what: "density scan", needed: top, budget: avg::EVAL_BUDGET });
    }
    set.validate_to(top)?;
    let mut report = DensityReport {
        set: set.to_string(),
        cutoffs: ladder.cutoffs().to_vec(),
        counts: Vec::new(),
        cesaro: Vec::new(),
        logarithmic: Vec::new(),
    };
    let mut count = 0u64;
    let mut num = Kahan::new();
    let mut den = Kahan::new();
    let mut next = 0usize;
    for n in 1..=top {
        let w = 1.0 / n as f64;
        if set.contains(n) {
            count += 1;
            num.add(w);
        }
        den.add(w);
        while next < report.cutoffs.len() && report.cutoffs[next] == n {
            report.counts.push(count);
            report.cesaro.push(count as f64 / n as f64);
            report.logarithmic.push(num.value() / den.value());
            next += 1;
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct DsharpReport {
    pub set: String,
    pub chain: Vec<u64>,
    pub multiplier_cap: u64,
    pub scale: u64,
    pub value: f64,
    /// Chain entry and multiple attaining the min-max.
    pub witness_divisor: u64,
    pub witness_multiple: u64,
    /// max over multiples, per chain entry (diagnostic).
    pub per_divisor_max: Vec<f64>,
}

/// Finite-scale dilation-invariant density: min over chain entries a_j of the
/// max over m in {a_j, 2 a_j, ..., cap*a_j} of the top-scale logarithmic
/// average of 1_A(m n). Shrinking under more dilations mirrors the infinite
/// definition's infimum; the value is monotone in the set.
pub fn dsharp_estimate(
    set: &SetSpec,
    ladder: &crate::avg::TruncationLadder,
    chain: &[u64],
    multiplier_cap: u64,
) -> Result<DsharpReport> {
    if chain.is_empty() {
        return Err(Error::param("divisibility chain must be nonempty"));
    }
    if multiplier_cap == 0 {
        return Err(Error::param("multiplier cap must be >= 1"));
    }
    for w in chain.windows(2) {
        if w[0] == 0 || w[1] % w[0] != 0 {
            return Err(Error::param(format!("chain entry {} does not divide {}", w[0], w[1])));
        }
    }
    if chain[0] == 0 {
        return Err(Error::param("chain entries must be >= 1"));
    }
    let n_top = ladder.top();
    let m_max = chain
        .last()
        .unwrap()
        .checked_mul(multiplier_cap)
        .ok_or_else(|| Error::Overflow("multiplier cap overflows".into()))?;
    if m_max.checked_mul(n_top).is_none() {
        return Err(Error::Overflow(format!("dilate {m_max} * {n_top} exceeds u64")));
    }
    let work = chain.len() as u64 * multiplier_cap * n_top;
    if work > avg::EVAL_BUDGET {
        return Err(Error::CostGuard { what: "dsharp scan", needed: work, budget: avg::EVAL_BUDGET });
    }
    set.validate_to(m_max * n_top)?;

    let mut report = DsharpReport {
        set: set.to_string(),
        chain: chain.to_vec(),
        multiplier_cap,
        scale: n_top,
        value: f64::INFINITY,
        witness_divisor: 0,
        witness_multiple: 0,
        per_divisor_max: Vec::new(),
    };
    for &a in chain {
        let mut best = f64::NEG_INFINITY;
        let mut best_m = a;
        for t in 1..=multiplier_cap {
            let m = a * t;
            let mut num = Kahan::new();
            let mut den = Kahan::new();
            for n in 1..=n_top {
                let w = 1.0 / n as f64;
                if set.contains(m * n) {
                    num.add(w);
                }
                den.add(w);
            }
            let v = num.value() / den.value();
            if v > best {
                best = v;
                best_m = m;
            }
        }
        report.per_divisor_max.push(best);
        if best < report.value {
            report.value = best;
            report.witness_divisor = a;
            report.witness_multiple = best_m;
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct CorrelationReport {
    pub set: String,
    pub poly: String,
    pub k: u32,
    pub w: u64,
    pub prime_cutoff: u64,
    pub inner_scale: u64,
    pub a: u64,
    pub v: u64,
    pub value: f64,
    pub block_len: usize,
    pub distinct_products: usize,
    pub path: &'static str,
}

fn factorial(k: u32) -> u64 {
    (1..=k as u64).product::<u64>().max(1)
}

/// Distinct k-fold products of block primes with their ordered-tuple counts
/// (k! over the run-length factorials of the sorted tuple).
pub(crate) fn enumerate_products(primes: &[u64], k: u32) -> Vec<(u64, u64)> {
    fn rec(
        primes: &[u64],
        k: u32,
        start: usize,
        prod: u64,
        stack: &mut Vec<usize>,
        out: &mut Vec<(u64, u64)>,
    ) {
        if stack.len() == k as usize {
            let mut count = factorial(k);
            let mut run = 1u32;
            for i in 1..stack.len() {
                if stack[i] == stack[i - 1] {
                    run += 1;
                } else {
                    count /= factorial(run);
                    run = 1;
                }
            }
            count /= factorial(run);
            out.push((prod, count));
            return;
        }
        for i in start..primes.len() {
            stack.push(i);
            rec(primes, k, i, prod * primes[i], stack, out);
            stack.pop();
        }
    }
    let mut out = Vec::new();
    let mut stack: Vec<usize> = Vec::with_capacity(k as usize);
    rec(primes, k, 0, 1, &mut stack, &mut out);
    out
}

/// Nested logarithmic average, over k-fold products P = p_k...p_1 of block
/// primes and then over n <= N, of 1_A(a*n + Q(v*P)) * 1_A(a*v*P*n).
///
/// Dispatch: the multiplicatively-even set factors through lambda's complete
/// multiplicativity (tables only up to a*N + max Q(v*P)); bitmask sets stop
/// the inner loop once a*v*P*n leaves the mask; everything else evaluates
/// membership directly with 128-bit arguments.
pub fn iterated_affine_correlation(
    set: &SetSpec,
    q: &IntPolynomial,
    k: u32,
    w: u64,
    m: u64,
    n: u64,
    a: u64,
    v: u64,
) -> Result<CorrelationReport> {
    if k == 0 || a == 0 || v == 0 || n == 0 {
        return Err(Error::param("correlation needs k, a, v, N >= 1"));
    }
    if k as f64 * (m.max(2) as f64).log2() > 62.0 {
        return Err(Error::Overflow(format!("products of {k} primes up to {m} exceed u64")));
    }
    let block = primes::sieve_block(w, m)?;
    if block.is_empty() {
        return Err(Error::param(format!("no primes = 1 mod {w} up to {m}")));
    }
    let products = enumerate_products(block.primes(), k);
    let work = products.len() as u64 * n;
    if work > avg::EVAL_BUDGET {
        return Err(Error::CostGuard { what: "correlation inner loops", needed: work, budget: avg::EVAL_BUDGET });
    }

    // shift arguments c = Q(v*P); their range decides table sizes and overflow
    let mut shifts = Vec::with_capacity(products.len());
    let mut max_shift: i128 = 0;
    for &(p, _) in &products {
        let arg = v as i128 * p as i128;
        let c = q
            .eval_checked(arg)
            .ok_or_else(|| Error::Overflow(format!("Q({arg}) overflows i128")))?;
        max_shift = max_shift.max(c);
        shifts.push(c);
    }
    let max_sum_arg = a as i128 * n as i128 + max_shift;

    enum Path {
        LiouvilleEven { table: Arc<Vec<i8>>, sign_av: i8 },
        Bitmask(Arc<Bitmask>),
        Direct,
    }
    let path = match set {
        SetSpec::MultEven => {
            let needed = u64::try_from(max_sum_arg.max(n as i128))
                .map_err(|_| Error::Overflow("shift argument exceeds u64".into()))?;
            let table = primes::liouville_table(needed.max(a * v))?;
            let sign_av = table[a as usize] * table[v as usize];
            Path::LiouvilleEven { table, sign_av }
        }
        SetSpec::Bitmask(mask) => Path::Bitmask(mask.clone()),
        _ => Path::Direct,
    };
    let path_name = match path {
        Path::LiouvilleEven { .. } => "liouville-factorization",
        Path::Bitmask(_) => "bitmask-early-stop",
        Path::Direct => "direct",
    };

    let mut outer_num = Kahan::new();
    let mut outer_den = Kahan::new();
    for (idx, &(p, ordered)) in products.iter().enumerate() {
        let weight = ordered as f64 / p as f64;
        let c = shifts[idx];
        let inner = match &path {
            Path::LiouvilleEven { table, sign_av } => {
                // 1_A(m) = (1 + lambda(m))/2 and lambda(a v P n) splits
                let sign_p: i8 = if k % 2 == 0 { 1 } else { -1 };
                let s = sign_av * sign_p;
                let mut num = Kahan::new();
                let mut den = Kahan::new();
                for i in 1..=n {
                    let wgt = 1.0 / i as f64;
                    den.add(wgt);
                    let sum_arg = a as i128 * i as i128 + c;
                    if sum_arg >= 1
                        && table[sum_arg as usize] == 1
                        && s * table[i as usize] == 1
                    {
                        num.add(wgt);
                    }
                }
                num.value() / den.value()
            }
            Path::Bitmask(mask) => {
                let dilate = a as u128 * v as u128 * p as u128;
                let stop = (mask.n_max() as u128 / dilate) as u64;
                let mut num = Kahan::new();
                for i in 1..=n.min(stop) {
                    let sum_arg = a as i128 * i as i128 + c;
                    if sum_arg >= 1
                        && sum_arg <= mask.n_max() as i128
                        && mask.contains(sum_arg as u64)
                        && mask.contains((dilate * i as u128) as u64)
                    {
                        num.add(1.0 / i as f64);
                    }
                }
                num.value() / avg::harmonic_value(n)
            }
            Path::Direct => {
                let dilate = a as u128 * v as u128 * p as u128;
                let mut num = Kahan::new();
                let mut den = Kahan::new();
                for i in 1..=n {
                    let wgt = 1.0 / i as f64;
                    den.add(wgt);
                    let sum_arg = a as i128 * i as i128 + c;
                    if sum_arg < 1 {
                        continue;
                    }
                    if set.contains_wide(sum_arg as u128)? && set.contains_wide(dilate * i as u128)? {
                        num.add(wgt);
                    }
                }
                num.value() / den.value()
            }
        };
        outer_num.add(weight * inner);
        outer_den.add(weight);
    }

    Ok(CorrelationReport {
        set: set.to_string(),
        poly: q.to_string(),
        k,
        w,
        prime_cutoff: m,
        inner_scale: n,
        a,
        v,
        value: outer_num.value() / outer_den.value(),
        block_len: block.len(),
        distinct_products: products.len(),
        path: path_name,
    })
}
