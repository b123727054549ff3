//! Prime blocks and multiplicative bookkeeping.
//!
//! A block is the finite set `{p prime : p <= M, p = 1 (mod W)}`. Blocks are
//! produced by a segmented, bit-packed sieve of Eratosthenes and cached per
//! (W, M) for the lifetime of the process, since the same block typically
//! feeds several averaging passes.
//!
//! The module also owns the Liouville table lambda(n) = (-1)^Omega(n),
//! grown on demand: every prime power q flips the sign of its multiples, so
//! the build costs sum_q len/q ~ len log log len sign flips.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use crate::avg::Kahan;
use crate::error::{Error, Result};

/// A cached set of primes `p <= m` with `p = 1 (mod w)`.
#[derive(Clone, Debug)]
pub struct PrimeBlock {
    w: u64,
    m: u64,
    primes: Arc<Vec<u64>>,
}

impl PrimeBlock {
    pub fn w(&self) -> u64 {
        self.w
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn len(&self) -> usize {
        self.primes.len()
    }

    /// Empty blocks are legal (M below the smallest member of the
    /// progression); callers that cannot average over nothing must check.
    pub fn is_empty(&self) -> bool {
        self.primes.is_empty()
    }

    pub fn max_prime(&self) -> Option<u64> {
        self.primes.iter().max().copied()
    }

    /// Assembles a block from an explicit prime list, in the given order.
    /// Every entry must be a prime p <= m with p = 1 (mod w). Averages over a
    /// block are sums, so results must not depend on the ordering; tests
    /// exercise exactly that by permuting the list.
    pub fn from_parts(w: u64, m: u64, primes: Vec<u64>) -> Result<Self> {
        if w == 0 {
            return Err(Error::param("progression modulus W must be >= 1"));
        }
        let target = 1 % w;
        for &p in &primes {
            if !is_prime_u64(p) {
                return Err(Error::param(format!("{p} is not prime")));
            }
            if p > m {
                return Err(Error::param(format!("prime {p} exceeds cutoff M = {m}")));
            }
            if p % w != target {
                return Err(Error::param(format!("prime {p} is not 1 mod {w}")));
            }
        }
        Ok(PrimeBlock { w, m, primes: Arc::new(primes) })
    }
}

/// Builds (or fetches from the process cache) the block `P_W intersect [M]`.
///
/// Preconditions: `w >= 1`, `m >= 2`. An empty result is allowed.
pub fn sieve_block(w: u64, m: u64) -> Result<PrimeBlock> {
    if w == 0 {
        return Err(Error::param("progression modulus W must be >= 1"));
    }
    if m < 2 {
        return Err(Error::param(format!("sieve cutoff M = {m} must be >= 2")));
    }
    let cache = block_cache();
    if let Some(primes) = cache.read().unwrap().get(&(w, m)) {
        return Ok(PrimeBlock { w, m, primes: Arc::clone(primes) });
    }
    let target = 1 % w;
    let mut primes = Vec::new();
    sieve_segmented(m, |p| {
        if p % w == target {
            primes.push(p);
        }
    });
    let primes = Arc::new(primes);
    cache.write().unwrap().insert((w, m), Arc::clone(&primes));
    Ok(PrimeBlock { w, m, primes })
}

/// sum_{p in block} 1/p, compensated.
pub fn mertens_reciprocal_sum(block: &PrimeBlock) -> f64 {
    let mut s = Kahan::default();
    for &p in block.primes() {
        s.add(1.0 / p as f64);
    }
    s.value()
}

/// sum_{p in block} log(p)/p, compensated. For W = 1 this stays below
/// log M + 2 for every M (tested exhaustively at the prime jump points).
pub fn mertens_log_sum(block: &PrimeBlock) -> f64 {
    let mut s = Kahan::default();
    for &p in block.primes() {
        let pf = p as f64;
        s.add(pf.ln() / pf);
    }
    s.value()
}

fn block_cache() -> &'static RwLock<HashMap<(u64, u64), Arc<Vec<u64>>>> {
    static CACHE: OnceLock<RwLock<HashMap<(u64, u64), Arc<Vec<u64>>>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

const SEGMENT_BITS: usize = 1 << 18; // odd numbers per segment, 32 KiB of bits

/// Segmented sieve over odd numbers; `emit` receives every prime <= m in
/// increasing order.
fn sieve_segmented(m: u64, mut emit: impl FnMut(u64)) {
    if m < 2 {
        return;
    }
    emit(2);
    if m < 3 {
        return;
    }
    let root = isqrt_u64(m);
    let base = simple_odd_primes(root.max(3));
    let mut words = vec![0u64; SEGMENT_BITS / 64];
    let m_top = (m - 1) | 1; // largest odd <= m
    let mut low: u64 = 3; // first odd represented by bit 0 of the segment
    while low <= m_top {
        // largest odd covered by this segment (low is odd, offset even)
        let high = (low + (2 * SEGMENT_BITS as u64 - 2)).min(m_top);
        for w in words.iter_mut() {
            *w = 0;
        }
        for &p in &base {
            if p * p > high {
                break;
            }
            // first odd multiple of p in [low, high], at least p*p
            let mut start = p * p;
            if start < low {
                let k = (low + p - 1) / p;
                start = k * p;
                if start % 2 == 0 {
                    start += p;
                }
            }
            let mut j = (start - low) / 2;
            let limit = (high - low) / 2;
            while j <= limit {
                words[(j / 64) as usize] |= 1u64 << (j % 64);
                j += p;
            }
        }
        let limit = (high - low) / 2;
        for j in 0..=limit {
            if words[(j / 64) as usize] & (1u64 << (j % 64)) == 0 {
                let n = low + 2 * j;
                if n >= 3 {
                    emit(n);
                }
            }
        }
        low = high + 2;
    }
}

/// Plain odd-only sieve for the base primes (limit ~ sqrt of the real target).
fn simple_odd_primes(limit: u64) -> Vec<u64> {
    if limit < 3 {
        return Vec::new();
    }
    let n_odds = ((limit - 3) / 2 + 1) as usize;
    let mut composite = vec![false; n_odds];
    let mut primes = Vec::new();
    for i in 0..n_odds {
        if !composite[i] {
            let p = 3 + 2 * i as u64;
            primes.push(p);
            let mut j = (p * p - 3) / 2;
            while (j as usize) < n_odds {
                composite[j as usize] = true;
                j += p;
            }
        }
    }
    primes
}

pub(crate) fn isqrt_u64(n: u64) -> u64 {
    if n == 0 {
        return 0;
    }
    let mut x = (n as f64).sqrt() as u64;
    // float sqrt can be off by one in either direction near perfect squares
    while x.checked_mul(x).map_or(true, |s| s > n) {
        x -= 1;
    }
    while (x + 1).checked_mul(x + 1).map_or(false, |s| s <= n) {
        x += 1;
    }
    x
}

pub(crate) fn isqrt_u128(n: u128) -> u128 {
    if n == 0 {
        return 0;
    }
    // Newton iteration from a float seed; converges in a handful of steps.
    let mut x = (n as f64).sqrt() as u128 + 1;
    loop {
        let y = (x + n / x) / 2;
        if y >= x {
            break;
        }
        x = y;
    }
    while x.checked_mul(x).map_or(true, |s| s > n) {
        x -= 1;
    }
    x
}

/// Deterministic Miller-Rabin for u64 (the standard 12-witness set decides
/// all 64-bit integers). Used as the primality oracle independent of the
/// sieve, and for membership in shifted prime sets.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut r = 0u32;
    while d % 2 == 0 {
        d /= 2;
        r += 1;
    }
    'witness: for &a in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..r {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc: u64 = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Hard ceiling for the Liouville table; 2e8 entries is ~200 MB and beyond
/// anything the shipped experiments need. Requests above it are refused.
pub const LIOUVILLE_TABLE_CAP: u64 = 200_000_000;

static LAMBDA: OnceLock<RwLock<Arc<Vec<i8>>>> = OnceLock::new();

fn lambda_lock() -> &'static RwLock<Arc<Vec<i8>>> {
    LAMBDA.get_or_init(|| RwLock::new(Arc::new(Vec::new())))
}

/// Returns a table `t` with `t[n] = lambda(n)` for `1 <= n <= min_len`
/// (`t[0] = 0` is a sentinel). Grows geometrically; refuses past the cap.
pub fn liouville_table(min_len: u64) -> Result<Arc<Vec<i8>>> {
    if min_len > LIOUVILLE_TABLE_CAP {
        return Err(Error::CostGuard {
            what: "liouville table length",
            needed: min_len,
            budget: LIOUVILLE_TABLE_CAP,
        });
    }
    {
        let guard = lambda_lock().read().unwrap();
        if guard.len() as u64 > min_len {
            return Ok(Arc::clone(&guard));
        }
    }
    let mut guard = lambda_lock().write().unwrap();
    if guard.len() as u64 > min_len {
        return Ok(Arc::clone(&guard));
    }
    let len = min_len
        .max(2 * guard.len() as u64)
        .max(1 << 16)
        .min(LIOUVILLE_TABLE_CAP);
    let mut table = vec![1i8; len as usize + 1];
    table[0] = 0;
    sieve_segmented(len, |p| {
        let mut q = p;
        loop {
            let mut m = q;
            while m <= len {
                table[m as usize] = -table[m as usize];
                m += q;
            }
            match q.checked_mul(p) {
                Some(next) if next <= len => q = next,
                _ => break,
            }
        }
    });
    *guard = Arc::new(table);
    Ok(Arc::clone(&guard))
}

/// lambda(n) for a single argument. Grows the shared table; panics past the
/// hard cap (run `liouville_table` first for a polite refusal).
pub fn liouville(n: u64) -> i8 {
    let table = liouville_table(n).expect("liouville argument beyond table cap");
    table[n as usize]
}
