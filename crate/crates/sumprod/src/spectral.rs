//! Correlation sequences and their spectral side.
//!
//! For a bounded arithmetic function f the logarithmic autocorrelations
//!
//! ```text
//!     phi(m) = E^log_{n <= N} f(n) conj(f(n + m)),    0 <= m <= L,
//! ```
//!
//! approximate a positive definite sequence: the Toeplitz matrices
//! `[phi(i - j)]` are positive semidefinite up to a truncation defect of
//! order `L/N + 1/H(N)`.  [`herglotz_psd_check`] certifies this
//! numerically, [`rational_mass`] averages `phi` along an arithmetic
//! progression of lags (reading off the weight the limiting spectral
//! measure places near rationals with denominator q), and
//! [`isometry_identity_gap`] compares `E^log |sum_i c_i f(n + m_i)|^2`
//! against the same quadratic form in phi.
//!
//! Independently of correlations, [`prime_exp_sum`] averages
//! `e(Q(p) alpha)` over sieved prime blocks, with harmonic or uniform
//! weights over the block.

use num_complex::Complex64;
use serde::Serialize;

use crate::avg::{harmonic, Kahan, KahanComplex, EVAL_BUDGET};
use crate::error::{Error, Result};
use crate::poly::RationalPoly;
use crate::primes::sieve_block;
use crate::seq::{Alpha, SequenceSpec};

/// Largest Toeplitz order the eigenvalue check accepts.  Past this size
/// the order * eps_num tolerance outgrows any usable signal.
pub const MAX_PSD_ORDER: usize = 64;

/// Correlations are evaluated from a buffered table of f when the table
/// fits; past this length each term evaluates f on the fly.
const CORR_BUFFER_CAP: u64 = 1 << 24;

/// Autocorrelations phi(0..=max_lag) of one sequence at one scale,
/// together with the numerical defect budget eps_num that every
/// downstream positivity statement is measured against.
#[derive(Debug, Clone, Serialize)]
pub struct CorrelationSequence {
    f: SequenceSpec,
    n: u64,
    max_lag: u64,
    values: Vec<Complex64>,
    eps_num: f64,
}

impl CorrelationSequence {
    pub fn f(&self) -> &SequenceSpec {
        &self.f
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn max_lag(&self) -> u64 {
        self.max_lag
    }

    /// phi(0), ..., phi(max_lag) in lag order.
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Truncation defect 2 b^2 (L/N + 1/H(N)) absorbing both the lag
    /// window hanging past N and the harmonic normalisation drift.
    pub fn eps_num(&self) -> f64 {
        self.eps_num
    }

    /// phi at a signed lag; phi(-m) = conj(phi(m)).
    ///
    /// Panics if |m| exceeds the stored window.
    pub fn phi(&self, m: i64) -> Complex64 {
        let a = m.unsigned_abs();
        assert!(
            a <= self.max_lag,
            "lag {m} outside the computed window 0..={}",
            self.max_lag
        );
        let v = self.values[a as usize];
        if m < 0 {
            v.conj()
        } else {
            v
        }
    }
}

/// Computes phi(m) = E^log_{n <= N} f(n) conj(f(n+m)) for m = 0..=max_lag.
///
/// Requires max_lag <= n/10 so the shifted window stays dominated by the
/// unshifted one.  Each lag shares one pass with its own harmonic
/// denominator, so constant inputs give phi == 1 exactly and phi(0) is
/// real nonnegative in exact arithmetic, not just up to rounding.
pub fn correlation_sequence(f: &SequenceSpec, n: u64, max_lag: u64) -> Result<CorrelationSequence> {
    if n == 0 {
        return Err(Error::param("scale must be positive"));
    }
    if max_lag > n / 10 {
        return Err(Error::param(format!(
            "max_lag {max_lag} exceeds n/10 = {}",
            n / 10
        )));
    }
    let top = n + max_lag;
    f.validate_domain(top)?;
    let cost = (max_lag + 1).saturating_mul(n);
    if cost > EVAL_BUDGET {
        return Err(Error::CostGuard {
            what: "correlation evaluations",
            needed: cost,
            budget: EVAL_BUDGET,
        });
    }
    let table = harmonic(n)?;

    let buffer: Option<Vec<Complex64>> = if top <= CORR_BUFFER_CAP {
        Some((1..=top).map(|k| f.eval(k)).collect())
    } else {
        None
    };
    let term = |k: u64| -> Complex64 {
        match &buffer {
            Some(buf) => buf[(k - 1) as usize],
            None => f.eval(k),
        }
    };

    let mut values = Vec::with_capacity(max_lag as usize + 1);
    for m in 0..=max_lag {
        let mut num = KahanComplex::default();
        let mut den = Kahan::new();
        for k in 1..=n {
            let w = 1.0 / k as f64;
            num.add(term(k) * term(k + m).conj() * w);
            den.add(w);
        }
        values.push(num.value() / den.value());
    }

    let b = f.bound();
    let eps_num = 2.0 * b * b * (max_lag as f64 / n as f64 + 1.0 / table.value(n));
    Ok(CorrelationSequence {
        f: f.clone(),
        n,
        max_lag,
        values,
        eps_num,
    })
}

/// Outcome of the Toeplitz positivity check.
#[derive(Debug, Clone, Serialize)]
pub struct PsdReport {
    pub order: usize,
    pub min_eigenvalue: f64,
    pub tolerance: f64,
    pub psd: bool,
    /// Ascending spectrum of [phi(i-j)].
    pub eigenvalues: Vec<f64>,
}

/// Eigenvalue test of the order x order Toeplitz matrix A[i][j] = phi(i-j).
///
/// A positive definite limit forces A >= 0; at finite scale each entry
/// carries an eps_num defect, so the verdict tolerates eigenvalues down
/// to -order * eps_num.  The matrix is Hermitian by construction (phi(-m)
/// is stored as the conjugate), so the Hermitian eigensolver applies.
pub fn herglotz_psd_check(corr: &CorrelationSequence, order: usize) -> Result<PsdReport> {
    if order == 0 {
        return Err(Error::param("order must be positive"));
    }
    let avail = corr.max_lag as usize + 1;
    if order > avail {
        return Err(Error::param(format!(
            "order {order} needs lags up to {}, only {} computed",
            order - 1,
            corr.max_lag
        )));
    }
    if order > MAX_PSD_ORDER {
        return Err(Error::param(format!("order {order} exceeds {MAX_PSD_ORDER}")));
    }
    let a = nalgebra::DMatrix::from_fn(order, order, |i, j| corr.phi(i as i64 - j as i64));
    let mut eigenvalues: Vec<f64> = a.symmetric_eigen().eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(|x, y| x.partial_cmp(y).expect("real spectrum"));
    let min_eigenvalue = eigenvalues[0];
    let tolerance = order as f64 * corr.eps_num;
    Ok(PsdReport {
        order,
        min_eigenvalue,
        tolerance,
        psd: min_eigenvalue >= -tolerance,
        eigenvalues,
    })
}

/// Re (1/M) sum_{m=1..M} phi(q m): the correlation mass sitting on lags
/// divisible by q.  Values near phi(0) mean the spectral measure
/// concentrates on q-th roots of unity; values near zero mean it avoids
/// them, up to the eps_num defect.
pub fn rational_mass(corr: &CorrelationSequence, q: u64, m: u64) -> Result<f64> {
    if q == 0 || m == 0 {
        return Err(Error::param("q and M must be positive"));
    }
    let top = q
        .checked_mul(m)
        .ok_or_else(|| Error::param("q * M overflows"))?;
    if top > corr.max_lag {
        return Err(Error::param(format!(
            "q * M = {top} exceeds the computed window {}",
            corr.max_lag
        )));
    }
    let mut sum = KahanComplex::default();
    for j in 1..=m {
        sum.add(corr.phi((q * j) as i64));
    }
    Ok(sum.value().re / m as f64)
}

/// Tolerance matching [`isometry_identity_gap`]: the direct and spectral
/// sides differ by at most one eps_num defect per coefficient pair.
pub fn isometry_gap_tolerance(corr: &CorrelationSequence, coeffs: &[Complex64]) -> f64 {
    let l = coeffs.len() as f64;
    let cmax = coeffs.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
    l * l * cmax * cmax * corr.eps_num
}

/// | E^log_n |sum_i c_i f(n + m_i)|^2  -  sum_{i,j} c_i conj(c_j) phi(m_j - m_i) |.
///
/// The left side re-evaluates f directly (zero-padding f below 1 for
/// negative lags); the right side is the quadratic form the Herglotz
/// measure assigns to the same linear combination.  In the limit the two
/// agree: the map f(. + m) -> e(m theta) is an isometry.  All lags and
/// pairwise differences must fit in corr's window.
pub fn isometry_identity_gap(
    corr: &CorrelationSequence,
    lags: &[i64],
    coeffs: &[Complex64],
) -> Result<f64> {
    if lags.is_empty() || lags.len() != coeffs.len() {
        return Err(Error::param("need equally many lags and coefficients, at least one"));
    }
    let window = corr.max_lag as i64;
    for (i, &mi) in lags.iter().enumerate() {
        if mi.unsigned_abs() > window as u64 {
            return Err(Error::param(format!("lag {mi} outside window {window}")));
        }
        for &mj in &lags[i + 1..] {
            let d = mj
                .checked_sub(mi)
                .ok_or_else(|| Error::param("lag difference overflows"))?;
            if d.unsigned_abs() > window as u64 {
                return Err(Error::param(format!(
                    "lag difference {d} outside window {window}"
                )));
            }
        }
    }
    let n = corr.n;
    let cost = (lags.len() as u64 + 1).saturating_mul(n);
    if cost > EVAL_BUDGET {
        return Err(Error::CostGuard {
            what: "isometry evaluations",
            needed: cost,
            budget: EVAL_BUDGET,
        });
    }

    // Direct side, one pass.  f is zero below 1 and was validated up to
    // n + max_lag when corr was built.
    let f = &corr.f;
    let padded = |k: i64| -> Complex64 {
        if k >= 1 {
            f.eval(k as u64)
        } else {
            Complex64::new(0.0, 0.0)
        }
    };
    let mut num = Kahan::new();
    let mut den = Kahan::new();
    for k in 1..=n {
        let mut z = KahanComplex::default();
        for (&mi, &ci) in lags.iter().zip(coeffs) {
            z.add(ci * padded(k as i64 + mi));
        }
        let w = 1.0 / k as f64;
        num.add(z.value().norm_sqr() * w);
        den.add(w);
    }
    let lhs = num.value() / den.value();

    // Spectral side from the stored correlations.
    let mut rhs = KahanComplex::default();
    for (&mi, &ci) in lags.iter().zip(coeffs) {
        for (&mj, &cj) in lags.iter().zip(coeffs) {
            rhs.add(ci * cj.conj() * corr.phi(mj - mi));
        }
    }
    Ok((Complex64::new(lhs, 0.0) - rhs.value()).norm())
}

/// Weighting for averages over a prime block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AvgMode {
    /// Weight 1/p, normalised by sum_p 1/p over the whole block.
    Logarithmic,
    /// Weight 1, normalised by the block size.
    Cesaro,
}

impl std::fmt::Display for AvgMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AvgMode::Logarithmic => write!(f, "log"),
            AvgMode::Cesaro => write!(f, "cesaro"),
        }
    }
}

impl std::str::FromStr for AvgMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log" | "logarithmic" => Ok(AvgMode::Logarithmic),
            "cesaro" => Ok(AvgMode::Cesaro),
            other => Err(Error::param(format!(
                "unknown averaging mode '{other}' (expected log or cesaro)"
            ))),
        }
    }
}

/// Weighted average of e(Q(p) alpha) over the primes p <= m with
/// p == 1 mod w and p == b mod a.
///
/// The residue filter sits in the numerator only; the denominator keeps
/// the whole block, so with alpha = 0 the value is exactly the weighted
/// density of the residue class inside the block, and a = 1 gives
/// exactly 1.  Equidistribution of Q(p) alpha shows up as decay of the
/// modulus when the truncation m grows.
pub fn prime_exp_sum(
    q_poly: &RationalPoly,
    alpha: &Alpha,
    a: u64,
    b: i64,
    w: u64,
    m: u64,
    mode: AvgMode,
) -> Result<Complex64> {
    if a == 0 {
        return Err(Error::param("residue modulus a must be positive"));
    }
    if m < 2 {
        return Err(Error::param("truncation must be at least 2"));
    }
    let a_signed =
        i64::try_from(a).map_err(|_| Error::param("residue modulus a too large"))?;
    let target = b.rem_euclid(a_signed) as u64;
    let block = sieve_block(w, m)?;
    if block.is_empty() {
        return Err(Error::param(format!("no primes p <= {m} with p == 1 mod {w}")));
    }
    let alpha_q = alpha.div_u64(q_poly.denominator)?;

    let mut num = KahanComplex::default();
    let mut den = Kahan::new();
    let mut hit = false;
    for &p in block.primes() {
        let wt = match mode {
            AvgMode::Logarithmic => 1.0 / p as f64,
            AvgMode::Cesaro => 1.0,
        };
        den.add(wt);
        if p % a == target {
            hit = true;
            let value = q_poly
                .numerator
                .eval_checked(p as i128)
                .ok_or_else(|| Error::Overflow(format!("Q({p}) overflows i128")))?;
            num.add(alpha_q.e_of_multiple(value) * wt);
        }
    }
    if !hit {
        return Err(Error::param(format!(
            "no primes in the block lie in the class {target} mod {a}"
        )));
    }
    Ok(num.value() / den.value())
}
