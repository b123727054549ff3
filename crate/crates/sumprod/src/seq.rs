//! Bounded arithmetic sequences and their lazy evaluation.
//!
//! A `SequenceSpec` names a 1-bounded (or explicitly bounded) function on the
//! positive integers without materializing values: set indicators, residue
//! indicators, additive characters e(Q(n) alpha), the Liouville function, the
//! indicator of an even number of prime factors, periodic tables, and the
//! shift / dilation / linear-combination closures the averaging identities
//! need. Evaluation is deterministic and pure.
//!
//! Phases are the one numerically delicate spot. Arguments like Q(p) alpha
//! with Q(p) ~ 1e12 lose the fractional part entirely in double precision
//! (ulp(1e12 * sqrt2) ~ 2e-4), so `Alpha` keeps the fractional part of alpha
//! in 128-bit fixed point and reduces integer multiples mod 1 in integer
//! arithmetic before any trigonometry. That leaves ~2^-88 of phase accuracy
//! at multipliers up to 2^40.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigUint;
use num_complex::Complex64;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::patterns::SetSpec;
use crate::poly::IntPolynomial;
use crate::primes;

const M64: u128 = u64::MAX as u128;

/// A real phase base alpha, fractional part held as 2^-128 fixed point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Alpha {
    repr: AlphaRepr,
    neg: bool,
    int: u64,
    frac: u128,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum AlphaRepr {
    Sqrt(u64),
    Rational(i64, u64),
    Float(f64),
}

impl Alpha {
    /// sqrt(k), bits computed exactly via an integer square root of k * 2^256.
    pub fn sqrt(k: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("sqrt argument must be >= 1"));
        }
        let big = BigUint::from(k) << 256usize;
        let s = big.sqrt();
        let digits = s.to_u64_digits(); // little endian limbs
        let limb = |i: usize| digits.get(i).copied().unwrap_or(0) as u128;
        let frac = limb(0) | (limb(1) << 64);
        let int = limb(2) as u64; // k <= u64 so sqrt(k) < 2^32, limb 3 empty
        Ok(Alpha { repr: AlphaRepr::Sqrt(k), neg: false, int, frac })
    }

    pub fn rational(p: i64, q: u64) -> Result<Self> {
        if q == 0 {
            return Err(Error::param("rational alpha with zero denominator"));
        }
        let neg = p < 0;
        let a = p.unsigned_abs();
        let int = a / q;
        let frac = div_192_by_u64(a % q, 0, 0, q);
        Ok(Alpha { repr: AlphaRepr::Rational(p, q), neg, int, frac })
    }

    pub fn from_f64(x: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::param("alpha must be finite"));
        }
        let neg = x < 0.0;
        let a = x.abs();
        let int = a.trunc();
        if int >= u64::MAX as f64 {
            return Err(Error::param("alpha too large"));
        }
        // a.fract() has at most 53 significant bits; scaling by 2^128 is exact
        let frac = (a.fract() * 2f64.powi(128)) as u128;
        Ok(Alpha { repr: AlphaRepr::Float(x), neg, int: int as u64, frac })
    }

    /// alpha / d, exact in fixed point. Internal use (rational polynomials).
    pub fn div_u64(&self, d: u64) -> Result<Self> {
        if d == 0 {
            return Err(Error::param("division of alpha by zero"));
        }
        let int = self.int / d;
        let frac = div_192_by_u64(self.int % d, (self.frac >> 64) as u64, self.frac as u64, d);
        let repr = match self.repr {
            AlphaRepr::Rational(p, q) => match q.checked_mul(d) {
                Some(qd) => AlphaRepr::Rational(p, qd),
                None => AlphaRepr::Float(self.approx() / d as f64),
            },
            _ => AlphaRepr::Float(self.approx() / d as f64),
        };
        Ok(Alpha { repr, neg: self.neg, int, frac })
    }

    /// -alpha, exact.
    pub fn neg(&self) -> Self {
        let repr = match self.repr {
            AlphaRepr::Sqrt(k) => AlphaRepr::Sqrt(k),
            AlphaRepr::Rational(p, q) => AlphaRepr::Rational(-p, q),
            AlphaRepr::Float(x) => AlphaRepr::Float(-x),
        };
        Alpha { repr, neg: !self.neg, int: self.int, frac: self.frac }
    }

    /// Denominator when alpha is exactly rational (drives periodicity).
    pub fn rational_den(&self) -> Option<u64> {
        match self.repr {
            AlphaRepr::Rational(_, q) => Some(q),
            _ => None,
        }
    }

    pub fn approx(&self) -> f64 {
        let a = self.int as f64 + self.frac as f64 * 2f64.powi(-128);
        if self.neg {
            -a
        } else {
            a
        }
    }

    /// Fixed-point fractional bits of m * |alpha| (mod 1).
    pub(crate) fn frac_bits_of_multiple(&self, m: u128) -> u128 {
        // m * int is an integer, drops out mod 1
        mul_u128_mod_2_128(m, self.frac)
    }

    /// Bits of frac(m * alpha) respecting alpha's sign: negation mod 1 is the
    /// wrapping two's complement of the fixed-point bits. Lets callers add
    /// phases from different alphas exactly before any rounding.
    pub(crate) fn signed_frac_bits(&self, m: u128) -> u128 {
        let b = self.frac_bits_of_multiple(m);
        if self.neg {
            b.wrapping_neg()
        } else {
            b
        }
    }

    /// frac(m * alpha) in [0, 1).
    pub fn frac_of_multiple(&self, m: i128) -> f64 {
        let sign_neg = (m < 0) != self.neg;
        let bits = self.frac_bits_of_multiple(m.unsigned_abs());
        let theta = bits as f64 * 2f64.powi(-128);
        if sign_neg && theta > 0.0 {
            1.0 - theta
        } else if sign_neg {
            0.0
        } else {
            theta
        }
    }

    /// e(m * alpha) = exp(2 pi i m alpha).
    #[inline]
    pub fn e_of_multiple(&self, m: i128) -> Complex64 {
        unit(self.frac_of_multiple(m))
    }
}

/// e(theta) for theta in [0, 1). Quadrant reduction keeps quarter phases
/// exact: e(1/2) is (-1, 0) bitwise, not (cos pi, sin pi), so +-1-valued
/// characters telescope without residue.
#[inline]
pub(crate) fn unit(theta: f64) -> Complex64 {
    let q = (4.0 * theta).round();
    let r = theta - 0.25 * q; // |r| <= 1/8
    let (s, c) = (std::f64::consts::TAU * r).sin_cos();
    let z = Complex64::new(c, s);
    match (q as i64).rem_euclid(4) {
        0 => z,
        1 => Complex64::new(-z.im, z.re),
        2 => Complex64::new(-z.re, -z.im),
        _ => Complex64::new(z.im, -z.re),
    }
}

/// (a * b) mod 2^128 via 64-bit limbs.
fn mul_u128_mod_2_128(a: u128, b: u128) -> u128 {
    let (a_hi, a_lo) = (a >> 64, a & M64);
    let (b_hi, b_lo) = (b >> 64, b & M64);
    let low = a_lo.wrapping_mul(b_lo);
    let mid = a_lo.wrapping_mul(b_hi).wrapping_add(a_hi.wrapping_mul(b_lo));
    low.wrapping_add(mid << 64)
}

/// floor((hi * 2^128 + mid * 2^64 + lo) / d) assuming the quotient fits in
/// 128 bits (callers guarantee hi < d).
fn div_192_by_u64(hi: u64, mid: u64, lo: u64, d: u64) -> u128 {
    debug_assert!(hi < d);
    let d = d as u128;
    let cur = ((hi as u128) << 64) | mid as u128;
    let q1 = cur / d;
    let r = cur % d;
    let cur = (r << 64) | lo as u128;
    let q0 = cur / d;
    (q1 << 64) | q0
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Rational and Float reprs carry their own sign
        match self.repr {
            AlphaRepr::Sqrt(2) if self.neg => write!(f, "-sqrt2"),
            AlphaRepr::Sqrt(2) => write!(f, "sqrt2"),
            AlphaRepr::Sqrt(k) if self.neg => write!(f, "-sqrt:{k}"),
            AlphaRepr::Sqrt(k) => write!(f, "sqrt:{k}"),
            AlphaRepr::Rational(p, q) => write!(f, "{p}/{q}"),
            AlphaRepr::Float(x) => write!(f, "{x}"),
        }
    }
}

impl FromStr for Alpha {
    type Err = Error;

    /// `sqrt2`, `sqrt:K`, `P/Q`, or a decimal literal; a leading `-` negates.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if let Some(rest) = t.strip_prefix('-') {
            if rest.starts_with("sqrt") {
                return rest.parse::<Alpha>().map(|a| a.neg());
            }
        }
        if t == "sqrt2" {
            return Alpha::sqrt(2);
        }
        if let Some(k) = t.strip_prefix("sqrt:") {
            return Alpha::sqrt(k.parse().map_err(|_| Error::param(format!("bad sqrt arg '{k}'")))?);
        }
        if let Some((p, q)) = t.split_once('/') {
            let p: i64 = p.trim().parse().map_err(|_| Error::param(format!("bad rational '{t}'")))?;
            let q: u64 = q.trim().parse().map_err(|_| Error::param(format!("bad rational '{t}'")))?;
            return Alpha::rational(p, q);
        }
        Alpha::from_f64(t.parse().map_err(|_| Error::param(format!("cannot parse alpha '{t}'")))?)
    }
}

impl Serialize for Alpha {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

/// A named bounded sequence on n >= 1. Everything evaluates lazily; only the
/// `PeriodicTable` kind stores values, and those are one period, not [N].
#[derive(Clone, Debug)]
pub enum SequenceSpec {
    Const(Complex64),
    /// 0/1 membership in an integer set.
    Indicator(SetSpec),
    /// 1 when n = residue (mod modulus).
    ResidueIndicator { modulus: u64, residue: u64 },
    /// e(Q(n) alpha).
    Character { alpha: Alpha, poly: IntPolynomial },
    /// lambda(n) = (-1)^Omega(n).
    Liouville,
    /// 1 when Omega(n) is even, i.e. (1 + lambda(n))/2.
    MultEvenIndicator,
    /// f(n) = values[(n-1) mod len]; the first entry is f(1).
    PeriodicTable(Arc<Vec<Complex64>>),
    /// f(n + offset), zero where the shift leaves [1, inf).
    Shift { inner: Box<SequenceSpec>, offset: i64 },
    /// n -> factor * 1_{factor | n} * f(n / factor); the dilation-transfer
    /// companion of f. Note the bound inflates to factor * bound(f).
    Dilation { factor: u64, inner: Box<SequenceSpec> },
    /// sum_i c_i f_i(n).
    Combination(Vec<(Complex64, SequenceSpec)>),
}

impl SequenceSpec {
    pub fn constant(re: f64) -> Self {
        SequenceSpec::Const(Complex64::new(re, 0.0))
    }

    /// (-1)^n as the character e(n/2).
    pub fn alternating() -> Self {
        SequenceSpec::Character { alpha: Alpha::rational(1, 2).unwrap(), poly: IntPolynomial::identity() }
    }

    /// e(n alpha).
    pub fn linear_character(alpha: Alpha) -> Self {
        SequenceSpec::Character { alpha, poly: IntPolynomial::identity() }
    }

    #[inline]
    pub fn eval(&self, n: u64) -> Complex64 {
        match self {
            SequenceSpec::Const(c) => *c,
            SequenceSpec::Indicator(set) => {
                if set.contains(n) {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            SequenceSpec::ResidueIndicator { modulus, residue } => {
                if n % modulus == *residue {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            SequenceSpec::Character { alpha, poly } => {
                let q = poly
                    .eval_checked(n as i128)
                    .expect("character argument overflow; run validate_domain first");
                alpha.e_of_multiple(q)
            }
            SequenceSpec::Liouville => Complex64::new(primes::liouville(n) as f64, 0.0),
            SequenceSpec::MultEvenIndicator => {
                if primes::liouville(n) == 1 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            SequenceSpec::PeriodicTable(values) => {
                values[((n - 1) % values.len() as u64) as usize]
            }
            SequenceSpec::Shift { inner, offset } => {
                let m = n as i128 + *offset as i128;
                if m >= 1 {
                    inner.eval(m as u64)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            SequenceSpec::Dilation { factor, inner } => {
                if n % factor == 0 {
                    inner.eval(n / factor) * (*factor as f64)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            SequenceSpec::Combination(terms) => {
                let mut acc = Complex64::new(0.0, 0.0);
                for (c, f) in terms {
                    acc += c * f.eval(n);
                }
                acc
            }
        }
    }

    /// f(q n), using complete multiplicativity where it avoids tables past n.
    /// For Liouville-type kinds lambda(q n) = lambda(q) lambda(n), so scaling
    /// by a factor q costs nothing extra; every other kind evaluates at q * n
    /// directly (callers run `validate_scaled_domain` first).
    #[inline]
    pub fn eval_scaled(&self, q: u64, n: u64) -> Complex64 {
        match self {
            SequenceSpec::Liouville => {
                let s = primes::liouville(q) * primes::liouville(n);
                Complex64::new(s as f64, 0.0)
            }
            SequenceSpec::MultEvenIndicator => {
                if primes::liouville(q) * primes::liouville(n) == 1 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            _ => self.eval(q * n),
        }
    }

    /// Domain check matching `eval_scaled` over n in [1, max_n].
    pub fn validate_scaled_domain(&self, q: u64, max_n: u64) -> Result<()> {
        if q == 0 {
            return Err(Error::param("scaling factor must be >= 1"));
        }
        match self {
            SequenceSpec::Liouville | SequenceSpec::MultEvenIndicator => {
                primes::liouville_table(max_n.max(q)).map(|_| ())
            }
            _ => match q.checked_mul(max_n) {
                Some(m) => self.validate_domain(m),
                None => Err(Error::Overflow(format!(
                    "scaled argument {q} * {max_n} overflows u64"
                ))),
            },
        }
    }

    /// An upper bound for |f| on its whole domain.
    pub fn bound(&self) -> f64 {
        match self {
            SequenceSpec::Const(c) => c.norm(),
            SequenceSpec::Indicator(_)
            | SequenceSpec::ResidueIndicator { .. }
            | SequenceSpec::Character { .. }
            | SequenceSpec::Liouville
            | SequenceSpec::MultEvenIndicator => 1.0,
            SequenceSpec::PeriodicTable(values) => {
                values.iter().map(|v| v.norm()).fold(0.0, f64::max)
            }
            SequenceSpec::Shift { inner, .. } => inner.bound(),
            SequenceSpec::Dilation { factor, inner } => *factor as f64 * inner.bound(),
            SequenceSpec::Combination(terms) => {
                terms.iter().map(|(c, f)| c.norm() * f.bound()).sum()
            }
        }
    }

    /// Exact period when one exists (used by closed-form fast paths; `None`
    /// is always safe).
    pub fn period(&self) -> Option<u64> {
        match self {
            SequenceSpec::Const(_) => Some(1),
            SequenceSpec::ResidueIndicator { modulus, .. } => Some(*modulus),
            SequenceSpec::Character { alpha, .. } => alpha.rational_den(),
            SequenceSpec::Indicator(set) => set.period(),
            SequenceSpec::Liouville | SequenceSpec::MultEvenIndicator => None,
            SequenceSpec::PeriodicTable(values) => Some(values.len() as u64),
            SequenceSpec::Shift { inner, offset } => {
                if *offset >= 0 {
                    inner.period()
                } else {
                    None
                }
            }
            SequenceSpec::Dilation { factor, inner } => {
                inner.period().and_then(|p| p.checked_mul(*factor))
            }
            SequenceSpec::Combination(terms) => {
                let mut l: u64 = 1;
                for (_, f) in terms {
                    let p = f.period()?;
                    l = lcm_u64(l, p)?;
                }
                Some(l)
            }
        }
    }

    /// Some(alpha) when this is exactly e(n alpha).
    pub(crate) fn as_linear_character(&self) -> Option<Alpha> {
        match self {
            SequenceSpec::Character { alpha, poly } if *poly == IntPolynomial::identity() => {
                Some(*alpha)
            }
            _ => None,
        }
    }

    /// Checks that every evaluation in [1, max_n] is defined and affordable:
    /// polynomial arguments stay in i128, Liouville tables fit their cap,
    /// bitmask-backed sets cover the range.
    pub fn validate_domain(&self, max_n: u64) -> Result<()> {
        match self {
            SequenceSpec::Const(_) | SequenceSpec::ResidueIndicator { .. } => Ok(()),
            SequenceSpec::Character { poly, .. } => {
                poly.magnitude_bound(max_n).map(|_| ()).ok_or_else(|| {
                    Error::Overflow(format!("character argument {poly} overflows i128 below N = {max_n}"))
                })
            }
            SequenceSpec::Liouville | SequenceSpec::MultEvenIndicator => {
                primes::liouville_table(max_n).map(|_| ())
            }
            SequenceSpec::Indicator(set) => set.validate_to(max_n),
            SequenceSpec::PeriodicTable(values) => {
                if values.is_empty() {
                    Err(Error::param("periodic table must be non-empty"))
                } else {
                    Ok(())
                }
            }
            SequenceSpec::Shift { inner, offset } => {
                let max = if *offset >= 0 {
                    max_n.saturating_add(*offset as u64)
                } else {
                    max_n
                };
                inner.validate_domain(max)
            }
            SequenceSpec::Dilation { factor, inner } => {
                if *factor == 0 {
                    return Err(Error::param("dilation factor must be >= 1"));
                }
                inner.validate_domain(max_n / factor)
            }
            SequenceSpec::Combination(terms) => {
                for (_, f) in terms {
                    f.validate_domain(max_n)?;
                }
                Ok(())
            }
        }
    }
}

pub(crate) fn lcm_u64(a: u64, b: u64) -> Option<u64> {
    if a == 0 || b == 0 {
        return Some(0);
    }
    (a / gcd_u64(a, b)).checked_mul(b)
}

pub(crate) fn gcd_u64(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn fmt_real(x: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if x == x.trunc() && x.abs() < 1e15 {
        write!(f, "{}", x as i64)
    } else {
        write!(f, "{x}")
    }
}

impl fmt::Display for SequenceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SequenceSpec::Const(c) if c.im == 0.0 => {
                write!(f, "const:")?;
                fmt_real(c.re, f)
            }
            SequenceSpec::Const(c) => write!(f, "const:{}+{}i", c.re, c.im),
            SequenceSpec::Indicator(set) => write!(f, "indicator:{set}"),
            SequenceSpec::ResidueIndicator { modulus, residue } => {
                write!(f, "residue:{modulus},{residue}")
            }
            SequenceSpec::Character { alpha, poly } => {
                if *poly == IntPolynomial::identity() {
                    write!(f, "char:{alpha}")
                } else {
                    write!(f, "char:{alpha},{poly}")
                }
            }
            SequenceSpec::Liouville => write!(f, "liouville"),
            SequenceSpec::MultEvenIndicator => write!(f, "mult-even"),
            SequenceSpec::PeriodicTable(values) => {
                write!(f, "table:")?;
                for (i, v) in values.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    if v.im == 0.0 {
                        fmt_real(v.re, f)?;
                    } else {
                        write!(f, "{}+{}i", v.re, v.im)?;
                    }
                }
                Ok(())
            }
            SequenceSpec::Shift { inner, offset } => write!(f, "shift:{offset}:({inner})"),
            SequenceSpec::Dilation { factor, inner } => write!(f, "dilate:{factor}:({inner})"),
            SequenceSpec::Combination(terms) => {
                write!(f, "combo:")?;
                for (i, (c, g)) in terms.iter().enumerate() {
                    if i > 0 {
                        write!(f, "+")?;
                    }
                    write!(f, "({},{}i)*({g})", c.re, c.im)?;
                }
                Ok(())
            }
        }
    }
}

impl Serialize for SequenceSpec {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl FromStr for SequenceSpec {
    type Err = Error;

    /// CLI syntax: `const:C`, `indicator:<set>`, `residue:M,R`,
    /// `char:ALPHA[,POLY]`, `liouville`, `mult-even`, `alternating`,
    /// `table:V1,V2,...`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t {
            "liouville" => return Ok(SequenceSpec::Liouville),
            "mult-even" => return Ok(SequenceSpec::MultEvenIndicator),
            "alternating" => return Ok(SequenceSpec::alternating()),
            _ => {}
        }
        if let Some(rest) = t.strip_prefix("const:") {
            let re: f64 = rest
                .trim()
                .parse()
                .map_err(|_| Error::param(format!("bad constant '{rest}'")))?;
            return Ok(SequenceSpec::constant(re));
        }
        if let Some(rest) = t.strip_prefix("indicator:") {
            return Ok(SequenceSpec::Indicator(rest.parse()?));
        }
        if let Some(rest) = t.strip_prefix("residue:") {
            let (m, r) = rest
                .split_once(',')
                .ok_or_else(|| Error::param("residue spec needs 'modulus,residue'"))?;
            let modulus: u64 = m.trim().parse().map_err(|_| Error::param(format!("bad modulus '{m}'")))?;
            let residue: u64 = r.trim().parse().map_err(|_| Error::param(format!("bad residue '{r}'")))?;
            if modulus == 0 || residue >= modulus {
                return Err(Error::param("residue spec needs modulus >= 1 and residue < modulus"));
            }
            return Ok(SequenceSpec::ResidueIndicator { modulus, residue });
        }
        if let Some(rest) = t.strip_prefix("char:") {
            let (alpha_str, poly) = match rest.split_once(',') {
                Some((a, p)) => (a, p.parse()?),
                None => (rest, IntPolynomial::identity()),
            };
            return Ok(SequenceSpec::Character { alpha: alpha_str.parse()?, poly });
        }
        if let Some(rest) = t.strip_prefix("table:") {
            let values: Vec<Complex64> = rest
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map(|re| Complex64::new(re, 0.0))
                        .map_err(|_| Error::param(format!("bad table entry '{v}'")))
                })
                .collect::<Result<_>>()?;
            if values.is_empty() {
                return Err(Error::param("table spec needs at least one value"));
            }
            return Ok(SequenceSpec::PeriodicTable(Arc::new(values)));
        }
        Err(Error::param(format!("cannot parse sequence spec '{s}'")))
    }
}
