//! Integer polynomials with exact, overflow-checked evaluation.
//!
//! Coefficients are `i64`, evaluation runs in `i128` and reports overflow
//! instead of wrapping. Two degeneracy flags are precomputed because scans
//! branch on them per candidate pair: `constant_term_zero` (Q(0) = 0) and
//! `sum_of_coeffs_zero` (Q(1) = 0).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest accepted exponent in the text syntax. Keeps `i128` evaluation
/// meaningful for arguments up to ~1e9.
pub const MAX_DEGREE: usize = 12;

/// Polynomial with integer coefficients, stored low degree first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "Vec<i64>", from = "Vec<i64>")]
pub struct IntPolynomial {
    coeffs: Vec<i64>,
    q0_zero: bool,
    q1_zero: bool,
}

impl IntPolynomial {
    /// Builds from ascending coefficients `c0 + c1 y + c2 y^2 + ...`,
    /// trimming trailing zeros.
    pub fn new(mut coeffs: Vec<i64>) -> Self {
        while coeffs.last() == Some(&0) {
            coeffs.pop();
        }
        let q0_zero = coeffs.first().copied().unwrap_or(0) == 0;
        let q1_zero = coeffs.iter().map(|&c| c as i128).sum::<i128>() == 0;
        IntPolynomial { coeffs, q0_zero, q1_zero }
    }

    pub fn zero() -> Self {
        Self::new(Vec::new())
    }

    pub fn constant(c: i64) -> Self {
        Self::new(vec![c])
    }

    /// The identity polynomial `y`.
    pub fn identity() -> Self {
        Self::new(vec![0, 1])
    }

    pub fn coeffs(&self) -> &[i64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.len() <= 1
    }

    /// Q(0) = 0, i.e. no constant term.
    pub fn constant_term_zero(&self) -> bool {
        self.q0_zero
    }

    /// Q(1) = 0, i.e. coefficients sum to zero.
    pub fn sum_of_coeffs_zero(&self) -> bool {
        self.q1_zero
    }

    /// Horner evaluation in `i128`; `None` on overflow.
    pub fn eval_checked(&self, x: i128) -> Option<i128> {
        let mut acc: i128 = 0;
        for &c in self.coeffs.iter().rev() {
            acc = acc.checked_mul(x)?.checked_add(c as i128)?;
        }
        Some(acc)
    }

    /// Like `eval_checked` but overflow is an error carrying the argument.
    pub fn eval(&self, x: i128) -> Result<i128> {
        self.eval_checked(x)
            .ok_or_else(|| Error::Overflow(format!("{self} at y = {x} exceeds i128")))
    }

    /// Upper bound `sum_i |c_i| x^i` for all arguments in `[0, x]`;
    /// `None` if the bound itself overflows. Used to validate domains before
    /// long scans.
    pub fn magnitude_bound(&self, x: u64) -> Option<i128> {
        let x = x as i128;
        let mut pow: i128 = 1;
        let mut acc: i128 = 0;
        for (i, &c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                pow = pow.checked_mul(x)?;
            }
            acc = acc.checked_add((c as i128).abs().checked_mul(pow)?)?;
        }
        Some(acc)
    }
}

impl From<IntPolynomial> for Vec<i64> {
    fn from(p: IntPolynomial) -> Vec<i64> {
        p.coeffs
    }
}

impl From<Vec<i64>> for IntPolynomial {
    fn from(coeffs: Vec<i64>) -> IntPolynomial {
        IntPolynomial::new(coeffs)
    }
}

impl fmt::Display for IntPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0 {
                continue;
            }
            let mag = c.unsigned_abs();
            if first {
                if c < 0 {
                    write!(f, "-")?;
                }
                first = false;
            } else if c < 0 {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            match e {
                0 => write!(f, "{mag}")?,
                _ => {
                    if mag != 1 {
                        write!(f, "{mag}")?;
                    }
                    if e == 1 {
                        write!(f, "y")?;
                    } else {
                        write!(f, "y^{e}")?;
                    }
                }
            }
        }
        Ok(())
    }
}

impl FromStr for IntPolynomial {
    type Err = Error;

    /// Accepts sums of terms in the variable `y`: `"y"`, `"y-1"`, `"y^2+3y"`,
    /// `"-2y^3 + 7"`, `"0"`. Exponents are capped at `MAX_DEGREE`.
    fn from_str(s: &str) -> Result<Self> {
        let bytes: Vec<u8> = s.bytes().filter(|b| !b.is_ascii_whitespace()).collect();
        if bytes.is_empty() {
            return Err(Error::param("empty polynomial"));
        }
        let mut coeffs = vec![0i64; MAX_DEGREE + 1];
        let mut i = 0usize;
        while i < bytes.len() {
            let mut sign: i64 = 1;
            match bytes[i] {
                b'+' => i += 1,
                b'-' => {
                    sign = -1;
                    i += 1;
                }
                _ => {}
            }
            if i >= bytes.len() {
                return Err(Error::param(format!("dangling sign in polynomial '{s}'")));
            }
            let digits_start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let coef: i64 = if i > digits_start {
                std::str::from_utf8(&bytes[digits_start..i])
                    .unwrap()
                    .parse()
                    .map_err(|_| Error::param(format!("coefficient too large in '{s}'")))?
            } else {
                1
            };
            let mut exp = 0usize;
            if i < bytes.len() && (bytes[i] == b'y' || bytes[i] == b'Y') {
                i += 1;
                exp = 1;
                if i < bytes.len() && bytes[i] == b'^' {
                    i += 1;
                    let e_start = i;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                    if i == e_start {
                        return Err(Error::param(format!("missing exponent in '{s}'")));
                    }
                    exp = std::str::from_utf8(&bytes[e_start..i]).unwrap().parse().map_err(|_| {
                        Error::param(format!("exponent out of range in '{s}'"))
                    })?;
                    if exp > MAX_DEGREE {
                        return Err(Error::param(format!(
                            "exponent {exp} exceeds the maximum degree {MAX_DEGREE}"
                        )));
                    }
                }
            } else if i == digits_start {
                return Err(Error::param(format!("unexpected character in polynomial '{s}'")));
            }
            coeffs[exp] = coeffs[exp]
                .checked_add(sign.checked_mul(coef).ok_or_else(|| {
                    Error::param(format!("coefficient overflow in '{s}'"))
                })?)
                .ok_or_else(|| Error::param(format!("coefficient overflow in '{s}'")))?;
        }
        Ok(IntPolynomial::new(coeffs))
    }
}

/// A polynomial with rational coefficients, kept as an integer polynomial
/// over a common positive denominator.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalPoly {
    pub numerator: IntPolynomial,
    pub denominator: u64,
}

impl RationalPoly {
    pub fn new(numerator: IntPolynomial, denominator: u64) -> Result<Self> {
        if denominator == 0 {
            return Err(Error::param("rational polynomial with zero denominator"));
        }
        Ok(RationalPoly { numerator, denominator })
    }

    pub fn integer(p: IntPolynomial) -> Self {
        RationalPoly { numerator: p, denominator: 1 }
    }

    pub fn is_constant(&self) -> bool {
        self.numerator.is_constant()
    }
}

impl fmt::Display for RationalPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denominator == 1 {
            write!(f, "{}", self.numerator)
        } else {
            write!(f, "({})/{}", self.numerator, self.denominator)
        }
    }
}

impl FromStr for RationalPoly {
    type Err = Error;

    /// `"<poly>"` or `"<poly>/<den>"`, e.g. `"y^2"` or `"(y^2-1)/3"`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if let Some(idx) = t.rfind('/') {
            let den_part = &t[idx + 1..];
            if den_part.chars().all(|c| c.is_ascii_digit()) && !den_part.is_empty() {
                let den: u64 = den_part
                    .parse()
                    .map_err(|_| Error::param(format!("bad denominator in '{s}'")))?;
                let mut num = t[..idx].trim();
                if num.starts_with('(') && num.ends_with(')') {
                    num = &num[1..num.len() - 1];
                }
                return RationalPoly::new(num.parse()?, den);
            }
        }
        Ok(RationalPoly::integer(t.parse()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_prints_round_trip() {
        for src in ["y", "y-1", "y^2+3y", "-2y^3+7", "0", "y^2 - 1", "5"] {
            let p: IntPolynomial = src.parse().unwrap();
            let printed = p.to_string();
            let q: IntPolynomial = printed.parse().unwrap();
            assert_eq!(p, q, "round trip failed for '{src}' -> '{printed}'");
        }
    }

    #[test]
    fn eval_matches_direct_expansion() {
        let p: IntPolynomial = "y^2-1".parse().unwrap();
        for x in [-3i128, 0, 1, 2, 10, 1_000_000] {
            assert_eq!(p.eval(x).unwrap(), x * x - 1);
        }
        let q: IntPolynomial = "2y^3 - y + 4".parse().unwrap();
        assert_eq!(q.eval(5).unwrap(), 2 * 125 - 5 + 4);
    }

    #[test]
    fn degeneracy_flags() {
        let id = IntPolynomial::identity();
        assert!(id.constant_term_zero());
        assert!(!id.sum_of_coeffs_zero());

        let p: IntPolynomial = "y-1".parse().unwrap();
        assert!(!p.constant_term_zero());
        assert!(p.sum_of_coeffs_zero());

        let z = IntPolynomial::zero();
        assert!(z.constant_term_zero());
        assert!(z.sum_of_coeffs_zero());
        assert!(z.is_constant());
    }

    #[test]
    fn overflow_is_detected_not_wrapped() {
        let p: IntPolynomial = "y^12".parse().unwrap();
        // 1e9^12 = 1e108 >> i128 max (~1.7e38)
        assert!(p.eval_checked(1_000_000_000).is_none());
        assert!(p.eval(1_000_000_000).is_err());
        // but well inside range nothing trips
        assert!(p.eval_checked(100).is_some());
    }

    #[test]
    fn magnitude_bound_dominates_samples() {
        let p: IntPolynomial = "-3y^2 + 7y - 11".parse().unwrap();
        let bound = p.magnitude_bound(50).unwrap();
        for x in 0..=50i128 {
            assert!(p.eval(x).unwrap().abs() <= bound);
        }
    }

    #[test]
    fn degree_cap_enforced_by_parser() {
        assert!("y^13".parse::<IntPolynomial>().is_err());
        assert!("y^12".parse::<IntPolynomial>().is_ok());
    }

    #[test]
    fn rational_poly_syntax() {
        let r: RationalPoly = "(y^2-1)/3".parse().unwrap();
        assert_eq!(r.denominator, 3);
        assert_eq!(r.numerator, "y^2-1".parse().unwrap());
        let r2: RationalPoly = "y^2".parse().unwrap();
        assert_eq!(r2.denominator, 1);
        assert!("y/0".parse::<RationalPoly>().is_err());
    }

    #[test]
    fn serde_round_trip_prunes_to_coefficients() {
        let p: IntPolynomial = "y^2-1".parse().unwrap();
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, "[-1,0,1]");
        let back: IntPolynomial = serde_json::from_str(&json).unwrap();
        assert_eq!(p, back);
    }
}
