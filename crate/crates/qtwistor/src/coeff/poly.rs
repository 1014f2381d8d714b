//! Dense univariate polynomials in the deformation parameter `s` over the rationals.
//!
//! `q` is represented as `s^2` throughout, so half-integer powers of `q`
//! stay polynomial. Division lives one layer up, in [`super::scalar`].

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{Integer, One, Signed, Zero};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// Polynomial in `s` with rational coefficients. `coeffs[i]` multiplies `s^i`;
/// the top coefficient is nonzero unless the polynomial is zero (empty vec).
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct SPoly {
    coeffs: Vec<BigRational>,
}

impl SPoly {
    pub fn zero() -> Self {
        SPoly { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        SPoly::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Self {
        SPoly::from_coeffs(vec![c])
    }

    pub fn from_int(n: i64) -> Self {
        SPoly::constant(BigRational::from_integer(BigInt::from(n)))
    }

    /// `c * s^k`.
    pub fn monomial(c: BigRational, k: usize) -> Self {
        if c.is_zero() {
            return SPoly::zero();
        }
        let mut coeffs = vec![BigRational::zero(); k + 1];
        coeffs[k] = c;
        SPoly { coeffs }
    }

    pub fn s_pow(k: usize) -> Self {
        SPoly::monomial(BigRational::one(), k)
    }

    pub fn from_coeffs(mut coeffs: Vec<BigRational>) -> Self {
        while coeffs.last().map_or(false, Zero::is_zero) {
            coeffs.pop();
        }
        SPoly { coeffs }
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> Option<&BigRational> {
        self.coeffs.last()
    }

    pub fn is_one(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0].is_one()
    }

    /// Lowest power of `s` dividing the polynomial (0 for the zero polynomial).
    pub fn s_valuation(&self) -> usize {
        self.coeffs
            .iter()
            .position(|c| !c.is_zero())
            .unwrap_or(0)
    }

    /// Quotient by `s^k`; panics if not divisible.
    pub fn div_s_pow(&self, k: usize) -> SPoly {
        if self.is_zero() {
            return SPoly::zero();
        }
        assert!(self.s_valuation() >= k, "not divisible by s^{k}");
        SPoly::from_coeffs(self.coeffs[k..].to_vec())
    }

    pub fn eval(&self, s: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * s + c;
        }
        acc
    }

    /// Coefficient reversal: `s^deg * p(1/s)`.
    pub fn reversed(&self) -> SPoly {
        let mut coeffs = self.coeffs.clone();
        coeffs.reverse();
        SPoly::from_coeffs(coeffs)
    }

    pub fn scale(&self, c: &BigRational) -> SPoly {
        if c.is_zero() {
            return SPoly::zero();
        }
        SPoly {
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
        }
    }

    /// Make monic; returns the former leading coefficient. Zero stays zero.
    pub fn into_monic(self) -> (SPoly, BigRational) {
        match self.leading() {
            None => (self, BigRational::one()),
            Some(lc) => {
                let lc = lc.clone();
                let inv = BigRational::one() / lc.clone();
                (self.scale(&inv), lc)
            }
        }
    }

    /// Euclidean division; `other` must be nonzero.
    pub fn div_rem(&self, other: &SPoly) -> (SPoly, SPoly) {
        assert!(!other.is_zero(), "polynomial division by zero");
        let dd = match self.degree() {
            None => return (SPoly::zero(), SPoly::zero()),
            Some(d) => d,
        };
        let dv = other.degree().unwrap();
        if dd < dv {
            return (SPoly::zero(), self.clone());
        }
        let mut rem = self.coeffs.clone();
        let mut quo = vec![BigRational::zero(); dd - dv + 1];
        let lead = other.leading().unwrap().clone();
        for i in (dv..=dd).rev() {
            if rem[i].is_zero() {
                continue;
            }
            let f = &rem[i] / &lead;
            quo[i - dv] = f.clone();
            for (j, c) in other.coeffs.iter().enumerate() {
                let t = c * &f;
                rem[i - dv + j] = &rem[i - dv + j] - t;
            }
        }
        (SPoly::from_coeffs(quo), SPoly::from_coeffs(rem))
    }

    /// Monic gcd, computed over the integers with a primitive remainder
    /// sequence to keep coefficients small.
    pub fn gcd(&self, other: &SPoly) -> SPoly {
        if self.is_zero() {
            return other.clone().into_monic().0;
        }
        if other.is_zero() {
            return self.clone().into_monic().0;
        }
        let mut a = to_primitive_int(self);
        let mut b = to_primitive_int(other);
        if int_degree(&a) < int_degree(&b) {
            std::mem::swap(&mut a, &mut b);
        }
        while !b.is_empty() {
            let r = int_pseudo_rem(&a, &b);
            a = b;
            b = int_primitive(r);
        }
        let rat: Vec<BigRational> = a.into_iter().map(BigRational::from_integer).collect();
        SPoly::from_coeffs(rat).into_monic().0
    }

    pub fn derivative(&self) -> SPoly {
        if self.coeffs.len() <= 1 {
            return SPoly::zero();
        }
        SPoly::from_coeffs(
            self.coeffs[1..]
                .iter()
                .enumerate()
                .map(|(i, c)| c * BigRational::from_integer(BigInt::from(i as i64 + 1)))
                .collect(),
        )
    }
}

fn int_degree(p: &[BigInt]) -> usize {
    p.len().saturating_sub(1)
}

/// Clear denominators and divide by content; result has gcd of coefficients 1.
fn to_primitive_int(p: &SPoly) -> Vec<BigInt> {
    let mut lcm = BigInt::one();
    for c in p.coeffs() {
        lcm = lcm.lcm(c.denom());
    }
    let ints: Vec<BigInt> = p
        .coeffs()
        .iter()
        .map(|c| c.numer() * (&lcm / c.denom()))
        .collect();
    int_primitive(ints)
}

fn int_primitive(mut p: Vec<BigInt>) -> Vec<BigInt> {
    while p.last().map_or(false, Zero::is_zero) {
        p.pop();
    }
    if p.is_empty() {
        return p;
    }
    let mut g = BigInt::zero();
    for c in &p {
        g = g.gcd(c);
    }
    if g.is_one() {
        return p;
    }
    for c in &mut p {
        *c = &*c / &g;
    }
    p
}

/// Remainder of `lead(b)^k * a` by `b` over the integers.
fn int_pseudo_rem(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
    let db = int_degree(b);
    let lb = b.last().unwrap().clone();
    let mut rem: Vec<BigInt> = a.to_vec();
    while rem.len() > db {
        let top = rem.last().unwrap().clone();
        if top.is_zero() {
            rem.pop();
            continue;
        }
        let shift = rem.len() - 1 - db;
        for c in rem.iter_mut() {
            *c = &*c * &lb;
        }
        for (j, bc) in b.iter().enumerate() {
            let idx = shift + j;
            let t = bc * &top;
            rem[idx] = &rem[idx] - t;
        }
        while rem.last().map_or(false, Zero::is_zero) {
            rem.pop();
        }
    }
    rem
}

impl Add for &SPoly {
    type Output = SPoly;
    fn add(self, rhs: &SPoly) -> SPoly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let mut out = vec![BigRational::zero(); n];
        for (i, c) in self.coeffs.iter().enumerate() {
            out[i] = c.clone();
        }
        for (i, c) in rhs.coeffs.iter().enumerate() {
            out[i] = &out[i] + c;
        }
        SPoly::from_coeffs(out)
    }
}

impl Sub for &SPoly {
    type Output = SPoly;
    fn sub(self, rhs: &SPoly) -> SPoly {
        self + &(-rhs)
    }
}

impl Neg for &SPoly {
    type Output = SPoly;
    fn neg(self) -> SPoly {
        SPoly {
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }
}

impl Mul for &SPoly {
    type Output = SPoly;
    fn mul(self, rhs: &SPoly) -> SPoly {
        if self.is_zero() || rhs.is_zero() {
            return SPoly::zero();
        }
        let mut out = vec![BigRational::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                out[i + j] = &out[i + j] + a * b;
            }
        }
        SPoly::from_coeffs(out)
    }
}

/// Renders with integer coefficients, highest power first, e.g. `2*s^4-s^2+1`.
/// Rational content is cleared by the caller ([`super::scalar::Frac`] display).
impl fmt::Display for SPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let mag = c.abs();
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
                first = false;
            } else if c.is_negative() {
                write!(f, "-")?;
            } else {
                write!(f, "+")?;
            }
            let unit = mag.is_one();
            if !unit || k == 0 {
                write!(f, "{}", mag)?;
            }
            if k > 0 {
                if !unit {
                    write!(f, "*")?;
                }
                write!(f, "s")?;
                if k > 1 {
                    write!(f, "^{}", k)?;
                }
            }
        }
        Ok(())
    }
}
