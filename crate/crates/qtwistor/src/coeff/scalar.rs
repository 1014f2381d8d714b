//! The exact coefficient field underlying every tensor entry and every
//! noncommutative coefficient in this crate.
//!
//! A [`Scalar`] is a finite sum of terms, each a reduced fraction of
//! polynomials in `s` (with `q = s^2`) times a monomial in the multiplicative
//! parameters `r(a,b)`. Only pairs with `a < b` are stored; `r(b,a)` is the
//! inverse exponent on `r(a,b)`, which encodes `r(ab)*r(ba) = 1`, and
//! `r(a,a) = 1`. Sums over distinct r-monomials are required because matrix
//! products of multiparameter R-matrices mix them before residuals cancel.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{Integer, One, Zero};
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use thiserror::Error;

use super::poly::SPoly;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum CoeffError {
    #[error("division by zero scalar")]
    DivisionByZero,
    #[error("scalar is not invertible (sum of {0} r-monomial terms)")]
    NonInvertible(usize),
    #[error("denominator vanishes at the given assignment: {0}")]
    DenominatorVanishes(String),
    #[error("no value assigned for parameter r({0},{1})")]
    MissingParameter(u8, u8),
    #[error("parse error: {0}")]
    Parse(String),
}

/// Reduced fraction of `s`-polynomials: monic denominator, gcd(num, den) = 1.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Frac {
    num: SPoly,
    den: SPoly,
}

impl Frac {
    pub fn new(num: SPoly, den: SPoly) -> Self {
        assert!(!den.is_zero(), "zero denominator");
        let mut f = Frac { num, den };
        f.reduce();
        f
    }

    pub fn from_poly(p: SPoly) -> Self {
        Frac {
            num: p,
            den: SPoly::one(),
        }
    }

    pub fn zero() -> Self {
        Frac::from_poly(SPoly::zero())
    }

    pub fn one() -> Self {
        Frac::from_poly(SPoly::one())
    }

    pub fn num(&self) -> &SPoly {
        &self.num
    }

    pub fn den(&self) -> &SPoly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num.is_one() && self.den.is_one()
    }

    fn reduce(&mut self) {
        if self.num.is_zero() {
            self.den = SPoly::one();
            return;
        }
        let g = self.num.gcd(&self.den);
        if !g.is_one() {
            self.num = self.num.div_rem(&g).0;
            self.den = self.den.div_rem(&g).0;
        }
        let (den, lc) = std::mem::take(&mut self.den).into_monic();
        self.den = den;
        let inv = BigRational::one() / lc;
        self.num = self.num.scale(&inv);
    }

    pub fn add(&self, rhs: &Frac) -> Frac {
        Frac::new(
            &(&self.num * &rhs.den) + &(&rhs.num * &self.den),
            &self.den * &rhs.den,
        )
    }

    pub fn neg(&self) -> Frac {
        Frac {
            num: -&self.num,
            den: self.den.clone(),
        }
    }

    pub fn mul(&self, rhs: &Frac) -> Frac {
        Frac::new(&self.num * &rhs.num, &self.den * &rhs.den)
    }

    pub fn inv(&self) -> Result<Frac, CoeffError> {
        if self.is_zero() {
            return Err(CoeffError::DivisionByZero);
        }
        Ok(Frac::new(self.den.clone(), self.num.clone()))
    }

    /// The involution `s -> 1/s`.
    pub fn conjugate(&self) -> Frac {
        let dn = self.num.degree().unwrap_or(0);
        let dd = self.den.degree().unwrap_or(0);
        let rn = self.num.reversed();
        let rd = self.den.reversed();
        if dd >= dn {
            Frac::new(&rn * &SPoly::s_pow(dd - dn), rd)
        } else {
            Frac::new(rn, &rd * &SPoly::s_pow(dn - dd))
        }
    }

    pub fn eval(&self, s: &BigRational) -> Result<BigRational, CoeffError> {
        let d = self.den.eval(s);
        if d.is_zero() {
            return Err(CoeffError::DenominatorVanishes(self.den.to_string()));
        }
        Ok(self.num.eval(s) / d)
    }
}

/// Writes the fraction with integer coefficients: the rational content of the
/// numerator is scaled so the printed denominator polynomial has integer,
/// content-free coefficients (e.g. `(s^4-1)/s^2`, `s^2/(s^4+1)`, `-3/2`).
impl fmt::Display for Frac {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // lcm of all coefficient denominators across num and den
        let mut lcm = BigInt::one();
        for c in self.num.coeffs().iter().chain(self.den.coeffs()) {
            lcm = lcm.lcm(c.denom());
        }
        let scale = BigRational::from_integer(lcm);
        let num = self.num.scale(&scale);
        let den = self.den.scale(&scale);
        let num_terms = num.coeffs().iter().filter(|c| !c.is_zero()).count();
        let den_terms = den.coeffs().iter().filter(|c| !c.is_zero()).count();
        if den.is_one() {
            if num_terms > 1 {
                write!(f, "({})", num)
            } else {
                write!(f, "{}", num)
            }
        } else {
            if num_terms > 1 {
                write!(f, "({})", num)?;
            } else {
                write!(f, "{}", num)?;
            }
            write!(f, "/")?;
            if den_terms > 1 {
                write!(f, "({})", den)
            } else {
                write!(f, "{}", den)
            }
        }
    }
}

/// Monomial in the parameters `r(a,b)`, keyed by ordered pairs `a < b`
/// (0-based indices), mapping to nonzero integer exponents.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct RMono(BTreeMap<(u8, u8), i32>);

impl RMono {
    pub fn one() -> Self {
        RMono::default()
    }

    /// `r(a,b)^exp`, normalizing `a > b` to the inverse exponent on `(b,a)`.
    pub fn generator(a: u8, b: u8, exp: i32) -> Self {
        let mut m = RMono::default();
        m.mul_gen(a, b, exp);
        m
    }

    pub fn mul_gen(&mut self, a: u8, b: u8, exp: i32) {
        if a == b || exp == 0 {
            return; // r(a,a) = 1
        }
        let (key, e) = if a < b { ((a, b), exp) } else { ((b, a), -exp) };
        let slot = self.0.entry(key).or_insert(0);
        *slot += e;
        if *slot == 0 {
            self.0.remove(&key);
        }
    }

    pub fn mul(&self, rhs: &RMono) -> RMono {
        let mut out = self.clone();
        for (&(a, b), &e) in &rhs.0 {
            out.mul_gen(a, b, e);
        }
        out
    }

    pub fn inv(&self) -> RMono {
        RMono(self.0.iter().map(|(&k, &e)| (k, -e)).collect())
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn exponents(&self) -> impl Iterator<Item = ((u8, u8), i32)> + '_ {
        self.0.iter().map(|(&k, &e)| (k, e))
    }
}

impl fmt::Display for RMono {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (&(a, b), &e) in &self.0 {
            if !first {
                write!(f, "*")?;
            }
            first = false;
            // display 1-based
            write!(f, "r({},{})", a + 1, b + 1)?;
            if e != 1 {
                write!(f, "^{}", e)?;
            }
        }
        Ok(())
    }
}

/// Element of the coefficient field: sum of `Frac * RMono` terms.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Scalar {
    terms: BTreeMap<RMono, Frac>,
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar::default()
    }

    pub fn one() -> Self {
        Scalar::from_frac(Frac::one())
    }

    pub fn from_frac(f: Frac) -> Self {
        let mut terms = BTreeMap::new();
        if !f.is_zero() {
            terms.insert(RMono::one(), f);
        }
        Scalar { terms }
    }

    pub fn from_poly(p: SPoly) -> Self {
        Scalar::from_frac(Frac::from_poly(p))
    }

    pub fn from_int(n: i64) -> Self {
        Scalar::from_poly(SPoly::from_int(n))
    }

    pub fn from_rat(r: BigRational) -> Self {
        Scalar::from_poly(SPoly::constant(r))
    }

    pub fn rational(n: i64, d: i64) -> Self {
        Scalar::from_rat(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    /// `s^k` for any integer `k`.
    pub fn s_pow(k: i64) -> Self {
        if k >= 0 {
            Scalar::from_poly(SPoly::s_pow(k as usize))
        } else {
            Scalar::from_frac(Frac::new(SPoly::one(), SPoly::s_pow((-k) as usize)))
        }
    }

    /// `q^k = s^(2k)`.
    pub fn q_pow(k: i64) -> Self {
        Scalar::s_pow(2 * k)
    }

    pub fn q() -> Self {
        Scalar::q_pow(1)
    }

    /// `lambda = q - q^(-1)`, the Hecke eigenvalue gap.
    pub fn lambda() -> Self {
        &Scalar::q() - &Scalar::q_pow(-1)
    }

    /// The multiplicative parameter `r(a,b)` (0-based indices), with
    /// `r(b,a) = r(a,b)^(-1)` and `r(a,a) = 1`.
    pub fn r_param(a: u8, b: u8) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(RMono::generator(a, b, 1), Frac::one());
        Scalar { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1
            && self
                .terms
                .get(&RMono::one())
                .map_or(false, |f| f.is_one())
    }

    pub fn terms(&self) -> impl Iterator<Item = (&RMono, &Frac)> {
        self.terms.iter()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Constant rational value if the scalar is one, else `None`.
    pub fn as_rational(&self) -> Option<BigRational> {
        if self.is_zero() {
            return Some(BigRational::zero());
        }
        if self.terms.len() != 1 {
            return None;
        }
        let (m, f) = self.terms.iter().next().unwrap();
        if !m.is_one() || !f.den().is_one() || f.num().degree() != Some(0) {
            return None;
        }
        f.num().coeffs().first().cloned()
    }

    fn insert_term(&mut self, m: RMono, f: Frac) {
        if f.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(f);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get().add(&f);
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn inv(&self) -> Result<Scalar, CoeffError> {
        if self.is_zero() {
            return Err(CoeffError::DivisionByZero);
        }
        if self.terms.len() != 1 {
            return Err(CoeffError::NonInvertible(self.terms.len()));
        }
        let (m, f) = self.terms.iter().next().unwrap();
        let mut terms = BTreeMap::new();
        terms.insert(m.inv(), f.inv()?);
        Ok(Scalar { terms })
    }

    pub fn div(&self, rhs: &Scalar) -> Result<Scalar, CoeffError> {
        Ok(self * &rhs.inv()?)
    }

    /// Formal unit-circle involution: `s -> 1/s` (so `q -> 1/q`) and
    /// `r(a,b) -> r(a,b)^(-1)`. An involution: applying it twice is identity.
    pub fn conjugate(&self) -> Scalar {
        let mut out = Scalar::zero();
        for (m, f) in &self.terms {
            out.insert_term(m.inv(), f.conjugate());
        }
        out
    }

    /// Exact rational value at a parameter assignment.
    pub fn evaluate(&self, a: &ParamAssignment) -> Result<BigRational, CoeffError> {
        let mut acc = BigRational::zero();
        for (m, f) in &self.terms {
            let mut v = f.eval(&a.s_value)?;
            for ((i, j), e) in m.exponents() {
                let r = a
                    .r_values
                    .get(&(i, j))
                    .ok_or(CoeffError::MissingParameter(i, j))?;
                let mut p = BigRational::one();
                for _ in 0..e.unsigned_abs() {
                    p *= r;
                }
                if e < 0 {
                    p = BigRational::one() / p;
                }
                v *= p;
            }
            acc += v;
        }
        Ok(acc)
    }

    /// Substitute a rational value for `s`, keeping r-parameters symbolic.
    pub fn eval_s(&self, s: &BigRational) -> Result<Scalar, CoeffError> {
        let mut out = Scalar::zero();
        for (m, f) in &self.terms {
            out.insert_term(m.clone(), Frac::from_poly(SPoly::constant(f.eval(s)?)));
        }
        Ok(out)
    }

    /// Substitute 1 for every r-parameter.
    pub fn eval_r_one(&self) -> Scalar {
        let mut out = Scalar::zero();
        for (_, f) in &self.terms {
            out.insert_term(RMono::one(), f.clone());
        }
        out
    }
}

impl Add for &Scalar {
    type Output = Scalar;
    fn add(self, rhs: &Scalar) -> Scalar {
        let mut out = self.clone();
        for (m, f) in &rhs.terms {
            out.insert_term(m.clone(), f.clone());
        }
        out
    }
}

impl Sub for &Scalar {
    type Output = Scalar;
    fn sub(self, rhs: &Scalar) -> Scalar {
        self + &(-rhs)
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar {
            terms: self
                .terms
                .iter()
                .map(|(m, f)| (m.clone(), f.neg()))
                .collect(),
        }
    }
}

impl Mul for &Scalar {
    type Output = Scalar;
    fn mul(self, rhs: &Scalar) -> Scalar {
        let mut out = Scalar::zero();
        for (m1, f1) in &self.terms {
            for (m2, f2) in &rhs.terms {
                out.insert_term(m1.mul(m2), f1.mul(f2));
            }
        }
        out
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, fr) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if m.is_one() {
                write!(f, "{}", fr)?;
            } else if fr.is_one() {
                write!(f, "{}", m)?;
            } else {
                write!(f, "{} * {}", fr, m)?;
            }
        }
        Ok(())
    }
}

/// Spec-level arithmetic dispatcher.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Mul,
    Div,
    Neg,
}

pub fn scalar_arith(x: &Scalar, y: &Scalar, op: ArithOp) -> Result<Scalar, CoeffError> {
    Ok(match op {
        ArithOp::Add => x + y,
        ArithOp::Mul => x * y,
        ArithOp::Div => x.div(y)?,
        ArithOp::Neg => -x,
    })
}

/// Rational specialization point for numeric-mode verification.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamAssignment {
    pub s_value: BigRational,
    pub r_values: BTreeMap<(u8, u8), BigRational>,
}

impl ParamAssignment {
    pub fn new(s_value: BigRational) -> Self {
        assert!(!s_value.is_zero(), "s must be nonzero");
        ParamAssignment {
            s_value,
            r_values: BTreeMap::new(),
        }
    }

    pub fn from_s(n: i64, d: i64) -> Self {
        ParamAssignment::new(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn with_r(mut self, a: u8, b: u8, v: BigRational) -> Self {
        assert!(!v.is_zero(), "r values must be nonzero");
        assert!(a < b, "r keys are stored with a < b");
        self.r_values.insert((a, b), v);
        self
    }
}
