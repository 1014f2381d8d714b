//! Parser for the textual scalar rendering, inverse to `Scalar`'s `Display`.
//!
//! Grammar, whitespace-insensitive:
//!   scalar := term (`+` term)*
//!   term   := frac (`*` rmono)* | rmono
//!   frac   := signed_poly (`/` signed_poly)?
//!   poly   := atom ((`+`|`-`) atom)* with atoms `int`, `s`, `s^k`, `int*s^k`
//!   rmono  := `r(` int `,` int `)` (`^` int)?   (1-based indices)

use num::bigint::BigInt;
use num::rational::BigRational;

use super::poly::SPoly;
use super::scalar::{CoeffError, Frac, RMono, Scalar};

struct Lexer<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(s: &'a str) -> Self {
        Lexer {
            bytes: s.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), CoeffError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(CoeffError::Parse(format!(
                "expected '{}' at byte {}",
                c as char, self.pos
            )))
        }
    }

    fn integer(&mut self) -> Result<BigInt, CoeffError> {
        self.skip_ws();
        let neg = self.eat(b'-');
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(CoeffError::Parse(format!("expected integer at byte {start}")));
        }
        let s = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        let v: BigInt = s.parse().unwrap();
        Ok(if neg { -v } else { v })
    }

    fn at_end(&mut self) -> bool {
        self.peek().is_none()
    }
}

/// One atom of a polynomial: `c`, `s`, `-s`, `s^k`, `c*s^k`.
fn parse_poly_atom(lx: &mut Lexer) -> Result<SPoly, CoeffError> {
    let neg = lx.eat(b'-');
    let mut coeff = BigRational::from_integer(BigInt::from(if neg { -1 } else { 1 }));
    let mut have_coeff = false;
    if lx.peek().map_or(false, |c| c.is_ascii_digit()) {
        let mag = BigRational::from_integer(lx.integer()?);
        coeff = if neg { -mag } else { mag };
        have_coeff = true;
        // only consume '*' if an s-power follows; `2 * r(1,2)` keeps
        // its '*' for the r-monomial loop one level up
        let save = lx.pos;
        if !lx.eat(b'*') || lx.peek() != Some(b's') {
            lx.pos = save;
            return Ok(SPoly::constant(coeff));
        }
    }
    if lx.eat(b's') {
        let k = if lx.eat(b'^') {
            let e = lx.integer()?;
            let e: i64 = e.try_into().map_err(|_| CoeffError::Parse("exponent too large".into()))?;
            if e < 0 {
                return Err(CoeffError::Parse("negative s exponent inside polynomial".into()));
            }
            e as usize
        } else {
            1
        };
        Ok(SPoly::monomial(coeff, k))
    } else if have_coeff {
        Ok(SPoly::constant(coeff))
    } else {
        Err(CoeffError::Parse(format!("expected polynomial atom at byte {}", lx.pos)))
    }
}

/// A polynomial without outer parentheses: atoms joined by `+`/`-`.
fn parse_poly_body(lx: &mut Lexer) -> Result<SPoly, CoeffError> {
    let mut acc = parse_poly_atom(lx)?;
    loop {
        match lx.peek() {
            Some(b'+') => {
                lx.bump();
                let t = parse_poly_atom(lx)?;
                acc = &acc + &t;
            }
            Some(b'-') => {
                // leave the '-' for the atom's sign
                let t = parse_poly_atom(lx)?;
                acc = &acc + &t;
            }
            _ => break,
        }
    }
    Ok(acc)
}

/// Parenthesized polynomial or a single atom.
fn parse_poly_factor(lx: &mut Lexer) -> Result<SPoly, CoeffError> {
    if lx.eat(b'(') {
        let p = parse_poly_body(lx)?;
        lx.expect(b')')?;
        Ok(p)
    } else {
        parse_poly_atom(lx)
    }
}

fn parse_rmono_factor(lx: &mut Lexer, m: &mut RMono) -> Result<(), CoeffError> {
    lx.expect(b'r')?;
    lx.expect(b'(')?;
    let a = lx.integer()?;
    lx.expect(b',')?;
    let b = lx.integer()?;
    lx.expect(b')')?;
    let exp = if lx.eat(b'^') {
        let e = lx.integer()?;
        e.try_into()
            .map_err(|_| CoeffError::Parse("r exponent too large".into()))?
    } else {
        1i32
    };
    let a: u8 = a
        .try_into()
        .map_err(|_| CoeffError::Parse("bad r index".into()))?;
    let b: u8 = b
        .try_into()
        .map_err(|_| CoeffError::Parse("bad r index".into()))?;
    if a == 0 || b == 0 {
        return Err(CoeffError::Parse("r indices are 1-based".into()));
    }
    m.mul_gen(a - 1, b - 1, exp);
    Ok(())
}

fn parse_term(lx: &mut Lexer) -> Result<(RMono, Frac), CoeffError> {
    let mut mono = RMono::one();
    // a term may be a bare r-monomial (implicit coefficient 1)
    let frac = if lx.peek() == Some(b'r') {
        parse_rmono_factor(lx, &mut mono)?;
        Frac::one()
    } else {
        let num = parse_poly_factor(lx)?;
        let den = if lx.eat(b'/') {
            parse_poly_factor(lx)?
        } else {
            SPoly::one()
        };
        if den.is_zero() {
            return Err(CoeffError::Parse("zero denominator".into()));
        }
        Frac::new(num, den)
    };
    while lx.eat(b'*') {
        parse_rmono_factor(lx, &mut mono)?;
    }
    Ok((mono, frac))
}

pub fn parse_scalar(input: &str) -> Result<Scalar, CoeffError> {
    let mut lx = Lexer::new(input);
    if lx.at_end() {
        return Err(CoeffError::Parse("empty input".into()));
    }
    let mut acc = Scalar::zero();
    loop {
        let (mono, frac) = parse_term(&mut lx)?;
        let mut term = Scalar::from_frac(frac);
        if !mono.is_one() {
            let mut m = Scalar::one();
            for ((a, b), e) in mono.exponents() {
                for _ in 0..e.unsigned_abs() {
                    let g = Scalar::r_param(a, b);
                    let g = if e < 0 { g.inv().unwrap() } else { g };
                    m = &m * &g;
                }
            }
            term = &term * &m;
        }
        acc = &acc + &term;
        if lx.at_end() {
            break;
        }
        // only '+' joins top-level terms; each term carries its own sign
        lx.expect(b'+')?;
    }
    Ok(acc)
}

impl std::str::FromStr for Scalar {
    type Err = CoeffError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_scalar(s)
    }
}
