//! Exact literals in Q(lambda): "(1-l)/2", "-lambda/2", "2/(3λ)", "0.3", "l^2 - 1".

use crate::context::HeckeContext;
use crate::error::{Error, Result};
use crate::maps::Real;
use crate::ring::{LambdaRing, ProjZL, ZLambda};
use rug::{Integer, Rational};
use std::sync::Arc;

fn add(a: &ProjZL, b: &ProjZL) -> Result<ProjZL> {
    ProjZL::new(&a.num * &b.den + &b.num * &a.den, &a.den * &b.den)
}

fn mul(a: &ProjZL, b: &ProjZL) -> Result<ProjZL> {
    ProjZL::new(&a.num * &b.num, &a.den * &b.den)
}

fn div(a: &ProjZL, b: &ProjZL) -> Result<ProjZL> {
    if b.is_zero() {
        return Err(Error::DivisionByZero);
    }
    ProjZL::new(&a.num * &b.den, &a.den * &b.num)
}

struct Parser<'a> {
    s: Vec<char>,
    pos: usize,
    ring: &'a Arc<LambdaRing>,
}

impl<'a> Parser<'a> {
    fn peek(&mut self) -> Option<char> {
        while self.pos < self.s.len() && self.s[self.pos].is_whitespace() {
            self.pos += 1;
        }
        self.s.get(self.pos).copied()
    }

    fn err(&self, msg: &str) -> Error {
        Error::Parse(format!("{msg} at position {}", self.pos))
    }

    fn expr(&mut self) -> Result<ProjZL> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some('+') => {
                    self.pos += 1;
                    acc = add(&acc, &self.term()?)?;
                }
                Some('-') | Some('−') => {
                    self.pos += 1;
                    acc = add(&acc, &self.term()?.neg())?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<ProjZL> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some('*') => {
                    self.pos += 1;
                    acc = mul(&acc, &self.unary()?)?;
                }
                Some('/') => {
                    self.pos += 1;
                    acc = div(&acc, &self.unary()?)?;
                }
                // implicit product: "3l", "2(1+l)"
                Some(c) if c == '(' || c.is_alphabetic() => {
                    acc = mul(&acc, &self.unary()?)?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<ProjZL> {
        match self.peek() {
            Some('-') | Some('−') => {
                self.pos += 1;
                Ok(self.unary()?.neg())
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<ProjZL> {
        let base = self.atom()?;
        if self.peek() == Some('^') {
            self.pos += 1;
            let e = self.integer()?;
            let e: u32 = e.to_u32().ok_or_else(|| self.err("exponent too large"))?;
            let mut acc = ProjZL::from_zl(ZLambda::one(self.ring));
            for _ in 0..e {
                acc = mul(&acc, &base)?;
            }
            return Ok(acc);
        }
        Ok(base)
    }

    fn integer(&mut self) -> Result<Integer> {
        self.peek();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected digits"));
        }
        let txt: String = self.s[start..self.pos].iter().collect();
        Ok(txt.parse().unwrap())
    }

    fn atom(&mut self) -> Result<ProjZL> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let v = self.expr()?;
                if self.peek() != Some(')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(v)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => {
                let start = self.pos;
                while self.pos < self.s.len() && (self.s[self.pos].is_ascii_digit() || self.s[self.pos] == '.') {
                    self.pos += 1;
                }
                if self.pos < self.s.len() && (self.s[self.pos] == 'e' || self.s[self.pos] == 'E') {
                    self.pos += 1;
                    if self.pos < self.s.len() && (self.s[self.pos] == '-' || self.s[self.pos] == '+') {
                        self.pos += 1;
                    }
                    while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                        self.pos += 1;
                    }
                }
                let txt: String = self.s[start..self.pos].iter().collect();
                let q = decimal_to_rational(&txt).ok_or_else(|| self.err("bad number"))?;
                ProjZL::new(ZLambda::from_int(self.ring, q.numer().clone()), ZLambda::from_int(self.ring, q.denom().clone()))
            }
            Some(c) if c.is_alphabetic() => {
                let start = self.pos;
                while self.pos < self.s.len() && self.s[self.pos].is_alphabetic() {
                    self.pos += 1;
                }
                let name: String = self.s[start..self.pos].iter().collect();
                match name.as_str() {
                    "l" | "lambda" | "λ" => Ok(ProjZL::from_zl(ZLambda::lambda(self.ring))),
                    _ => Err(Error::Parse(format!("unknown symbol '{name}'"))),
                }
            }
            _ => Err(self.err("unexpected input")),
        }
    }
}

/// Exact rational value of a decimal literal such as "0.3" or "1.5e-3".
pub fn decimal_to_rational(txt: &str) -> Option<Rational> {
    let (mant, exp) = match txt.find(['e', 'E']) {
        Some(i) => (&txt[..i], txt[i + 1..].parse::<i32>().ok()?),
        None => (txt, 0),
    };
    let (ip, fp) = match mant.find('.') {
        Some(i) => (&mant[..i], &mant[i + 1..]),
        None => (mant, ""),
    };
    if ip.is_empty() && fp.is_empty() {
        return None;
    }
    let digits: Integer = format!("{}{}", if ip.is_empty() { "0" } else { ip }, fp).parse().ok()?;
    let scale = exp - fp.len() as i32;
    let ten = |e: u32| Integer::from(Integer::u_pow_u(10, e));
    Some(if scale >= 0 {
        Rational::from(digits * ten(scale as u32))
    } else {
        Rational::from((digits, ten((-scale) as u32)))
    })
}

pub fn parse_exact(ring: &Arc<LambdaRing>, s: &str) -> Result<ProjZL> {
    let mut p = Parser { s: s.chars().collect(), pos: 0, ring };
    let v = p.expr()?;
    if p.peek().is_some() {
        return Err(p.err("trailing input"));
    }
    if v.is_infinite() {
        return Err(Error::DivisionByZero);
    }
    Ok(v)
}

/// Every literal is parsed exactly, decimals included.
pub fn parse_real(ctx: &HeckeContext, s: &str) -> Result<Real> {
    Ok(Real::Exact(parse_exact(ctx.ring(), s)?))
}
