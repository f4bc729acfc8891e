//! Closed intervals with outward-rounded MPFR endpoints.

use crate::error::{Error, Result};
use rug::float::Round;
use rug::{Float, Integer, Rational};
use std::cmp::Ordering;

#[derive(Clone, Debug, PartialEq)]
pub struct Interval {
    pub lo: Float,
    pub hi: Float,
}

fn down<T>(prec: u32, v: T) -> Float
where
    Float: rug::Assign<T> + rug::ops::AssignRound<T, Round = Round, Ordering = Ordering>,
{
    Float::with_val_round(prec, v, Round::Down).0
}

fn up<T>(prec: u32, v: T) -> Float
where
    Float: rug::Assign<T> + rug::ops::AssignRound<T, Round = Round, Ordering = Ordering>,
{
    Float::with_val_round(prec, v, Round::Up).0
}

impl Interval {
    pub fn new(lo: Float, hi: Float) -> Self {
        debug_assert!(lo <= hi);
        Interval { lo, hi }
    }

    pub fn point(x: Float) -> Self {
        Interval { lo: x.clone(), hi: x }
    }

    pub fn from_int(prec: u32, n: &Integer) -> Self {
        Interval { lo: down(prec, n), hi: up(prec, n) }
    }

    pub fn from_i64(prec: u32, n: i64) -> Self {
        Self::from_int(prec, &Integer::from(n))
    }

    pub fn from_rational(prec: u32, q: &Rational) -> Self {
        Interval { lo: down(prec, q), hi: up(prec, q) }
    }

    pub fn prec(&self) -> u32 {
        self.lo.prec().max(self.hi.prec())
    }

    pub fn add(&self, o: &Self) -> Self {
        let p = self.prec().max(o.prec());
        Interval { lo: down(p, &self.lo + &o.lo), hi: up(p, &self.hi + &o.hi) }
    }

    pub fn sub(&self, o: &Self) -> Self {
        let p = self.prec().max(o.prec());
        Interval { lo: down(p, &self.lo - &o.hi), hi: up(p, &self.hi - &o.lo) }
    }

    pub fn neg(&self) -> Self {
        Interval { lo: Float::with_val(self.hi.prec(), -&self.hi), hi: Float::with_val(self.lo.prec(), -&self.lo) }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let p = self.prec().max(o.prec());
        let pairs = [(&self.lo, &o.lo), (&self.lo, &o.hi), (&self.hi, &o.lo), (&self.hi, &o.hi)];
        let mut lo = down(p, pairs[0].0 * pairs[0].1);
        let mut hi = up(p, pairs[0].0 * pairs[0].1);
        for (a, b) in &pairs[1..] {
            let l = down(p, *a * *b);
            let h = up(p, *a * *b);
            if l < lo {
                lo = l;
            }
            if h > hi {
                hi = h;
            }
        }
        Interval { lo, hi }
    }

    pub fn mul_int(&self, n: &Integer) -> Self {
        self.mul(&Interval::from_int(self.prec(), n))
    }

    pub fn recip(&self) -> Result<Self> {
        if self.contains_zero() {
            return Err(Error::DivisionByZero);
        }
        let p = self.prec();
        Ok(Interval { lo: down(p, 1 / &self.hi), hi: up(p, 1 / &self.lo) })
    }

    pub fn div(&self, o: &Self) -> Result<Self> {
        if o.contains_zero() {
            return Err(Error::DivisionByZero);
        }
        let p = self.prec().max(o.prec());
        let pairs = [(&self.lo, &o.lo), (&self.lo, &o.hi), (&self.hi, &o.lo), (&self.hi, &o.hi)];
        let mut lo = down(p, pairs[0].0 / pairs[0].1);
        let mut hi = up(p, pairs[0].0 / pairs[0].1);
        for (a, b) in &pairs[1..] {
            let l = down(p, *a / *b);
            let h = up(p, *a / *b);
            if l < lo {
                lo = l;
            }
            if h > hi {
                hi = h;
            }
        }
        Ok(Interval { lo, hi })
    }

    pub fn abs(&self) -> Self {
        match self.sign() {
            Some(s) if s < 0 => self.neg(),
            Some(_) => self.clone(),
            None => {
                let m = if self.hi > -self.lo.clone() { self.hi.clone() } else { Float::with_val(self.prec(), -&self.lo) };
                Interval { lo: Float::with_val(self.prec(), 0), hi: m }
            }
        }
    }

    pub fn sqrt(&self) -> Result<Self> {
        if self.lo.cmp0() == Some(Ordering::Less) {
            return Err(Error::InvalidArgument("sqrt of a negative interval".into()));
        }
        let p = self.prec();
        Ok(Interval { lo: down(p, self.lo.sqrt_ref()), hi: up(p, self.hi.sqrt_ref()) })
    }

    pub fn contains_zero(&self) -> bool {
        self.lo.cmp0() != Some(Ordering::Greater) && self.hi.cmp0() != Some(Ordering::Less)
    }

    /// Sign if the interval excludes zero, 0 for the degenerate zero interval, None otherwise.
    pub fn sign(&self) -> Option<i32> {
        if self.lo.cmp0() == Some(Ordering::Greater) {
            Some(1)
        } else if self.hi.cmp0() == Some(Ordering::Less) {
            Some(-1)
        } else if self.lo.is_zero() && self.hi.is_zero() {
            Some(0)
        } else {
            None
        }
    }

    pub fn contains(&self, x: &Float) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn mid(&self) -> Float {
        let p = self.prec();
        let mut m = Float::with_val(p + 1, &self.lo + &self.hi);
        m /= 2;
        Float::with_val(p, m)
    }

    pub fn width(&self) -> Float {
        up(self.prec(), &self.hi - &self.lo)
    }

    /// Smallest interval containing both.
    pub fn hull(&self, o: &Self) -> Self {
        Interval {
            lo: if self.lo < o.lo { self.lo.clone() } else { o.lo.clone() },
            hi: if self.hi > o.hi { self.hi.clone() } else { o.hi.clone() },
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.mid().to_f64()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn third_is_enclosed() {
        let one = Interval::from_i64(64, 1);
        let three = Interval::from_i64(64, 3);
        let t = one.div(&three).unwrap();
        let exact = Rational::from((1, 3));
        assert!(t.lo < exact && exact < t.hi);
        let back = t.mul(&three);
        assert!(back.contains(&Float::with_val(64, 1)));
    }

    #[test]
    fn sign_and_zero() {
        let z = Interval::from_i64(64, 0);
        assert_eq!(z.sign(), Some(0));
        let a = Interval::new(Float::with_val(64, -1), Float::with_val(64, 2));
        assert_eq!(a.sign(), None);
        assert!(a.recip().is_err());
        assert_eq!(a.neg().lo, -2);
        assert_eq!(a.abs().hi, 2);
    }

    #[test]
    fn mul_mixed_signs() {
        let a = Interval::new(Float::with_val(64, -2), Float::with_val(64, 3));
        let b = Interval::new(Float::with_val(64, -5), Float::with_val(64, 1));
        let c = a.mul(&b);
        assert_eq!(c.lo, -15);
        assert_eq!(c.hi, 10);
    }
}
