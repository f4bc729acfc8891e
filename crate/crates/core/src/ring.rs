//! Exact arithmetic in Z[lambda_k], lambda_k = 2cos(pi/k).

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::poly::{self, Poly};
use rug::float::Round;
use rug::{Float, Integer, Rational};
use serde::ser::{Serialize, SerializeSeq, Serializer};
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, RwLock};

/// Starting precision for sign determination.
pub const SIGN_START_PREC: u32 = 128;
const SIGN_MAX_PREC: u32 = 1 << 20;

/// The ring Z[lambda_k] for a fixed k: minimal polynomial plus certified enclosures of lambda.
pub struct LambdaRing {
    k: u32,
    min_poly: Poly,
    enclosures: RwLock<BTreeMap<u32, Interval>>,
}

impl fmt::Debug for LambdaRing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LambdaRing(k={})", self.k)
    }
}

impl LambdaRing {
    pub fn new(k: u32) -> Result<Arc<Self>> {
        if k < 4 {
            return Err(Error::UnsupportedIndex(k));
        }
        let min_poly = poly::min_poly_lambda(k);
        Ok(Arc::new(LambdaRing { k, min_poly, enclosures: RwLock::new(BTreeMap::new()) }))
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn degree(&self) -> usize {
        self.min_poly.len() - 1
    }

    pub fn min_poly(&self) -> &Poly {
        &self.min_poly
    }

    /// Enclosure of lambda of width at most 2^(3-prec), certified by a sign change of the
    /// minimal polynomial between dyadic endpoints.
    pub fn lambda_enclosure(&self, prec: u32) -> Interval {
        if let Some(iv) = self.enclosures.read().unwrap().get(&prec) {
            return iv.clone();
        }
        let wp = prec + 32;
        let mut mid = Float::with_val(wp, rug::float::Constant::Pi);
        mid /= self.k;
        mid.cos_mut();
        mid *= 2;
        let eps = Float::with_val(wp, Float::i_exp(1, -(prec as i32)));
        let lo = Float::with_val_round(wp, &mid - &eps, Round::Down).0;
        let hi = Float::with_val_round(wp, &mid + &eps, Round::Up).0;
        let slo = poly::eval_rational(&self.min_poly, &lo.to_rational().unwrap()).cmp0();
        let shi = poly::eval_rational(&self.min_poly, &hi.to_rational().unwrap()).cmp0();
        assert!(
            slo != shi && slo != std::cmp::Ordering::Equal,
            "lambda enclosure for k={} not certified",
            self.k
        );
        // outward rounding back to prec keeps iterated orbits at a fixed working precision
        let iv = Interval::new(Float::with_val_round(prec, &lo, Round::Down).0, Float::with_val_round(prec, &hi, Round::Up).0);
        self.enclosures.write().unwrap().insert(prec, iv.clone());
        iv
    }
}

/// Element c_0 + c_1 lambda + ... + c_{d-1} lambda^{d-1} of Z[lambda].
#[derive(Clone)]
pub struct ZLambda {
    ring: Arc<LambdaRing>,
    coeffs: Vec<Integer>,
}

impl PartialEq for ZLambda {
    fn eq(&self, o: &Self) -> bool {
        self.ring.k == o.ring.k && self.coeffs == o.coeffs
    }
}
impl Eq for ZLambda {}

impl std::hash::Hash for ZLambda {
    fn hash<H: std::hash::Hasher>(&self, h: &mut H) {
        self.ring.k.hash(h);
        self.coeffs.hash(h);
    }
}

impl fmt::Debug for ZLambda {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for ZLambda {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms = Vec::new();
        for (i, c) in self.coeffs.iter().enumerate() {
            if *c == 0 {
                continue;
            }
            let t = match i {
                0 => c.to_string(),
                1 => format!("{c}*l"),
                _ => format!("{c}*l^{i}"),
            };
            terms.push(t);
        }
        if terms.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", terms.join(" + ").replace("+ -", "- "))
        }
    }
}

impl Serialize for ZLambda {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.coeffs.len()))?;
        for c in &self.coeffs {
            seq.serialize_element(&c.to_string())?;
        }
        seq.end()
    }
}

impl ZLambda {
    pub fn from_int(ring: &Arc<LambdaRing>, n: impl Into<Integer>) -> Self {
        let mut coeffs = vec![Integer::new(); ring.degree()];
        coeffs[0] = n.into();
        ZLambda { ring: ring.clone(), coeffs }
    }

    pub fn zero(ring: &Arc<LambdaRing>) -> Self {
        Self::from_int(ring, 0)
    }

    pub fn one(ring: &Arc<LambdaRing>) -> Self {
        Self::from_int(ring, 1)
    }

    pub fn lambda(ring: &Arc<LambdaRing>) -> Self {
        Self::from_coeffs(ring, vec![Integer::new(), Integer::from(1)])
    }

    /// Builds an element from arbitrary-length coefficients, reducing modulo the minimal polynomial.
    pub fn from_coeffs(ring: &Arc<LambdaRing>, mut c: Vec<Integer>) -> Self {
        let d = ring.degree();
        let mp = &ring.min_poly;
        // mp is monic: lambda^d = -(mp_0 + ... + mp_{d-1} lambda^{d-1})
        while c.len() > d {
            let top = c.pop().unwrap();
            if top != 0 {
                let shift = c.len() - d;
                for i in 0..d {
                    c[shift + i] -= Integer::from(&top * &mp[i]);
                }
            }
        }
        c.resize(d, Integer::new());
        ZLambda { ring: ring.clone(), coeffs: c }
    }

    pub fn ring(&self) -> &Arc<LambdaRing> {
        &self.ring
    }

    pub fn k(&self) -> u32 {
        self.ring.k
    }

    pub fn coeffs(&self) -> &[Integer] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == 0)
    }

    fn check(&self, o: &Self) -> Result<()> {
        if self.ring.k != o.ring.k {
            Err(Error::RingMismatch(self.ring.k, o.ring.k))
        } else {
            Ok(())
        }
    }

    pub fn checked_add(&self, o: &Self) -> Result<Self> {
        self.check(o)?;
        let coeffs = self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| Integer::from(a + b)).collect();
        Ok(ZLambda { ring: self.ring.clone(), coeffs })
    }

    pub fn checked_sub(&self, o: &Self) -> Result<Self> {
        self.check(o)?;
        let coeffs = self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| Integer::from(a - b)).collect();
        Ok(ZLambda { ring: self.ring.clone(), coeffs })
    }

    pub fn checked_mul(&self, o: &Self) -> Result<Self> {
        self.check(o)?;
        let d = self.coeffs.len();
        let mut prod = vec![Integer::new(); 2 * d - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if *a == 0 {
                continue;
            }
            for (j, b) in o.coeffs.iter().enumerate() {
                if *b != 0 {
                    prod[i + j] += Integer::from(a * b);
                }
            }
        }
        Ok(Self::from_coeffs(&self.ring, prod))
    }

    pub fn mul_int(&self, n: impl Into<Integer>) -> Self {
        let n = n.into();
        let coeffs = self.coeffs.iter().map(|c| Integer::from(c * &n)).collect();
        ZLambda { ring: self.ring.clone(), coeffs }
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = Self::one(&self.ring);
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    /// gcd of the integer coefficients (0 for the zero element).
    pub fn content(&self) -> Integer {
        let mut g = Integer::new();
        for c in &self.coeffs {
            g.gcd_mut(c);
        }
        g
    }

    pub fn div_int_exact(&self, n: &Integer) -> Self {
        let coeffs = self.coeffs.iter().map(|c| Integer::from(c.div_exact_ref(n))).collect();
        ZLambda { ring: self.ring.clone(), coeffs }
    }

    /// Rigorous enclosure of the real value.
    pub fn eval(&self, prec: u32) -> Interval {
        let prec = prec.max(64);
        // guard bits scale with coefficient size so the width target survives cancellation
        let bits = self.coeffs.iter().map(|c| c.significant_bits()).max().unwrap_or(0);
        let wp = prec + bits + 16;
        let lam = self.ring.lambda_enclosure(wp);
        let mut acc = Interval::from_i64(wp, 0);
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(&lam).add(&Interval::from_int(wp, c));
        }
        acc
    }

    /// Exact sign, escalating precision until the enclosure excludes zero.
    pub fn sign(&self) -> i32 {
        if self.is_zero() {
            return 0;
        }
        let mut p = SIGN_START_PREC;
        loop {
            if let Some(s) = self.eval(p).sign() {
                if s != 0 {
                    return s;
                }
            }
            p *= 2;
            assert!(p <= SIGN_MAX_PREC, "sign determination did not terminate");
        }
    }

    pub fn to_float(&self, prec: u32) -> Float {
        Float::with_val(prec, self.eval(prec).mid())
    }

    pub fn to_f64(&self) -> f64 {
        self.eval(64).to_f64()
    }

    pub fn abs(&self) -> Self {
        if self.sign() < 0 {
            -self
        } else {
            self.clone()
        }
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $checked:ident) => {
        impl<'a> $tr<&'a ZLambda> for &'a ZLambda {
            type Output = ZLambda;
            fn $m(self, o: &'a ZLambda) -> ZLambda {
                self.$checked(o).expect("Z[lambda] operands from different rings")
            }
        }
        impl $tr<ZLambda> for ZLambda {
            type Output = ZLambda;
            fn $m(self, o: ZLambda) -> ZLambda {
                (&self).$m(&o)
            }
        }
    };
}
binop!(Add, add, checked_add);
binop!(Sub, sub, checked_sub);
binop!(Mul, mul, checked_mul);

impl Neg for &ZLambda {
    type Output = ZLambda;
    fn neg(self) -> ZLambda {
        ZLambda { ring: self.ring.clone(), coeffs: self.coeffs.iter().map(|c| Integer::from(-c)).collect() }
    }
}
impl Neg for ZLambda {
    type Output = ZLambda;
    fn neg(self) -> ZLambda {
        -&self
    }
}

/// A point of the projective line over Q(lambda), stored as num : den.
#[derive(Clone)]
pub struct ProjZL {
    pub num: ZLambda,
    pub den: ZLambda,
}

impl PartialEq for ProjZL {
    fn eq(&self, o: &Self) -> bool {
        self.ring().k == o.ring().k && (&self.num * &o.den - &o.num * &self.den).is_zero()
    }
}
impl Eq for ProjZL {}

impl std::hash::Hash for ProjZL {
    fn hash<H: std::hash::Hasher>(&self, h: &mut H) {
        self.ring().k.hash(h);
        self.canonical().hash(h);
    }
}

impl fmt::Debug for ProjZL {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) / ({})", self.num, self.den)
    }
}

impl fmt::Display for ProjZL {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_zero() {
            write!(f, "inf")
        } else {
            write!(f, "({}) / ({})", self.num, self.den)
        }
    }
}

impl Serialize for ProjZL {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("ProjZL", 2)?;
        st.serialize_field("num", &self.num)?;
        st.serialize_field("den", &self.den)?;
        st.end()
    }
}

impl ProjZL {
    /// Normalized: integer content removed and the denominator positive (numerator positive at infinity).
    pub fn new(num: ZLambda, den: ZLambda) -> Result<Self> {
        num.check(&den)?;
        if num.is_zero() && den.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let mut g = num.content();
        g.gcd_mut(&den.content());
        let (mut num, mut den) = if g > 1 { (num.div_int_exact(&g), den.div_int_exact(&g)) } else { (num, den) };
        let s = if den.is_zero() { num.sign() } else { den.sign() };
        if s < 0 {
            num = -num;
            den = -den;
        }
        Ok(ProjZL { num, den })
    }

    pub fn from_zl(x: ZLambda) -> Self {
        let one = ZLambda::one(x.ring());
        ProjZL::new(x, one).unwrap()
    }

    pub fn from_ratio(ring: &Arc<LambdaRing>, p: i64, q: i64) -> Result<Self> {
        ProjZL::new(ZLambda::from_int(ring, p), ZLambda::from_int(ring, q))
    }

    pub fn infinity(ring: &Arc<LambdaRing>) -> Self {
        ProjZL { num: ZLambda::one(ring), den: ZLambda::zero(ring) }
    }

    pub fn is_infinite(&self) -> bool {
        self.den.is_zero()
    }

    pub fn ring(&self) -> &Arc<LambdaRing> {
        self.num.ring()
    }

    /// Sign of the real value (den > 0 after normalization).
    pub fn sign(&self) -> i32 {
        self.num.sign()
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// Compare real values of two finite points.
    pub fn cmp_value(&self, o: &Self) -> std::cmp::Ordering {
        let lhs = &self.num * &o.den;
        let rhs = &o.num * &self.den;
        (lhs - rhs).sign().cmp(&0)
    }

    /// Sign of a*x + b, for a finite point x.
    pub fn affine_sign(&self, a: &ZLambda, b: &ZLambda) -> i32 {
        (a * &self.num + b * &self.den).sign()
    }

    pub fn eval(&self, prec: u32) -> Result<Interval> {
        self.num.eval(prec).div(&self.den.eval(prec))
    }

    pub fn to_float(&self, prec: u32) -> Float {
        match self.eval(prec + 8) {
            Ok(iv) => Float::with_val(prec, iv.mid()),
            Err(_) => Float::with_val(prec, rug::float::Special::Infinity),
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.to_float(64).to_f64()
    }

    pub fn neg(&self) -> Self {
        ProjZL { num: -&self.num, den: self.den.clone() }
    }

    /// Unique representation of a finite value as (integer vector) / (positive integer) in lowest
    /// terms; None at infinity.
    pub fn canonical(&self) -> Option<(Vec<Integer>, Integer)> {
        if self.den.is_zero() {
            return None;
        }
        let inv = inverse_rational(&self.den);
        let ring = self.ring().clone();
        let d = ring.degree();
        // num * inv with rational coefficients, reduced modulo the minimal polynomial
        let mut prod = vec![Rational::new(); 2 * d - 1];
        for (i, a) in self.num.coeffs.iter().enumerate() {
            for (j, b) in inv.iter().enumerate() {
                prod[i + j] += Rational::from(a * b);
            }
        }
        let mp = ring.min_poly();
        while prod.len() > d {
            let top = prod.pop().unwrap();
            let shift = prod.len() - d;
            for i in 0..d {
                prod[shift + i] -= Rational::from(&top * &mp[i]);
            }
        }
        let mut den = Integer::from(1);
        for q in &prod {
            den.lcm_mut(q.denom());
        }
        let mut v: Vec<Integer> = prod.iter().map(|q| Integer::from(q.numer() * &den) / q.denom()).collect();
        let mut g = den.clone();
        for c in &v {
            g.gcd_mut(c);
        }
        if g > 1 {
            for c in v.iter_mut() {
                c.div_exact_mut(&g);
            }
            den.div_exact_mut(&g);
        }
        Some((v, den))
    }
}

/// Coefficients of 1/x over Q for nonzero x, by solving the multiplication-by-x system.
fn inverse_rational(x: &ZLambda) -> Vec<Rational> {
    let ring = x.ring().clone();
    let d = ring.degree();
    // column j = x * lambda^j
    let mut cols = Vec::with_capacity(d);
    let mut cur = x.clone();
    let lam = ZLambda::lambda(&ring);
    for _ in 0..d {
        cols.push(cur.coeffs.clone());
        cur = &cur * &lam;
    }
    let mut m: Vec<Vec<Rational>> = (0..d)
        .map(|i| {
            let mut row: Vec<Rational> = (0..d).map(|j| Rational::from(&cols[j][i])).collect();
            row.push(Rational::from(if i == 0 { 1 } else { 0 }));
            row
        })
        .collect();
    for c in 0..d {
        let piv = (c..d).find(|&r| m[r][c] != 0).expect("multiplication matrix of a nonzero element is invertible");
        m.swap(c, piv);
        let inv = Rational::from(m[c][c].recip_ref());
        for e in m[c].iter_mut() {
            *e *= &inv;
        }
        for r in 0..d {
            if r != c && m[r][c] != 0 {
                let f = m[r][c].clone();
                for j in c..=d {
                    let t = Rational::from(&f * &m[c][j]);
                    m[r][j] -= t;
                }
            }
        }
    }
    m.into_iter().map(|row| row[d].clone()).collect()
}

/// 2x2 matrix over Z[lambda] acting by Mobius transformations.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MobiusZL {
    pub a: ZLambda,
    pub b: ZLambda,
    pub c: ZLambda,
    pub d: ZLambda,
}

impl fmt::Debug for MobiusZL {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.a, self.b, self.c, self.d)
    }
}

impl Serialize for MobiusZL {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [[&self.a, &self.b], [&self.c, &self.d]].serialize(s)
    }
}

impl MobiusZL {
    pub fn new(a: ZLambda, b: ZLambda, c: ZLambda, d: ZLambda) -> Self {
        MobiusZL { a, b, c, d }
    }

    pub fn identity(ring: &Arc<LambdaRing>) -> Self {
        let (o, z) = (ZLambda::one(ring), ZLambda::zero(ring));
        MobiusZL::new(o.clone(), z.clone(), z, o)
    }

    pub fn ring(&self) -> &Arc<LambdaRing> {
        self.a.ring()
    }

    pub fn det(&self) -> ZLambda {
        &self.a * &self.d - &self.b * &self.c
    }

    pub fn mul(&self, o: &Self) -> Self {
        MobiusZL {
            a: &self.a * &o.a + &self.b * &o.c,
            b: &self.a * &o.b + &self.b * &o.d,
            c: &self.c * &o.a + &self.d * &o.c,
            d: &self.c * &o.b + &self.d * &o.d,
        }
    }

    /// Inverse for unimodular matrices (det = +-1).
    pub fn inverse(&self) -> Result<Self> {
        let det = self.det();
        let one = ZLambda::one(self.ring());
        let s = if det == one {
            1
        } else if det == -&one {
            -1
        } else {
            return Err(Error::Singular);
        };
        Ok(MobiusZL {
            a: self.d.mul_int(s),
            b: self.b.mul_int(-s),
            c: self.c.mul_int(-s),
            d: self.a.mul_int(s),
        })
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = Self::identity(self.ring());
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    /// Projective action x -> (ax+b)/(cx+d); infinity is (1 : 0).
    pub fn apply(&self, x: &ProjZL) -> Result<ProjZL> {
        let num = &self.a * &x.num + &self.b * &x.den;
        let den = &self.c * &x.num + &self.d * &x.den;
        ProjZL::new(num, den)
    }

    /// Equality as Mobius maps (matrices up to sign).
    pub fn same_map(&self, o: &Self) -> bool {
        self == o || *self == o.scale(-1)
    }

    pub fn scale(&self, s: i64) -> Self {
        MobiusZL { a: self.a.mul_int(s), b: self.b.mul_int(s), c: self.c.mul_int(s), d: self.d.mul_int(s) }
    }

    pub fn entries_f64(&self) -> [f64; 4] {
        [self.a.to_f64(), self.b.to_f64(), self.c.to_f64(), self.d.to_f64()]
    }
}

/// The four mediant generators.
pub fn gen_u_minus(r: &Arc<LambdaRing>) -> MobiusZL {
    MobiusZL::new(ZLambda::zero(r), ZLambda::from_int(r, -1), ZLambda::one(r), ZLambda::lambda(r))
}
pub fn gen_u_plus(r: &Arc<LambdaRing>) -> MobiusZL {
    MobiusZL::new(ZLambda::zero(r), ZLambda::one(r), ZLambda::one(r), ZLambda::lambda(r))
}
pub fn gen_v_minus(r: &Arc<LambdaRing>) -> MobiusZL {
    MobiusZL::new(ZLambda::from_int(r, -1), ZLambda::zero(r), ZLambda::lambda(r), ZLambda::one(r))
}
pub fn gen_v_plus(r: &Arc<LambdaRing>) -> MobiusZL {
    MobiusZL::new(ZLambda::one(r), ZLambda::zero(r), ZLambda::lambda(r), ZLambda::one(r))
}

/// The Rosen digit matrix [[0, eps], [1, r lambda]]; its inverse [[-r lambda, eps], [1, 0]] drives T.
pub fn rosen_digit_matrix(ring: &Arc<LambdaRing>, eps: i32, r: u64) -> MobiusZL {
    MobiusZL::new(
        ZLambda::zero(ring),
        ZLambda::from_int(ring, eps),
        ZLambda::one(ring),
        ZLambda::lambda(ring).mul_int(r),
    )
}

/// Exact value of a rational number as an element of Q(lambda), when representable.
pub fn proj_from_rational(ring: &Arc<LambdaRing>, q: &Rational) -> ProjZL {
    ProjZL::new(ZLambda::from_int(ring, q.numer().clone()), ZLambda::from_int(ring, q.denom().clone())).unwrap()
}
