//! Rosen map T, mediant map S, digits, symbols, convergents and approximation coefficients.
//!
//! Orbits run on [`Value`]s. Exact inputs stay in Q(lambda); floating inputs are tracked as
//! rigorous enclosures, and when an enclosure cannot decide a branch the whole orbit is redone at
//! twice the precision, ending in exact arithmetic on the dyadic input if needed.

use crate::context::HeckeContext;
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::ring::{self, LambdaRing, MobiusZL, ProjZL, ZLambda};
use rug::Float;
use serde::Serialize;
use std::fmt;
use std::sync::Arc;

/// Precision ceiling for the enclosure path before falling back to exact arithmetic.
pub const MAX_INTERVAL_PREC: u32 = 8192;

/// 2x2 matrix with entries m0 + m1*lambda, m0 and m1 small integers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LamMat {
    pub a: [i64; 2],
    pub b: [i64; 2],
    pub c: [i64; 2],
    pub d: [i64; 2],
}

impl LamMat {
    pub const fn new(a: [i64; 2], b: [i64; 2], c: [i64; 2], d: [i64; 2]) -> Self {
        LamMat { a, b, c, d }
    }

    pub fn to_zl(&self, r: &Arc<LambdaRing>) -> MobiusZL {
        let f = |e: [i64; 2]| ZLambda::from_int(r, e[0]) + ZLambda::lambda(r).mul_int(e[1]);
        MobiusZL::new(f(self.a), f(self.b), f(self.c), f(self.d))
    }

    /// Inverse of [[-r lambda, eps], [1, 0]], the matrix T applies on the branch (eps, r).
    pub fn rosen(eps: i32, r: i64) -> Self {
        LamMat::new([0, -r], [eps as i64, 0], [1, 0], [0, 0])
    }

    pub fn apply_f64(&self, lam: f64, x: f64) -> f64 {
        let e = |v: [i64; 2]| v[0] as f64 + v[1] as f64 * lam;
        (e(self.a) * x + e(self.b)) / (e(self.c) * x + e(self.d))
    }
}

fn entry_iv(e: [i64; 2], lam: &Interval) -> Interval {
    let p = lam.prec();
    Interval::from_i64(p, e[0]).add(&lam.mul(&Interval::from_i64(p, e[1])))
}

fn entry_zl(e: [i64; 2], r: &Arc<LambdaRing>) -> ZLambda {
    ZLambda::from_int(r, e[0]) + ZLambda::lambda(r).mul_int(e[1])
}

/// A real number on an orbit: exact in Q(lambda) or a rigorous enclosure.
#[derive(Clone, Debug)]
pub enum Value {
    Exact(ProjZL),
    Approx(Interval),
}

/// User-facing real input.
#[derive(Clone, Debug)]
pub enum Real {
    Exact(ProjZL),
    Float(Float),
}

impl Real {
    pub fn from_f64(x: f64, prec: u32) -> Self {
        Real::Float(Float::with_val(prec, x))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Real::Exact(p) => p.to_f64(),
            Real::Float(f) => f.to_f64(),
        }
    }

    pub fn to_float(&self, prec: u32) -> Float {
        match self {
            Real::Exact(p) => p.to_float(prec),
            Real::Float(f) => Float::with_val(prec, f),
        }
    }

    fn exact(&self, ring: &Arc<LambdaRing>) -> Result<ProjZL> {
        match self {
            Real::Exact(p) => Ok(p.clone()),
            Real::Float(f) => {
                let q = f.to_rational().ok_or_else(|| Error::InvalidArgument("non-finite input".into()))?;
                Ok(ring::proj_from_rational(ring, &q))
            }
        }
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Real::Exact(p) => write!(f, "{p}"),
            Real::Float(x) => write!(f, "{}", x.to_f64()),
        }
    }
}

impl Value {
    /// sign of (c0 + c1 lambda) x + (c2 + c3 lambda); None when the enclosure cannot decide.
    pub fn lin_sign(&self, ring: &Arc<LambdaRing>, c: [i64; 4]) -> Option<i32> {
        match self {
            Value::Exact(p) => Some(p.affine_sign(&entry_zl([c[0], c[1]], ring), &entry_zl([c[2], c[3]], ring))),
            Value::Approx(iv) => {
                let lam = ring.lambda_enclosure(iv.prec());
                let v = entry_iv([c[0], c[1]], &lam).mul(iv).add(&entry_iv([c[2], c[3]], &lam));
                match v.sign() {
                    Some(0) | None => None,
                    s => s,
                }
            }
        }
    }

    pub fn apply(&self, ring: &Arc<LambdaRing>, m: &LamMat) -> Result<Value> {
        match self {
            Value::Exact(p) => Ok(Value::Exact(m.to_zl(ring).apply(p)?)),
            Value::Approx(iv) => {
                let lam = ring.lambda_enclosure(iv.prec());
                let (a, b, c, d) = (entry_iv(m.a, &lam), entry_iv(m.b, &lam), entry_iv(m.c, &lam), entry_iv(m.d, &lam));
                let den = c.mul(iv).add(&d);
                if den.contains_zero() {
                    return Err(Error::DivisionByZero);
                }
                // a Mobius map is monotone off its pole: image is the hull of the endpoint images
                let f = |x: &Float| -> Result<Interval> {
                    let x = Interval::point(x.clone());
                    a.mul(&x).add(&b).div(&c.mul(&x).add(&d))
                };
                Ok(Value::Approx(f(&iv.lo)?.hull(&f(&iv.hi)?)))
            }
        }
    }

    pub fn enclosure(&self, prec: u32) -> Result<Interval> {
        match self {
            Value::Exact(p) => p.eval(prec),
            Value::Approx(iv) => Ok(iv.clone()),
        }
    }

    pub fn to_float(&self, prec: u32) -> Float {
        match self {
            Value::Exact(p) => p.to_float(prec),
            Value::Approx(iv) => Float::with_val(prec, iv.mid()),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Value::Exact(p) => p.to_f64(),
            Value::Approx(iv) => iv.to_f64(),
        }
    }

    pub fn to_real(&self, prec: u32) -> Real {
        match self {
            Value::Exact(p) => Real::Exact(p.clone()),
            Value::Approx(iv) => Real::Float(Float::with_val(prec, iv.mid())),
        }
    }

    pub fn is_exact_zero(&self) -> bool {
        matches!(self, Value::Exact(p) if p.is_zero())
    }

    /// The image of infinity under m, in the representation of `like`.
    fn image_of_infinity(ring: &Arc<LambdaRing>, m: &LamMat, like: &Value) -> Result<Value> {
        match like {
            Value::Exact(_) => Ok(Value::Exact(ProjZL::new(entry_zl(m.a, ring), entry_zl(m.c, ring))?)),
            Value::Approx(iv) => {
                let lam = ring.lambda_enclosure(iv.prec());
                Ok(Value::Approx(entry_iv(m.a, &lam).div(&entry_iv(m.c, &lam))?))
            }
        }
    }
}

/// 1/(x - y) for y below x (y = None is -infinity, giving 0).
pub fn theta_of(x: &Value, y: &Option<Value>, prec: u32) -> Result<Interval> {
    match y {
        None => Ok(Interval::from_i64(prec, 0)),
        Some(y) => {
            if let (Value::Exact(a), Value::Exact(b)) = (x, y) {
                let num = &a.num * &b.den - &b.num * &a.den;
                let den = &a.den * &b.den;
                return ProjZL::new(den, num)?.eval(prec);
            }
            x.enclosure(prec)?.sub(&y.enclosure(prec)?).recip()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Digit {
    pub eps: i32,
    pub r: u64,
}

impl fmt::Display for Digit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}1:{})", if self.eps > 0 { "+" } else { "−" }, self.r)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum MediantSymbol {
    Uminus,
    Uplus,
    Vminus,
    Vplus,
    Ident,
}

impl MediantSymbol {
    pub fn is_u(self) -> bool {
        matches!(self, MediantSymbol::Uminus | MediantSymbol::Uplus)
    }

    pub fn label(self) -> &'static str {
        match self {
            MediantSymbol::Uminus => "U−",
            MediantSymbol::Uplus => "U+",
            MediantSymbol::Vminus => "V−",
            MediantSymbol::Vplus => "V+",
            MediantSymbol::Ident => "Id",
        }
    }

    /// The generator M_i itself.
    pub fn matrix(self) -> LamMat {
        match self {
            MediantSymbol::Uminus => LamMat::new([0, 0], [-1, 0], [1, 0], [0, 1]),
            MediantSymbol::Uplus => LamMat::new([0, 0], [1, 0], [1, 0], [0, 1]),
            MediantSymbol::Vminus => LamMat::new([-1, 0], [0, 0], [0, 1], [1, 0]),
            MediantSymbol::Vplus => LamMat::new([1, 0], [0, 0], [0, 1], [1, 0]),
            MediantSymbol::Ident => LamMat::new([1, 0], [0, 0], [0, 0], [1, 0]),
        }
    }

    /// M_i^{-1}, the branch S applies.
    pub fn inverse(self) -> LamMat {
        match self {
            MediantSymbol::Uminus => LamMat::new([0, 1], [1, 0], [-1, 0], [0, 0]),
            MediantSymbol::Uplus => LamMat::new([0, -1], [1, 0], [1, 0], [0, 0]),
            MediantSymbol::Vminus => LamMat::new([-1, 0], [0, 0], [0, 1], [1, 0]),
            MediantSymbol::Vplus => LamMat::new([1, 0], [0, 0], [0, -1], [1, 0]),
            MediantSymbol::Ident => LamMat::new([1, 0], [0, 0], [0, 0], [1, 0]),
        }
    }
}

impl fmt::Display for MediantSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub fn format_digits(d: &[Digit]) -> String {
    d.iter().map(|x| x.to_string()).collect()
}

pub fn format_symbols(s: &[MediantSymbol]) -> String {
    s.iter().map(|x| x.label()).collect::<Vec<_>>().join(" ")
}

// Branch tests, as sign((c0 + c1 l) x + c2 + c3 l).
const LEFT_END: [i64; 4] = [2, 0, 0, 1]; // 2x + l
const RIGHT_T: [i64; 4] = [2, 0, 0, -1]; // 2x - l
const RIGHT_S: [i64; 4] = [0, 1, -2, 0]; // l x - 2
const CUT_NEG: [i64; 4] = [0, 3, 2, 0]; // 3 l x + 2
const CUT_POS: [i64; 4] = [0, 3, -2, 0]; // 3 l x - 2
const ZERO: [i64; 4] = [1, 0, 0, 0];

enum Dec<T> {
    Done(T),
    Undecided,
}

macro_rules! decide {
    ($e:expr) => {
        match $e {
            Some(v) => v,
            None => return Ok(Dec::Undecided),
        }
    };
}

macro_rules! try_dec {
    ($e:expr) => {
        match $e? {
            Dec::Done(v) => v,
            Dec::Undecided => return Ok(Dec::Undecided),
        }
    };
}

fn out_of_domain(x: &Value, interval: &'static str) -> Error {
    Error::OutOfDomain { value: format!("{}", x.to_f64()), interval }
}

/// Symbol of S at x in [-l/2, 2/l); Ident at exact zero.
fn classify_s(ring: &Arc<LambdaRing>, x: &Value) -> Result<Dec<MediantSymbol>> {
    if x.is_exact_zero() {
        return Ok(Dec::Done(MediantSymbol::Ident));
    }
    if decide!(x.lin_sign(ring, LEFT_END)) < 0 || decide!(x.lin_sign(ring, RIGHT_S)) >= 0 {
        return Err(out_of_domain(x, "[-λ/2, 2/λ)"));
    }
    if decide!(x.lin_sign(ring, CUT_NEG)) < 0 {
        return Ok(Dec::Done(MediantSymbol::Uminus));
    }
    let s0 = decide!(x.lin_sign(ring, ZERO));
    if s0 < 0 {
        return Ok(Dec::Done(MediantSymbol::Vminus));
    }
    if s0 == 0 {
        return Ok(Dec::Done(MediantSymbol::Ident));
    }
    if decide!(x.lin_sign(ring, CUT_POS)) <= 0 {
        Ok(Dec::Done(MediantSymbol::Vplus))
    } else {
        Ok(Dec::Done(MediantSymbol::Uplus))
    }
}

/// Digit of T at x in [-l/2, l/2); None at exact zero.
fn classify_t(ring: &Arc<LambdaRing>, x: &Value) -> Result<Dec<Option<Digit>>> {
    if x.is_exact_zero() {
        return Ok(Dec::Done(None));
    }
    if decide!(x.lin_sign(ring, LEFT_END)) < 0 || decide!(x.lin_sign(ring, RIGHT_T)) >= 0 {
        return Err(out_of_domain(x, "[-λ/2, λ/2)"));
    }
    let eps = decide!(x.lin_sign(ring, ZERO));
    if eps == 0 {
        return Ok(Dec::Done(None));
    }
    let e = eps as i64;
    let lam = ring.lambda_enclosure(64).to_f64();
    let s = 1.0 / (lam * x.to_f64().abs());
    if !(s < 4e15) {
        return Err(Error::InvalidArgument("orbit point too close to 0 for a 64-bit digit".into()));
    }
    let mut r = ((s + 0.5).floor() as i64).max(1);
    // r is the unique integer with (2r-1) l|x| <= 2 < (2r+1) l|x|
    loop {
        if decide!(x.lin_sign(ring, [0, e * (2 * r + 1), -2, 0])) <= 0 {
            r += 1;
            continue;
        }
        if r > 1 && decide!(x.lin_sign(ring, [0, e * (2 * r - 1), -2, 0])) > 0 {
            r -= 1;
            continue;
        }
        break;
    }
    Ok(Dec::Done(Some(Digit { eps, r: r as u64 })))
}

/// One step of S on a planar point; y = None stands for infinity.
fn s_step(ring: &Arc<LambdaRing>, x: &Value, y: &Option<Value>) -> Result<Dec<(MediantSymbol, Value, Option<Value>)>> {
    let sym = try_dec!(classify_s(ring, x));
    if sym == MediantSymbol::Ident {
        return Ok(Dec::Done((sym, x.clone(), y.clone())));
    }
    let m = sym.inverse();
    let nx = x.apply(ring, &m)?;
    let ny = match y {
        None => Value::image_of_infinity(ring, &m, x)?,
        Some(y) => y.apply(ring, &m)?,
    };
    Ok(Dec::Done((sym, nx, Some(ny))))
}

#[derive(Clone, Debug)]
pub struct SOrbit {
    pub symbols: Vec<MediantSymbol>,
    /// x_1..x_n, the iterates after each step
    pub xs: Vec<Value>,
    pub ys: Vec<Value>,
    pub terminated: bool,
}

fn s_orbit_once(ring: &Arc<LambdaRing>, x0: Value, n: usize) -> Result<Dec<SOrbit>> {
    let mut out = SOrbit { symbols: Vec::new(), xs: Vec::new(), ys: Vec::new(), terminated: false };
    let (mut x, mut y) = (x0, None::<Value>);
    for _ in 0..n {
        let (sym, nx, ny) = try_dec!(s_step(ring, &x, &y));
        if sym == MediantSymbol::Ident {
            out.terminated = true;
            break;
        }
        out.symbols.push(sym);
        out.xs.push(nx.clone());
        out.ys.push(ny.clone().expect("finite after one step"));
        x = nx;
        y = ny;
    }
    Ok(Dec::Done(out))
}

#[derive(Clone, Debug)]
pub struct TOrbit {
    pub digits: Vec<Digit>,
    pub xs: Vec<Value>,
    pub terminated: bool,
}

fn t_orbit_once(ring: &Arc<LambdaRing>, x0: Value, n: usize) -> Result<Dec<TOrbit>> {
    let mut out = TOrbit { digits: Vec::new(), xs: Vec::new(), terminated: false };
    let mut x = x0;
    for _ in 0..n {
        let d = match try_dec!(classify_t(ring, &x)) {
            None => {
                out.terminated = true;
                break;
            }
            Some(d) => d,
        };
        x = x.apply(ring, &LamMat::rosen(d.eps, d.r as i64))?;
        out.digits.push(d);
        out.xs.push(x.clone());
    }
    Ok(Dec::Done(out))
}

/// Runs `f` on enclosures of increasing precision, then exactly.
fn drive<T>(ring: &Arc<LambdaRing>, x: &Real, prec: u32, f: impl Fn(Value) -> Result<Dec<T>>) -> Result<T> {
    match x {
        Real::Exact(p) => match f(Value::Exact(p.clone()))? {
            Dec::Done(v) => Ok(v),
            Dec::Undecided => unreachable!("exact path always decides"),
        },
        Real::Float(fl) => {
            let mut p = prec.max(fl.prec()).max(64);
            while p <= MAX_INTERVAL_PREC {
                let start = Value::Approx(Interval::point(Float::with_val(p, fl)));
                match f(start) {
                    Ok(Dec::Done(v)) => return Ok(v),
                    Ok(Dec::Undecided) | Err(Error::DivisionByZero) => p *= 2,
                    Err(e) => return Err(e),
                }
            }
            match f(Value::Exact(x.exact(ring)?))? {
                Dec::Done(v) => Ok(v),
                Dec::Undecided => unreachable!("exact path always decides"),
            }
        }
    }
}

/// n steps of S from x, certified branch by branch.
pub fn s_orbit(ring: &Arc<LambdaRing>, x: &Real, n: usize, prec: u32) -> Result<SOrbit> {
    drive(ring, x, prec, |v| s_orbit_once(ring, v, n))
}

/// n steps of T from x, certified branch by branch.
pub fn t_orbit(ring: &Arc<LambdaRing>, x: &Real, n: usize, prec: u32) -> Result<TOrbit> {
    drive(ring, x, prec, |v| t_orbit_once(ring, v, n))
}

#[derive(Clone, Debug)]
pub struct RosenStep {
    pub next: Value,
    /// None when x = 0 (terminal)
    pub digit: Option<Digit>,
}

pub fn rosen_step(ctx: &HeckeContext, x: &Real) -> Result<RosenStep> {
    let o = t_orbit(ctx.ring(), x, 1, ctx.precision())?;
    match o.digits.first() {
        None => Ok(RosenStep { next: Value::Exact(ProjZL::from_zl(ZLambda::zero(ctx.ring()))), digit: None }),
        Some(d) => Ok(RosenStep { next: o.xs[0].clone(), digit: Some(*d) }),
    }
}

#[derive(Clone, Debug)]
pub struct MediantStep {
    pub next: Value,
    pub symbol: MediantSymbol,
}

pub fn mediant_step(ctx: &HeckeContext, x: &Real) -> Result<MediantStep> {
    let o = s_orbit(ctx.ring(), x, 1, ctx.precision())?;
    match o.symbols.first() {
        None => Ok(MediantStep { next: Value::Exact(ProjZL::from_zl(ZLambda::zero(ctx.ring()))), symbol: MediantSymbol::Ident }),
        Some(s) => Ok(MediantStep { next: o.xs[0].clone(), symbol: *s }),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InducedReport {
    /// None when the orbit reaches 0 before leaving the central region
    pub ell: Option<usize>,
    pub first_digit: Option<Digit>,
    pub diff: f64,
    pub verified: bool,
}

/// l(x) = number of V-steps before S first lands on a U-branch; checks S^{l+1}(x) = T(x) and l+1 = r_1.
pub fn induced_length(ctx: &HeckeContext, x: &Real, tol: f64) -> Result<InducedReport> {
    let ring = ctx.ring();
    let t = t_orbit(ring, x, 1, ctx.precision())?;
    let Some(d) = t.digits.first().copied() else {
        return Ok(InducedReport { ell: None, first_digit: None, diff: 0.0, verified: true });
    };
    let s = s_orbit(ring, x, d.r as usize + 1, ctx.precision())?;
    let ell = s.symbols.iter().position(|m| m.is_u());
    let Some(l) = ell else {
        return Ok(InducedReport { ell: None, first_digit: Some(d), diff: f64::INFINITY, verified: false });
    };
    let p = ctx.precision();
    let diff = s.xs[l].to_float(p) - t.xs[0].to_float(p);
    let diff = diff.abs().to_f64();
    Ok(InducedReport { ell: Some(l), first_digit: Some(d), diff, verified: diff < tol && (l as u64 + 1) == d.r })
}

#[derive(Clone, Debug, Serialize)]
pub struct Expansion {
    pub digits: Vec<Digit>,
    pub terminated: bool,
}

pub fn expand(ctx: &HeckeContext, x: &Real, n: usize) -> Result<Expansion> {
    let o = t_orbit(ctx.ring(), x, n, ctx.precision())?;
    Ok(Expansion { digits: o.digits, terminated: o.terminated })
}

#[derive(Clone, Debug, Serialize)]
pub struct SymbolExpansion {
    pub symbols: Vec<MediantSymbol>,
    pub terminated: bool,
}

pub fn symbol_expand(ctx: &HeckeContext, x: &Real, n: usize) -> Result<SymbolExpansion> {
    let o = s_orbit(ctx.ring(), x, n, ctx.precision())?;
    Ok(SymbolExpansion { symbols: o.symbols, terminated: o.terminated })
}

/// Positions k_m (1-based) of the U-symbols.
pub fn u_positions(symbols: &[MediantSymbol]) -> Vec<usize> {
    symbols.iter().enumerate().filter(|(_, s)| s.is_u()).map(|(i, _)| i + 1).collect()
}

/// Rosen digits read off a symbol string: each T-step is a block ending in a U.
pub fn digits_from_symbols(symbols: &[MediantSymbol]) -> Vec<Digit> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, s) in symbols.iter().enumerate() {
        if s.is_u() {
            let r = (i - start + 1) as u64;
            let eps = match symbols[start] {
                MediantSymbol::Uminus | MediantSymbol::Vminus => -1,
                _ => 1,
            };
            out.push(Digit { eps, r });
            start = i + 1;
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergentState {
    pub n: usize,
    pub p_prev: ZLambda,
    pub p_cur: ZLambda,
    pub q_prev: ZLambda,
    pub q_cur: ZLambda,
    pub value: f64,
}

/// States (p_{n-1}, p_n, q_{n-1}, q_n) for n = 0..=len, via p_n = l r_n p_{n-1} + eps_n p_{n-2}.
pub fn convergents(ctx: &HeckeContext, digits: &[Digit]) -> Vec<ConvergentState> {
    let r = ctx.ring();
    let (mut pp, mut p) = (ZLambda::one(r), ZLambda::zero(r));
    let (mut qp, mut q) = (ZLambda::zero(r), ZLambda::one(r));
    let mut out = vec![ConvergentState { n: 0, p_prev: pp.clone(), p_cur: p.clone(), q_prev: qp.clone(), q_cur: q.clone(), value: 0.0 }];
    let lam = ZLambda::lambda(r);
    for (i, d) in digits.iter().enumerate() {
        let a = lam.mul_int(d.r);
        let np = &(&a * &p) + &pp.mul_int(d.eps);
        let nq = &(&a * &q) + &qp.mul_int(d.eps);
        pp = std::mem::replace(&mut p, np);
        qp = std::mem::replace(&mut q, nq);
        let value = ProjZL::new(p.clone(), q.clone()).map(|v| v.to_f64()).unwrap_or(f64::NAN);
        out.push(ConvergentState { n: i + 1, p_prev: pp.clone(), p_cur: p.clone(), q_prev: qp.clone(), q_cur: q.clone(), value });
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvergentKind {
    Principal,
    Mediant,
}

#[derive(Clone, Debug, Serialize)]
pub struct MediantEntry {
    /// i in M_1 ... M_i(infinity)
    pub index: usize,
    pub kind: ConvergentKind,
    /// level m; a principal entry at a U-time k_m carries p_{m-1}/q_{m-1} and reports m - 1
    pub level: usize,
    /// offset l for mediants, 0 for principal entries
    pub offset: usize,
    pub num: ZLambda,
    pub den: ZLambda,
    pub value: f64,
}

/// The sequence M_1...M_i(infinity), i = 1..depth, with exact numerators and denominators.
pub fn mediant_convergents(ctx: &HeckeContext, x: &Real, depth: usize) -> Result<Vec<MediantEntry>> {
    let ring = ctx.ring();
    let orbit = s_orbit(ring, x, depth, ctx.precision())?;
    Ok(mediant_entries(ring, &orbit.symbols))
}

pub fn mediant_entries(ring: &Arc<LambdaRing>, symbols: &[MediantSymbol]) -> Vec<MediantEntry> {
    let mut prod = MobiusZL::identity(ring);
    let mut out = Vec::with_capacity(symbols.len());
    let (mut m, mut last_u) = (0usize, 0usize);
    for (i, s) in symbols.iter().enumerate() {
        prod = prod.mul(&s.matrix().to_zl(ring));
        let (mut num, mut den) = (prod.a.clone(), prod.c.clone());
        if den.sign() < 0 {
            num = -num;
            den = -den;
        }
        let value = ProjZL::new(num.clone(), den.clone()).map(|v| v.to_f64()).unwrap_or(f64::NAN);
        let (kind, level, offset) = if s.is_u() {
            m += 1;
            last_u = i + 1;
            (ConvergentKind::Principal, m - 1, 0)
        } else {
            (ConvergentKind::Mediant, m, i + 1 - last_u)
        };
        out.push(MediantEntry { index: i + 1, kind, level, offset, num, den, value });
    }
    out
}

/// c |c x - a|, evaluated in high precision.
pub fn theta_direct(ctx: &HeckeContext, x: &Real, a: &ZLambda, c: &ZLambda) -> Result<Float> {
    if c.sign() <= 0 {
        return Err(Error::InvalidArgument("theta_direct needs c > 0".into()));
    }
    let p = ctx.precision();
    let v = match x {
        Real::Exact(xp) => {
            let num = &(c * &xp.num) - &(a * &xp.den);
            ProjZL::new(&num * c, xp.den.clone())?.eval(p)?.abs().mid()
        }
        Real::Float(f) => {
            let xf = Interval::point(Float::with_val(p.max(f.prec()), f));
            let ci = c.eval(p);
            ci.mul(&xf).sub(&a.eval(p)).abs().mul(&ci).mid()
        }
    };
    Ok(Float::with_val(p, v))
}

#[derive(Clone, Debug, Serialize)]
pub struct ThetaSeries {
    pub symbols: Vec<MediantSymbol>,
    /// Theta_i = 1/(x_i - y_i), i = 1..n
    pub values: Vec<f64>,
    pub terminated: bool,
}

/// Theta_i = 1/(x_i - y_i) along (x_i, y_i) = S-hat^i(x, infinity).
pub fn theta_orbit(ctx: &HeckeContext, x: &Real, n: usize) -> Result<ThetaSeries> {
    let ring = ctx.ring();
    let p = ctx.precision();
    let o = s_orbit(ring, x, n, p)?;
    let mut values = Vec::with_capacity(o.xs.len());
    for (xi, yi) in o.xs.iter().zip(&o.ys) {
        values.push(theta_of(xi, &Some(yi.clone()), p)?.to_f64());
    }
    Ok(ThetaSeries { symbols: o.symbols, values, terminated: o.terminated })
}
