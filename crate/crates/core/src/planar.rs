//! The planar natural extensions Omega_0 and Omega* with the measure dx dy/(x - y)^2.

use crate::context::{HeckeContext, Parity};
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::maps::{self, Digit, LamMat, MediantSymbol, Value};
use crate::ring::{MobiusZL, ProjZL, ZLambda};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rug::float::Special;
use rug::Float;
use serde::Serialize;

/// Width of the boundary collar for membership decisions.
pub const COLLAR_BITS: i32 = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DomainLabel {
    Omega0,
    OmegaStar,
}

/// J x K with J = [x_lo, x_hi) and K = [y_lo, y_hi], y_lo possibly -inf.
#[derive(Clone, Debug)]
pub struct Fiber {
    pub index: usize,
    pub x_lo: Float,
    pub x_hi: Float,
    pub y_lo: Float,
    pub y_hi: Float,
}

impl Fiber {
    pub fn to_json(&self) -> serde_json::Value {
        let y_lo = if self.y_lo.is_infinite() { serde_json::json!("-inf") } else { serde_json::json!(self.y_lo.to_f64()) };
        serde_json::json!({
            "j": self.index,
            "x_lo": self.x_lo.to_f64(),
            "x_hi": self.x_hi.to_f64(),
            "y_lo": y_lo,
            "y_hi": self.y_hi.to_f64(),
        })
    }
}

#[derive(Clone, Debug)]
pub struct PlanarDomain {
    pub label: DomainLabel,
    pub parity: Parity,
    /// sorted by x_lo
    pub fibers: Vec<Fiber>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Membership {
    Inside,
    Outside,
    Boundary,
}

/// A point (x, y) with y possibly -infinity.
#[derive(Clone, Debug)]
pub struct PlanarPoint {
    pub x: Float,
    pub y: Float,
}

impl PlanarPoint {
    pub fn new(x: Float, y: Float) -> Self {
        PlanarPoint { x, y }
    }

    /// 1/(x - y).
    pub fn theta(&self) -> Float {
        if self.y.is_infinite() {
            return Float::with_val(self.x.prec(), 0);
        }
        let d = Float::with_val(self.x.prec(), &self.x - &self.y);
        d.recip()
    }
}

fn fl(prec: u32, v: f64) -> Float {
    Float::with_val(prec, v)
}

fn neg_inf(prec: u32) -> Float {
    Float::with_val(prec, Special::NegInfinity)
}

fn collar(prec: u32) -> Float {
    Float::with_val(prec, Float::i_exp(1, -COLLAR_BITS))
}

/// Float evaluation of m0 + m1 lambda.
fn entry(e: [i64; 2], lam: &Float) -> Float {
    Float::with_val(lam.prec(), lam * e[1]) + e[0]
}

/// Mobius action on the extended real line; +-inf maps to a/c.
pub fn apply_float(m: &LamMat, lam: &Float, x: &Float) -> Float {
    let p = lam.prec();
    let (a, b, c, d) = (entry(m.a, lam), entry(m.b, lam), entry(m.c, lam), entry(m.d, lam));
    if x.is_infinite() {
        if c.is_zero() {
            return x.clone();
        }
        return Float::with_val(p, &a / &c);
    }
    let num = Float::with_val(p, &a * x) + &b;
    let den = Float::with_val(p, &c * x) + &d;
    if den.is_zero() {
        return Float::with_val(p, Special::NegInfinity);
    }
    num / den
}

/// |derivative| of a unimodular Mobius map at x.
fn mobius_deriv_abs(m: &LamMat, lam: &Float, x: &Float) -> Float {
    let den = Float::with_val(lam.prec(), &entry(m.c, lam) * x) + &entry(m.d, lam);
    Float::with_val(lam.prec(), &den * &den).recip()
}

impl PlanarDomain {
    /// Fiber whose half-open J contains x.
    pub fn fiber_of(&self, x: &Float) -> Option<&Fiber> {
        self.fibers.iter().find(|f| &f.x_lo <= x && x < &f.x_hi)
    }

    pub fn membership(&self, p: &PlanarPoint) -> Membership {
        let prec = p.x.prec();
        let c = collar(prec);
        let near = |a: &Float, b: &Float| -> bool { a.is_finite() && b.is_finite() && Float::with_val(prec, a - b).abs() < c };
        for f in &self.fibers {
            if near(&p.x, &f.x_lo) || near(&p.x, &f.x_hi) {
                return Membership::Boundary;
            }
        }
        let Some(f) = self.fiber_of(&p.x) else { return Membership::Outside };
        if near(&p.y, &f.y_hi) || near(&p.y, &f.y_lo) {
            return Membership::Boundary;
        }
        let above_lo = f.y_lo.is_infinite() || p.y >= f.y_lo;
        if above_lo && p.y <= f.y_hi {
            Membership::Inside
        } else {
            Membership::Outside
        }
    }

    pub fn x_min(&self) -> &Float {
        &self.fibers[0].x_lo
    }

    pub fn x_max(&self) -> &Float {
        &self.fibers.last().unwrap().x_hi
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "label": self.label,
            "fibers": self.fibers.iter().map(|f| f.to_json()).collect::<Vec<_>>(),
        })
    }
}

/// Omega_0 and Omega* from the phi and L tables.
pub fn build_domains(ctx: &HeckeContext) -> Result<(PlanarDomain, PlanarDomain)> {
    let p = ctx.precision();
    let lam = ctx.lambda_float();
    let half = Float::with_val(p, &lam / 2u32);
    let two_over = Float::with_val(p, 2u32 / lam.clone());
    let zero = fl(p, 0.0);
    let phi = |j: usize| ctx.phi_float(j);
    let neg_recip_l = |j: usize| -ctx.l_float(j).recip();
    let mut star = Vec::new();
    let mut zero_dom;
    match ctx.parity() {
        Parity::Even(l) => {
            let l = l as usize;
            for j in 1..l {
                star.push(Fiber { index: j, x_lo: phi(j - 1), x_hi: phi(j), y_lo: neg_inf(p), y_hi: neg_recip_l(j) });
            }
            zero_dom = star.clone();
            star.push(Fiber { index: l, x_lo: zero.clone(), x_hi: half.clone(), y_lo: neg_inf(p), y_hi: zero.clone() });
            star.push(Fiber { index: l + 1, x_lo: half.clone(), x_hi: two_over, y_lo: fl(p, -1.0), y_hi: zero.clone() });
            zero_dom.push(Fiber { index: l, x_lo: zero.clone(), x_hi: half, y_lo: neg_inf(p), y_hi: fl(p, -1.0) });
        }
        Parity::Odd(l) => {
            let l = l as usize;
            let r = ctx.r_float();
            for j in 1..=l {
                star.push(Fiber { index: 2 * j, x_lo: phi(l + j), x_hi: phi(j), y_lo: neg_inf(p), y_hi: neg_recip_l(2 * j) });
            }
            for j in 1..=l + 1 {
                star.push(Fiber {
                    index: 2 * j - 1,
                    x_lo: phi(j - 1),
                    x_hi: phi(j + l),
                    y_lo: neg_inf(p),
                    y_hi: neg_recip_l(2 * j - 1),
                });
            }
            zero_dom = star.clone();
            let one = fl(p, 1.0);
            star.push(Fiber { index: 2 * l + 2, x_lo: zero.clone(), x_hi: half.clone(), y_lo: neg_inf(p), y_hi: zero.clone() });
            star.push(Fiber { index: 2 * l + 3, x_lo: half.clone(), x_hi: one.clone(), y_lo: -r.clone().recip(), y_hi: zero.clone() });
            star.push(Fiber { index: 2 * l + 4, x_lo: one, x_hi: two_over, y_lo: -r.clone(), y_hi: zero.clone() });
            zero_dom.push(Fiber { index: 2 * l + 2, x_lo: zero, x_hi: half, y_lo: neg_inf(p), y_hi: -r.recip() });
        }
    }
    star.sort_by(|a, b| a.x_lo.partial_cmp(&b.x_lo).unwrap());
    zero_dom.sort_by(|a, b| a.x_lo.partial_cmp(&b.x_lo).unwrap());
    let o0 = PlanarDomain { label: DomainLabel::Omega0, parity: ctx.parity(), fibers: zero_dom };
    let os = PlanarDomain { label: DomainLabel::OmegaStar, parity: ctx.parity(), fibers: star };
    check_partition(&o0, &fl(p, 0.0) - half_of(&lam), half_of(&lam))?;
    check_partition(&os, &fl(p, 0.0) - half_of(&lam), Float::with_val(p, 2u32 / lam.clone()))?;
    // Omega_0 inside Omega*
    for f in &o0.fibers {
        let g = os.fiber_of(&f.x_lo).ok_or_else(|| Error::Check("Omega_0 fiber outside Omega*".into()))?;
        if f.y_hi > g.y_hi || g.x_hi < f.x_hi {
            return Err(Error::Check(format!("Omega_0 fiber {} not contained in Omega*", f.index)));
        }
    }
    Ok((o0, os))
}

fn half_of(lam: &Float) -> Float {
    Float::with_val(lam.prec(), lam / 2u32)
}

fn check_partition(d: &PlanarDomain, lo: Float, hi: Float) -> Result<()> {
    let tol = collar(lo.prec());
    let close = |a: &Float, b: &Float| Float::with_val(a.prec(), a - b).abs() < tol;
    if !close(&d.fibers[0].x_lo, &lo) || !close(&d.fibers.last().unwrap().x_hi, &hi) {
        return Err(Error::Check("fibers do not span the interval".into()));
    }
    for w in d.fibers.windows(2) {
        if !close(&w[0].x_hi, &w[1].x_lo) || w[0].x_lo >= w[0].x_hi {
            return Err(Error::Check("fibers are not a partition".into()));
        }
    }
    Ok(())
}

/// Branch of S at x using the collar; None inside the collar of a cut.
pub fn classify_s_float(ctx: &HeckeContext, x: &Float) -> Result<Option<MediantSymbol>> {
    let p = x.prec();
    let lam = Float::with_val(p, ctx.lambda_float());
    let c = collar(p);
    let cut = Float::with_val(p, 2u32 / Float::with_val(p, 3u32 * lam.clone()));
    let left = -Float::with_val(p, &lam / 2u32);
    let right = Float::with_val(p, 2u32 / lam.clone());
    let near = |b: &Float| Float::with_val(p, x - b).abs() < c;
    if near(&left) || near(&right) || near(&cut) || near(&(-cut.clone())) || x.clone().abs() < c {
        return Ok(None);
    }
    if *x < left || *x >= right {
        return Err(Error::OutOfDomain { value: x.to_f64().to_string(), interval: "[-λ/2, 2/λ)" });
    }
    Ok(Some(if *x < -cut.clone() {
        MediantSymbol::Uminus
    } else if x.is_sign_negative() {
        MediantSymbol::Vminus
    } else if *x <= cut {
        MediantSymbol::Vplus
    } else {
        MediantSymbol::Uplus
    }))
}

/// Rosen digit at x using the collar.
pub fn classify_t_float(ctx: &HeckeContext, x: &Float) -> Result<Option<Digit>> {
    let p = x.prec();
    let lam = Float::with_val(p, ctx.lambda_float());
    let c = collar(p);
    let half = Float::with_val(p, &lam / 2u32);
    if x.clone().abs() < c || Float::with_val(p, x + &half).abs() < c || Float::with_val(p, x - &half).abs() < c {
        return Ok(None);
    }
    if *x < -half.clone() || *x >= half {
        return Err(Error::OutOfDomain { value: x.to_f64().to_string(), interval: "[-λ/2, λ/2)" });
    }
    let s = Float::with_val(p, Float::with_val(p, &lam * x).abs().recip());
    let t = Float::with_val(p, &s + 0.5f64);
    let r = t.clone().floor();
    // distance of s + 1/2 to the integer grid, scaled back to x
    let frac = Float::with_val(p, &t - &r);
    let gap = Float::with_val(p, &frac * x).abs() * x.clone().abs() * lam.clone();
    if gap < c || (Float::with_val(p, 1 - frac) * x.clone().abs() * x.clone().abs() * lam) < c {
        return Ok(None);
    }
    let r = r.to_integer().unwrap().to_u64().ok_or_else(|| Error::InvalidArgument("digit overflow".into()))?;
    Ok(Some(Digit { eps: if x.is_sign_negative() { -1 } else { 1 }, r }))
}

/// S-hat(x, y) = (M^{-1} x, M^{-1} y). Err(Boundary) inside the collar.
pub fn nat_ext_step(ctx: &HeckeContext, pt: &PlanarPoint) -> Result<(PlanarPoint, MediantSymbol)> {
    let sym = classify_s_float(ctx, &pt.x)?.ok_or_else(|| Error::Boundary(format!("{}", pt.x.to_f64())))?;
    let lam = Float::with_val(pt.x.prec(), ctx.lambda_float());
    let m = sym.inverse();
    Ok((PlanarPoint::new(apply_float(&m, &lam, &pt.x), apply_float(&m, &lam, &pt.y)), sym))
}

/// T-hat(x, y): the digit matrix [[-r lambda, eps], [1, 0]] on both coordinates.
pub fn rosen_ext_step(ctx: &HeckeContext, pt: &PlanarPoint) -> Result<(PlanarPoint, Digit)> {
    let d = classify_t_float(ctx, &pt.x)?.ok_or_else(|| Error::Boundary(format!("{}", pt.x.to_f64())))?;
    let lam = Float::with_val(pt.x.prec(), ctx.lambda_float());
    let m = LamMat::rosen(d.eps, d.r as i64);
    Ok((PlanarPoint::new(apply_float(&m, &lam, &pt.x), apply_float(&m, &lam, &pt.y)), d))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DualBranch {
    I,
    II,
    III,
    IV,
}

impl DualBranch {
    /// The generator acting on this branch; it is paired with the S-branch of the same symbol.
    pub fn symbol(self) -> MediantSymbol {
        match self {
            DualBranch::I => MediantSymbol::Uminus,
            DualBranch::II => MediantSymbol::Vminus,
            DualBranch::III => MediantSymbol::Vplus,
            DualBranch::IV => MediantSymbol::Uplus,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DualBranch::I => "i",
            DualBranch::II => "ii",
            DualBranch::III => "iii",
            DualBranch::IV => "iv",
        }
    }
}

/// Dual map on (-inf, 0]: i = [-l, -1/R), ii = [-1/R, -1/l), iii = [-1/l, 0], iv = (-inf, -l).
pub fn dual_step(ctx: &HeckeContext, y: &Float) -> Result<(Float, DualBranch)> {
    let p = y.prec();
    if y.cmp0() == Some(std::cmp::Ordering::Greater) {
        return Err(Error::OutOfDomain { value: y.to_f64().to_string(), interval: "(-∞, 0]" });
    }
    let lam = Float::with_val(p, ctx.lambda_float());
    let r = Float::with_val(p, ctx.r_float());
    let br = if *y < -lam.clone() {
        DualBranch::IV
    } else if *y < -r.recip() {
        DualBranch::I
    } else if *y < -lam.clone().recip() {
        DualBranch::II
    } else {
        DualBranch::III
    };
    Ok((apply_float(&br.symbol().matrix(), &lam, y), br))
}

/// The partition points {-lambda, -1/R, -1/lambda} of the dual map.
pub fn dual_partition(ctx: &HeckeContext) -> Vec<f64> {
    let lam = ctx.lambda_f64();
    vec![-lam, -1.0 / ctx.r_f64(), -1.0 / lam]
}

/// Residual K(Sx, y)|S'(x)| - K(x, T#y)|T#'(y)| with K = 1/(x - y)^2, for x in the S-branch of `sym`
/// and y in the paired dual branch.
pub fn dual_functional_residual(ctx: &HeckeContext, sym: MediantSymbol, x: &Float, y: &Float) -> Float {
    let p = x.prec();
    let lam = Float::with_val(p, ctx.lambda_float());
    let a = sym.inverse();
    let m = sym.matrix();
    let sx = apply_float(&a, &lam, x);
    let ty = apply_float(&m, &lam, y);
    let k = |u: &Float, v: &Float| -> Float {
        let d = Float::with_val(p, u - v);
        Float::with_val(p, &d * &d).recip()
    };
    let lhs = k(&sx, y) * mobius_deriv_abs(&a, &lam, x);
    let rhs = k(x, &ty) * mobius_deriv_abs(&m, &lam, y);
    let scale = Float::with_val(p, lhs.clone().abs()).max(&rhs.clone().abs());
    (lhs - rhs).abs() / scale.max(&Float::with_val(p, 1))
}

/// mu-hat of [a,b] x [c,d] under dx dy/(x - y)^2.
#[derive(Clone, Debug, PartialEq)]
pub enum Measure {
    Finite(Float),
    Infinite,
}

impl Measure {
    pub fn to_f64(&self) -> f64 {
        match self {
            Measure::Finite(v) => v.to_f64(),
            Measure::Infinite => f64::INFINITY,
        }
    }
}

/// Closed form for rectangles on one side of the diagonal; c may be -inf when the rectangle lies below.
pub fn rect_measure(a: &Float, b: &Float, c: &Float, d: &Float) -> Result<Measure> {
    let p = a.prec().max(c.prec());
    if a > b || (c.is_finite() && c > d) {
        return Err(Error::InvalidArgument("empty rectangle".into()));
    }
    if d <= a {
        // below the diagonal
        if d == a {
            return Ok(Measure::Infinite);
        }
        let bd = Float::with_val(p, b - d);
        let ad = Float::with_val(p, a - d);
        if c.is_infinite() {
            return Ok(Measure::Finite((bd / ad).ln()));
        }
        let ac = Float::with_val(p, a - c);
        let bc = Float::with_val(p, b - c);
        return Ok(Measure::Finite((ac * bd / (ad * bc)).ln()));
    }
    if c >= b && c.is_finite() {
        // above: mirror (x, y) -> (y, x)
        return rect_measure(c, d, a, b);
    }
    Err(Error::CrossesDiagonal)
}

/// Measure of fiber intersected with {x - y > t}.
fn clipped_fiber_measure(f: &Fiber, t: &Float) -> Float {
    let p = f.x_lo.prec();
    let (a, b) = (&f.x_lo, &f.x_hi);
    let d = &f.y_hi;
    let c = &f.y_lo;
    let mut total = Float::with_val(p, 0);
    // region x >= d + t: log(x - d) - log(x - c)
    let a1 = Float::with_val(p, d + t).max(a);
    if &a1 < b {
        let mut v = Float::with_val(p, b - d).ln() - Float::with_val(p, &a1 - d).ln();
        if c.is_finite() {
            v -= Float::with_val(p, b - c).ln() - Float::with_val(p, &a1 - c).ln();
        }
        total += v;
    }
    // region c + t < x < d + t: x/t - log(x - c)
    let lo = if c.is_finite() { Float::with_val(p, c + t).max(a) } else { a.clone() };
    let hi = Float::with_val(p, d + t).min(b);
    if lo < hi {
        let mut v = Float::with_val(p, &hi - &lo) / t;
        if c.is_finite() {
            v -= Float::with_val(p, &hi - c).ln() - Float::with_val(p, &lo - c).ln();
        }
        total += v;
    }
    total
}

/// Total measure, or the measure of the part with x - y > clip.
pub fn domain_measure(domain: &PlanarDomain, clip: Option<&Float>) -> Result<Float> {
    let p = domain.fibers[0].x_lo.prec();
    let mut total = Float::with_val(p, 0);
    for f in &domain.fibers {
        match clip {
            Some(t) => total += clipped_fiber_measure(f, t),
            None => match rect_measure(&f.x_lo, &f.x_hi, &f.y_lo, &f.y_hi)? {
                Measure::Finite(v) => total += v,
                Measure::Infinite => return Err(Error::InfiniteMeasure),
            },
        }
    }
    Ok(total)
}

/// Smallest s (to `tol`) beyond which the clipped measure equals lambda/s.
pub fn linear_clip_threshold(ctx: &HeckeContext, domain: &PlanarDomain, tol: f64) -> f64 {
    let p = ctx.precision();
    let lam = ctx.lambda_float();
    let is_linear = |s: f64| -> bool {
        let s = fl(p, s);
        let m = clipped_total(domain, &s);
        let target = Float::with_val(p, &lam / &s);
        (m - &target).abs() / target < 1e-20
    };
    let (mut lo, mut hi) = (0.5f64, 20.0f64);
    debug_assert!(is_linear(hi));
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if is_linear(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn clipped_total(domain: &PlanarDomain, t: &Float) -> Float {
    domain.fibers.iter().fold(Float::with_val(t.prec(), 0), |acc, f| acc + clipped_fiber_measure(f, t))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LenstraVariant {
    Rosen,
    Mediant,
}

#[derive(Clone, Debug, Serialize)]
pub struct Corner {
    pub x: f64,
    pub y: f64,
    /// x - y
    pub t: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LenstraReport {
    pub variant: LenstraVariant,
    pub corners: Vec<Corner>,
    pub argmax: usize,
    pub t: f64,
    pub constant: f64,
    #[serde(skip)]
    pub constant_float: Float,
}

/// Corner maximum of x - y over the upper profile; for the mediant variant the fibers over
/// [lambda/2, 2/lambda) are first translated by -lambda.
pub fn geometric_lenstra(ctx: &HeckeContext, variant: LenstraVariant) -> Result<LenstraReport> {
    let (o0, os) = build_domains(ctx)?;
    let p = ctx.precision();
    let lam = ctx.lambda_float();
    let half = half_of(&lam);
    let rects: Vec<Fiber> = match variant {
        LenstraVariant::Rosen => o0.fibers.clone(),
        LenstraVariant::Mediant => os
            .fibers
            .iter()
            .map(|f| {
                if f.x_lo >= half {
                    Fiber {
                        index: f.index,
                        x_lo: Float::with_val(p, &f.x_lo - &lam),
                        x_hi: Float::with_val(p, &f.x_hi - &lam),
                        y_lo: Float::with_val(p, &f.y_lo - &lam),
                        y_hi: Float::with_val(p, &f.y_hi - &lam),
                    }
                } else {
                    f.clone()
                }
            })
            .collect(),
    };
    // cells between consecutive x-breakpoints; in each the y-union must be one ray from -inf
    let tol = collar(p);
    let mut xs: Vec<Float> = rects.iter().flat_map(|f| [f.x_lo.clone(), f.x_hi.clone()]).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup_by(|a, b| Float::with_val(p, &*a - &*b).abs() < tol);
    let lo_target = -half.clone();
    if Float::with_val(p, &xs[0] - &lo_target).abs() > tol || Float::with_val(p, xs.last().unwrap() - &half).abs() > tol {
        return Err(Error::Check("translated profile does not cover [-λ/2, λ/2)".into()));
    }
    let mut corners = Vec::new();
    let mut best = (0usize, Float::with_val(p, Special::NegInfinity));
    for w in xs.windows(2) {
        let mid = Float::with_val(p, &w[0] + &w[1]) / 2u32;
        let mut ys: Vec<(Float, Float)> =
            rects.iter().filter(|f| f.x_lo < mid && mid < f.x_hi).map(|f| (f.y_lo.clone(), f.y_hi.clone())).collect();
        if ys.is_empty() {
            return Err(Error::Check("gap in the x-coverage".into()));
        }
        ys.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        if !ys[0].0.is_infinite() {
            return Err(Error::Check("profile cell does not reach -inf".into()));
        }
        let mut top = ys[0].1.clone();
        for (lo, hi) in &ys[1..] {
            if Float::with_val(p, lo - &top) > tol {
                return Err(Error::Check("profile cell is not contiguous".into()));
            }
            if *hi > top {
                top = hi.clone();
            }
        }
        let t = Float::with_val(p, &w[1] - &top);
        corners.push(Corner { x: w[1].to_f64(), y: top.to_f64(), t: t.to_f64() });
        if t > best.1 {
            best = (corners.len() - 1, t);
        }
    }
    let constant_float = best.1.clone().recip();
    Ok(LenstraReport { variant, argmax: best.0, t: best.1.to_f64(), constant: constant_float.to_f64(), corners, constant_float })
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessPoint {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub symbol: MediantSymbol,
    /// reached by a V-step, hence not on the T-hat orbit
    pub extra: bool,
    pub equality: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessOrbit {
    pub k: u32,
    pub tau0: f64,
    pub y0: f64,
    pub period: usize,
    pub t_hat_period: usize,
    pub points: Vec<WitnessPoint>,
    pub min_theta: f64,
    pub hurwitz_c: f64,
    /// exact Z[lambda] certificate (even) or exact fixed-point quadratic check (odd)
    pub exact_certified: bool,
    /// odd case: return distance after one period, as a power of two
    pub return_distance_log2: Option<f64>,
    pub expanding_x: Option<bool>,
    pub contracting_y: Option<bool>,
    /// periodic word of symbols
    pub word: Vec<MediantSymbol>,
}

/// The periodic S-hat orbit of the witness point; Theta = 1/(x - y) along it.
pub fn witness_orbit(ctx: &HeckeContext) -> Result<WitnessOrbit> {
    let ring = ctx.ring();
    let p = ctx.precision();
    let c_val = ctx.hurwitz_c();
    let eq_tol = Float::with_val(p, Float::i_exp(1, -(p as i32) / 2));
    match ctx.parity() {
        Parity::Even(l) => {
            let l = l as usize;
            let lam = ZLambda::lambda(ring);
            let one = ZLambda::one(ring);
            let x0 = ProjZL::from_zl(&one - &lam);
            let y0 = ProjZL::from_zl(-(&lam + &one));
            let (mut x, mut y) = (Value::Exact(x0.clone()), Value::Exact(y0.clone()));
            let mut points = Vec::new();
            let mut word = Vec::new();
            let mut min_theta = Float::with_val(p, Special::Infinity);
            let half = ProjZL::from_ratio(ring, 1, 2)?;
            for step in 0..(4 * l + 8) {
                let Value::Exact(xe) = &x else { unreachable!() };
                let Value::Exact(ye) = &y else { unreachable!() };
                if step > 0 && *xe == x0 && *ye == y0 {
                    break;
                }
                let th = maps::theta_of(&x, &Some(y.clone()), p)?;
                let th_exact = theta_exact(xe, ye)?;
                let sym = symbol_exact(ctx, xe)?;
                let prev_v = word.last().map(|s: &MediantSymbol| !s.is_u()).unwrap_or(false);
                let thf = Float::with_val(p, th.mid());
                if thf < min_theta {
                    min_theta = thf.clone();
                }
                points.push(WitnessPoint {
                    x: xe.to_f64(),
                    y: ye.to_f64(),
                    theta: thf.to_f64(),
                    symbol: sym,
                    extra: prev_v,
                    equality: th_exact == half,
                });
                word.push(sym);
                let m = sym.inverse();
                x = x.apply(ring, &m)?;
                y = y.apply(ring, &m)?;
            }
            let Value::Exact(xe) = &x else { unreachable!() };
            let Value::Exact(ye) = &y else { unreachable!() };
            let closed = *xe == x0 && *ye == y0;
            // the first point is reached from the last by a V-step iff the word ends in V
            if let Some(last) = word.last() {
                points[0].extra = !last.is_u();
            }
            let t_hat_period = points.iter().filter(|q| !q.extra).count();
            Ok(WitnessOrbit {
                k: ctx.k(),
                tau0: x0.to_f64(),
                y0: y0.to_f64(),
                period: points.len(),
                t_hat_period,
                min_theta: min_theta.to_f64(),
                hurwitz_c: c_val.to_f64(),
                exact_certified: closed,
                return_distance_log2: None,
                expanding_x: None,
                contracting_y: None,
                points,
                word,
            })
        }
        Parity::Odd(_) => {
            let wp = 4 * p;
            let lam_iv = ring.lambda_enclosure(wp);
            let r_iv = odd_r_enclosure(&lam_iv)?;
            let x0 = r_iv.sub(&lam_iv);
            let y0 = lam_iv.add(&r_iv.recip()?).neg();
            let (mut x, mut y) = (Value::Approx(x0.clone()), Value::Approx(y0.clone()));
            let mut points = Vec::new();
            let mut word = Vec::new();
            let mut min_theta = Float::with_val(p, Special::Infinity);
            let target = Float::with_val(wp, Float::i_exp(1, -100));
            let mut ret = None;
            for step in 0..200 {
                if step > 0 {
                    let dx = x.enclosure(wp)?.sub(&x0).abs().hi;
                    let dy = y.enclosure(wp)?.sub(&y0).abs().hi;
                    if dx < target && dy < target {
                        ret = Some(dx.max(&dy).log2().to_f64());
                        break;
                    }
                }
                let xi = x.enclosure(wp)?;
                let sym = symbol_interval(ctx, &x)?;
                let th = maps::theta_of(&x, &Some(y.clone()), wp)?;
                let thf = Float::with_val(p, th.mid());
                let prev_v = word.last().map(|s: &MediantSymbol| !s.is_u()).unwrap_or(false);
                if thf < min_theta {
                    min_theta = thf.clone();
                }
                let equality = Float::with_val(p, &thf - &c_val).abs() < eq_tol;
                points.push(WitnessPoint {
                    x: xi.to_f64(),
                    y: y.to_f64(),
                    theta: thf.to_f64(),
                    symbol: sym,
                    extra: prev_v,
                    equality,
                });
                word.push(sym);
                let m = sym.inverse();
                x = x.apply(ring, &m)?;
                y = y.apply(ring, &m)?;
            }
            if let Some(last) = word.last() {
                points[0].extra = !last.is_u();
            }
            // exact certificate: the period map g fixes the roots of t^2 + (l+2)t + (2l-1)
            let g = word.iter().fold(MobiusZL::identity(ring), |acc, s| s.inverse().to_zl(ring).mul(&acc));
            let lam = ZLambda::lambda(ring);
            let two = ZLambda::from_int(ring, 2);
            let one = ZLambda::one(ring);
            let b1 = &lam + &two;
            let b0 = &(&two * &lam) - &one;
            let exact = ret.is_some() && (&g.c * &b1) == (&g.d - &g.a) && (&g.c * &b0) == -&g.b && !g.c.is_zero();
            // |g'(t)| = 1/(c t + d)^2 at the two fixed points
            let gd = |t: &Interval| -> Result<Interval> {
                let den = g.c.eval(wp).mul(t).add(&g.d.eval(wp));
                den.mul(&den).recip()
            };
            let one_f = Float::with_val(wp, 1);
            let expanding = gd(&x0)?.lo > one_f;
            let contracting = gd(&y0)?.hi < one_f;
            let t_hat_period = points.iter().filter(|q| !q.extra).count();
            Ok(WitnessOrbit {
                k: ctx.k(),
                tau0: x0.to_f64(),
                y0: y0.to_f64(),
                period: if ret.is_some() { points.len() } else { 0 },
                t_hat_period,
                min_theta: min_theta.to_f64(),
                hurwitz_c: c_val.to_f64(),
                exact_certified: exact,
                return_distance_log2: ret,
                expanding_x: Some(expanding),
                contracting_y: Some(contracting),
                points,
                word,
            })
        }
    }
}

fn odd_r_enclosure(lam: &Interval) -> Result<Interval> {
    let p = lam.prec();
    let two = Interval::from_i64(p, 2);
    let b = two.sub(lam);
    b.mul(&b).add(&Interval::from_i64(p, 4)).sqrt()?.sub(&b).div(&two)
}

fn theta_exact(x: &ProjZL, y: &ProjZL) -> Result<ProjZL> {
    let num = &x.num * &y.den - &y.num * &x.den;
    ProjZL::new(&x.den * &y.den, num)
}

fn symbol_exact(ctx: &HeckeContext, x: &ProjZL) -> Result<MediantSymbol> {
    let o = maps::s_orbit(ctx.ring(), &maps::Real::Exact(x.clone()), 1, ctx.precision())?;
    Ok(o.symbols.first().copied().unwrap_or(MediantSymbol::Ident))
}

fn symbol_interval(ctx: &HeckeContext, x: &Value) -> Result<MediantSymbol> {
    let iv = x.enclosure(ctx.precision())?;
    for sym in [MediantSymbol::Uminus, MediantSymbol::Vminus, MediantSymbol::Vplus, MediantSymbol::Uplus] {
        if branch_contains(ctx, sym, &iv) {
            return Ok(sym);
        }
    }
    Err(Error::Boundary(format!("witness point {} not separated from a cut", iv.to_f64())))
}

fn branch_contains(ctx: &HeckeContext, sym: MediantSymbol, iv: &Interval) -> bool {
    let ring = ctx.ring();
    let v = Value::Approx(iv.clone());
    let s = |c: [i64; 4]| v.lin_sign(ring, c);
    match sym {
        MediantSymbol::Uminus => s([2, 0, 0, 1]) == Some(1) && s([0, 3, 2, 0]) == Some(-1),
        MediantSymbol::Vminus => s([0, 3, 2, 0]) == Some(1) && s([1, 0, 0, 0]) == Some(-1),
        MediantSymbol::Vplus => s([1, 0, 0, 0]) == Some(1) && s([0, 3, -2, 0]) == Some(-1),
        MediantSymbol::Uplus => s([0, 3, -2, 0]) == Some(1) && s([0, 1, -2, 0]) == Some(-1),
        MediantSymbol::Ident => false,
    }
}

/// Branch cylinders of S as closed-open x ranges.
pub fn branch_ranges(ctx: &HeckeContext) -> Vec<(MediantSymbol, Float, Float)> {
    let p = ctx.precision();
    let lam = ctx.lambda_float();
    let cut = Float::with_val(p, 2u32 / Float::with_val(p, 3u32 * lam.clone()));
    let zero = fl(p, 0.0);
    vec![
        (MediantSymbol::Uminus, -half_of(&lam), -cut.clone()),
        (MediantSymbol::Vminus, -cut.clone(), zero.clone()),
        (MediantSymbol::Vplus, zero, cut.clone()),
        (MediantSymbol::Uplus, cut, Float::with_val(p, 2u32 / lam)),
    ]
}

#[derive(Clone, Debug, Serialize)]
pub struct ImageRect {
    pub symbol: MediantSymbol,
    pub fiber: usize,
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
    #[serde(skip)]
    pub exact: [Float; 4],
}

/// Images under S-hat of every (fiber, branch) piece of Omega*.
pub fn image_rectangles(ctx: &HeckeContext, os: &PlanarDomain) -> Vec<ImageRect> {
    let p = ctx.precision();
    let lam = ctx.lambda_float();
    let mut out = Vec::new();
    for f in &os.fibers {
        for (sym, blo, bhi) in branch_ranges(ctx) {
            let lo = if f.x_lo > blo { f.x_lo.clone() } else { blo.clone() };
            let hi = if f.x_hi < bhi { f.x_hi.clone() } else { bhi.clone() };
            if Float::with_val(p, &hi - &lo) <= collar(p) {
                continue;
            }
            let m = sym.inverse();
            let mut xs = [apply_float(&m, &lam, &lo), apply_float(&m, &lam, &hi)];
            let mut ys = [apply_float(&m, &lam, &f.y_lo), apply_float(&m, &lam, &f.y_hi)];
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
            // y = 0 under the U+ branch has image -inf
            for v in ys.iter_mut() {
                if v.is_infinite() {
                    *v = neg_inf(p);
                }
            }
            ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
            out.push(ImageRect {
                symbol: sym,
                fiber: f.index,
                x_lo: xs[0].to_f64(),
                x_hi: xs[1].to_f64(),
                y_lo: ys[0].to_f64(),
                y_hi: ys[1].to_f64(),
                exact: [xs[0].clone(), xs[1].clone(), ys[0].clone(), ys[1].clone()],
            });
        }
    }
    out
}

/// Checks that the image rectangles tile Omega* exactly, by coordinate compression.
pub fn tiling_audit(ctx: &HeckeContext, os: &PlanarDomain, images: &[ImageRect]) -> (usize, usize) {
    let p = ctx.precision();
    let tol = Float::with_val(p, Float::i_exp(1, -(p as i32) / 2));
    let mut xs: Vec<Float> = os.fibers.iter().flat_map(|f| [f.x_lo.clone(), f.x_hi.clone()]).collect();
    let mut ys: Vec<Float> = os.fibers.iter().flat_map(|f| [f.y_lo.clone(), f.y_hi.clone()]).collect();
    for r in images {
        xs.extend([r.exact[0].clone(), r.exact[1].clone()]);
        ys.extend([r.exact[2].clone(), r.exact[3].clone()]);
    }
    ys.retain(|v| v.is_finite());
    for v in [&mut xs, &mut ys] {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v.dedup_by(|a, b| Float::with_val(p, &*a - &*b).abs() < tol);
    }
    let mut y_mids = vec![Float::with_val(p, &ys[0] - 1u32)];
    for w in ys.windows(2) {
        y_mids.push(Float::with_val(p, &w[0] + &w[1]) / 2u32);
    }
    let (mut cells, mut bad) = (0, 0);
    for w in xs.windows(2) {
        let xm = Float::with_val(p, &w[0] + &w[1]) / 2u32;
        for ym in &y_mids {
            let in_star = os
                .fiber_of(&xm)
                .map(|f| (f.y_lo.is_infinite() || *ym > f.y_lo) && *ym < f.y_hi)
                .unwrap_or(false);
            let cover = images
                .iter()
                .filter(|r| r.exact[0] < xm && xm < r.exact[1] && (r.exact[2].is_infinite() || *ym > r.exact[2]) && *ym < r.exact[3])
                .count();
            cells += 1;
            if cover != usize::from(in_star) {
                bad += 1;
            }
        }
    }
    (cells, bad)
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct BijectivityReport {
    pub k: u32,
    pub samples: usize,
    pub boundary: usize,
    pub containment_violations: usize,
    pub preimage_violations: usize,
    pub tiling_cells: usize,
    pub tiling_violations: usize,
    pub offending: Vec<(f64, f64)>,
}

impl BijectivityReport {
    fn merge(mut self, o: Self) -> Self {
        self.samples += o.samples;
        self.boundary += o.boundary;
        self.containment_violations += o.containment_violations;
        self.preimage_violations += o.preimage_violations;
        self.offending.extend(o.offending);
        self.offending.truncate(10);
        self
    }

    pub fn passed(&self) -> bool {
        self.containment_violations == 0 && self.preimage_violations == 0 && self.tiling_violations == 0
    }
}

/// Uniform sample from Omega* with y truncated to [-10 lambda, 0]; every 16th draw uses y = -inf
/// when its fiber is unbounded below.
pub fn sample_omega_star(ctx: &HeckeContext, os: &PlanarDomain, rng: &mut ChaCha8Rng, idx: usize) -> PlanarPoint {
    let p = ctx.precision();
    let lam = ctx.lambda_f64();
    let (xl, xh) = (os.x_min().to_f64(), os.x_max().to_f64());
    let ymax = 10.0 * lam;
    loop {
        let x = fl(p, rng.gen_range(xl..xh));
        let Some(f) = os.fiber_of(&x) else { continue };
        if idx % 16 == 15 && f.y_lo.is_infinite() {
            return PlanarPoint::new(x, neg_inf(p));
        }
        let y = fl(p, rng.gen_range(-ymax..0.0));
        let pt = PlanarPoint::new(x, y);
        if os.membership(&pt) == Membership::Inside {
            return pt;
        }
    }
}

pub fn check_bijectivity(ctx: &HeckeContext, n_samples: usize, seed: u64) -> Result<BijectivityReport> {
    let (_, os) = build_domains(ctx)?;
    let block = 1000usize;
    let n_blocks = n_samples.div_ceil(block);
    let lam = ctx.lambda_float();
    let gens = [MediantSymbol::Uminus, MediantSymbol::Vminus, MediantSymbol::Vplus, MediantSymbol::Uplus];
    let report = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let mut rep = BijectivityReport::default();
            let count = block.min(n_samples - b * block);
            for i in 0..count {
                let pt = sample_omega_star(ctx, &os, &mut rng, i);
                rep.samples += 1;
                // forward containment
                let img = match nat_ext_step(ctx, &pt) {
                    Ok((img, _)) => img,
                    Err(Error::Boundary(_)) => {
                        rep.boundary += 1;
                        continue;
                    }
                    Err(_) => {
                        rep.containment_violations += 1;
                        rep.offending.push((pt.x.to_f64(), pt.y.to_f64()));
                        continue;
                    }
                };
                match os.membership(&img) {
                    Membership::Inside => {}
                    Membership::Boundary => {
                        rep.boundary += 1;
                        continue;
                    }
                    Membership::Outside => {
                        rep.containment_violations += 1;
                        rep.offending.push((pt.x.to_f64(), pt.y.to_f64()));
                        continue;
                    }
                }
                // preimage uniqueness
                let mut valid = 0;
                let mut boundary = false;
                for g in gens {
                    let m = g.matrix();
                    let pre = PlanarPoint::new(apply_float(&m, &lam, &pt.x), apply_float(&m, &lam, &pt.y));
                    if pre.x.is_infinite() {
                        continue;
                    }
                    let in_branch = match classify_s_float(ctx, &pre.x) {
                        Ok(Some(s)) => s == g,
                        Ok(None) => {
                            boundary = true;
                            false
                        }
                        Err(_) => false,
                    };
                    if !in_branch {
                        continue;
                    }
                    match os.membership(&pre) {
                        Membership::Inside => valid += 1,
                        Membership::Boundary => boundary = true,
                        Membership::Outside => {}
                    }
                }
                if boundary {
                    rep.boundary += 1;
                } else if valid != 1 {
                    rep.preimage_violations += 1;
                    rep.offending.push((pt.x.to_f64(), pt.y.to_f64()));
                }
            }
            rep
        })
        .reduce(BijectivityReport::default, BijectivityReport::merge);
    let images = image_rectangles(ctx, &os);
    let (cells, bad) = tiling_audit(ctx, &os, &images);
    Ok(BijectivityReport { k: ctx.k(), tiling_cells: cells, tiling_violations: bad, ..report })
}

#[derive(Clone, Debug, Serialize)]
pub struct InvarianceReport {
    pub k: u32,
    pub rectangles: usize,
    pub max_deviation: f64,
    pub worst: Option<[f64; 4]>,
}

/// A rectangle [a,b] x [c,d] inside one branch cylinder.
#[derive(Clone, Debug)]
pub struct BranchRect {
    pub symbol: MediantSymbol,
    pub rect: [Float; 4],
}

/// Random rectangles inside Omega*, each within one fiber and one branch cylinder.
pub fn random_branch_rects(ctx: &HeckeContext, n: usize, seed: u64) -> Result<Vec<BranchRect>> {
    let (_, os) = build_domains(ctx)?;
    let p = ctx.precision();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let branches = branch_ranges(ctx);
    let mut out = Vec::new();
    while out.len() < n {
        let f = &os.fibers[rng.gen_range(0..os.fibers.len())];
        let (sym, blo, bhi) = &branches[rng.gen_range(0..4)];
        let lo = if f.x_lo > *blo { f.x_lo.to_f64() } else { blo.to_f64() };
        let hi = if f.x_hi < *bhi { f.x_hi.to_f64() } else { bhi.to_f64() };
        if hi - lo < 1e-6 {
            continue;
        }
        let w = hi - lo;
        let mut a = rng.gen_range(lo + 1e-9 * w..hi - 1e-9 * w);
        let mut b = rng.gen_range(lo + 1e-9 * w..hi - 1e-9 * w);
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        let yhi = f.y_hi.to_f64();
        let ylo = if f.y_lo.is_infinite() { yhi - 10.0 } else { f.y_lo.to_f64() };
        let mut c = rng.gen_range(ylo..yhi);
        let mut d = rng.gen_range(ylo..yhi);
        if c > d {
            std::mem::swap(&mut c, &mut d);
        }
        // keep off the diagonal corner (0, 0)
        if d >= a - 1e-6 {
            continue;
        }
        let c = if f.y_lo.is_infinite() && rng.gen_bool(0.2) { neg_inf(p) } else { fl(p, c) };
        out.push(BranchRect { symbol: *sym, rect: [fl(p, a), fl(p, b), c, fl(p, d)] });
    }
    Ok(out)
}

/// mu-hat(rect) against mu-hat(S-hat(rect)), both by the closed form.
pub fn check_invariance(ctx: &HeckeContext, rects: &[BranchRect]) -> Result<InvarianceReport> {
    let lam = ctx.lambda_float();
    let mut max_dev = 0.0f64;
    let mut worst = None;
    for br in rects {
        let [a, b, c, d] = &br.rect;
        for x in [a, b] {
            let s = classify_s_float(ctx, x)?;
            if s.is_some() && s != Some(br.symbol) {
                return Err(Error::InvalidArgument("rectangle straddles a branch cut".into()));
            }
        }
        let m = br.symbol.inverse();
        let mut xs = [apply_float(&m, &lam, a), apply_float(&m, &lam, b)];
        let mut ys = [apply_float(&m, &lam, c), apply_float(&m, &lam, d)];
        xs.sort_by(|u, v| u.partial_cmp(v).unwrap());
        ys.sort_by(|u, v| u.partial_cmp(v).unwrap());
        let before = rect_measure(a, b, c, d)?;
        let after = rect_measure(&xs[0], &xs[1], &ys[0], &ys[1])?;
        let dev = (before.to_f64() - after.to_f64()).abs();
        if let (Measure::Finite(u), Measure::Finite(v)) = (&before, &after) {
            let dev = Float::with_val(u.prec(), u - v).abs().to_f64();
            if dev > max_dev {
                max_dev = dev;
                worst = Some([a.to_f64(), b.to_f64(), c.to_f64(), d.to_f64()]);
            }
        } else if before != after || dev.is_nan() {
            max_dev = f64::INFINITY;
        }
    }
    Ok(InvarianceReport { k: ctx.k(), rectangles: rects.len(), max_deviation: max_dev, worst })
}

/// S-hat iterated up to the m-th U-symbol, against T-hat^m; returns the largest coordinate gap.
pub fn induced_composition_gap(ctx: &HeckeContext, pt: &PlanarPoint, m: usize) -> Result<f64> {
    let (mut a, mut b) = (pt.clone(), pt.clone());
    let mut worst = 0.0f64;
    for _ in 0..m {
        loop {
            let (n, sym) = nat_ext_step(ctx, &a)?;
            a = n;
            if sym.is_u() {
                break;
            }
        }
        b = rosen_ext_step(ctx, &b)?.0;
        let dx = Float::with_val(a.x.prec(), &a.x - &b.x).abs().to_f64();
        let dy = if a.y.is_infinite() && b.y.is_infinite() { 0.0 } else { Float::with_val(a.x.prec(), &a.y - &b.y).abs().to_f64() };
        worst = worst.max(dx).max(dy);
    }
    Ok(worst)
}

/// The BKS-coordinate map (t, v) -> (T t, 1/(lambda r + eps v)).
pub fn bks_step(ctx: &HeckeContext, t: &Float, v: &Float) -> Result<(Float, Float, Digit)> {
    let d = classify_t_float(ctx, t)?.ok_or_else(|| Error::Boundary(format!("{}", t.to_f64())))?;
    let lam = Float::with_val(t.prec(), ctx.lambda_float());
    let nt = apply_float(&LamMat::rosen(d.eps, d.r as i64), &lam, t);
    let nv = (Float::with_val(t.prec(), &lam * d.r) + Float::with_val(t.prec(), v * d.eps)).recip();
    Ok((nt, nv, d))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(p: u32, v: f64) -> Float {
        Float::with_val(p, v)
    }

    /// Midpoint-rule double integral as an independent oracle.
    fn quad(a: f64, b: f64, c: f64, d: f64) -> f64 {
        let n = 400;
        let (hx, hy) = ((b - a) / n as f64, (d - c) / n as f64);
        let mut s = 0.0;
        for i in 0..n {
            let x = a + (i as f64 + 0.5) * hx;
            for j in 0..n {
                let y = c + (j as f64 + 0.5) * hy;
                s += 1.0 / ((x - y) * (x - y));
            }
        }
        s * hx * hy
    }

    #[test]
    fn rect_measure_orientation() {
        let p = 128;
        let m = rect_measure(&f(p, 0.0), &f(p, 1.0), &f(p, -2.0), &f(p, -1.0)).unwrap().to_f64();
        assert!((m - (4.0f64 / 3.0).ln()).abs() < 1e-15);
        assert!((m - quad(0.0, 1.0, -2.0, -1.0)).abs() < 1e-5);
        let m = rect_measure(&f(p, 1.0), &f(p, 2.0), &f(p, -2.0), &f(p, -1.0)).unwrap().to_f64();
        assert!(m > 0.0);
        assert!((m - quad(1.0, 2.0, -2.0, -1.0)).abs() < 1e-5);
        // mirrored rectangle above the diagonal
        let m2 = rect_measure(&f(p, -2.0), &f(p, -1.0), &f(p, 1.0), &f(p, 2.0)).unwrap().to_f64();
        assert!((m - m2).abs() < 1e-15);
        // infinite depth: log((b-d)/(a-d))
        let m = rect_measure(&f(p, 0.0), &f(p, 1.0), &neg_inf(p), &f(p, -1.0)).unwrap().to_f64();
        assert!((m - 2f64.ln()).abs() < 1e-15);
        assert_eq!(rect_measure(&f(p, 0.0), &f(p, 0.5), &neg_inf(p), &f(p, 0.0)).unwrap(), Measure::Infinite);
        assert_eq!(rect_measure(&f(p, 0.0), &f(p, 1.0), &f(p, -1.0), &f(p, 0.5)).unwrap_err(), Error::CrossesDiagonal);
    }

    #[test]
    fn domains_k8_k9() {
        let c = HeckeContext::new(8).unwrap();
        let (o0, os) = build_domains(&c).unwrap();
        assert_eq!(os.fibers.len(), 5);
        let last = os.fibers.last().unwrap();
        assert_eq!(last.y_lo, -1);
        assert!((last.x_lo.to_f64() - c.lambda_f64() / 2.0).abs() < 1e-15);
        assert!((os.fibers[0].y_hi.to_f64() + 2.848).abs() < 1e-3);
        assert!(o0.fibers.iter().all(|f| f.y_hi <= -1));
        let c9 = HeckeContext::new(9).unwrap();
        let (o0, os) = build_domains(&c9).unwrap();
        assert_eq!(os.fibers.len(), 10);
        let r = c9.r_f64();
        let last = os.fibers.last().unwrap();
        assert!((last.y_lo.to_f64() + r).abs() < 1e-15 && last.x_lo == 1);
        assert!(o0.fibers.iter().all(|f| f.y_hi.to_f64() <= -1.0 / r + 1e-15));
    }

    #[test]
    fn s_hat_examples() {
        let c = HeckeContext::new(8).unwrap();
        let p = c.precision();
        let lam = c.lambda_f64();
        let (img, sym) = nat_ext_step(&c, &PlanarPoint::new(f(p, 1.0), f(p, -1.0))).unwrap();
        assert_eq!(sym, MediantSymbol::Uplus);
        assert!((img.x.to_f64() - (1.0 - lam)).abs() < 1e-15);
        assert!((img.y.to_f64() + 1.0 + lam).abs() < 1e-15);
        let (img, _) = nat_ext_step(&c, &PlanarPoint::new(f(p, -0.8), neg_inf(p))).unwrap();
        assert!((img.y.to_f64() + lam).abs() < 1e-15);
        let (_, os) = build_domains(&c).unwrap();
        let pt = PlanarPoint::new(f(p, 0.3), f(p, -3.0));
        let (img, sym) = nat_ext_step(&c, &pt).unwrap();
        assert_eq!(sym, MediantSymbol::Vplus);
        assert!((img.x.to_f64() - 0.3 / (1.0 - lam * 0.3)).abs() < 1e-14);
        assert!((img.y.to_f64() + 3.0 / (1.0 + 3.0 * lam)).abs() < 1e-14);
        assert_eq!(os.membership(&img), Membership::Inside);
    }

    #[test]
    fn dual_examples() {
        let c = HeckeContext::new(8).unwrap();
        let p = c.precision();
        let lam = c.lambda_f64();
        let (v, b) = dual_step(&c, &f(p, -lam - 1.0)).unwrap();
        assert_eq!(b, DualBranch::IV);
        assert!((v.to_f64() + 1.0).abs() < 1e-14);
        let (v, b) = dual_step(&c, &f(p, 0.0)).unwrap();
        assert_eq!(b, DualBranch::III);
        assert!(v.is_zero());
        let part = dual_partition(&c);
        assert!((part[1] + 1.0).abs() < 1e-15);
        assert!(dual_step(&c, &f(p, 0.5)).is_err());
    }

    #[test]
    fn lenstra_corners() {
        for k in [4u32, 5, 6, 7, 8, 9, 10, 11, 12] {
            let c = HeckeContext::new(k).unwrap();
            let cf = c.closed_form_constants();
            let lam = c.lambda_f64();
            let r = c.r_f64();
            let ro = geometric_lenstra(&c, LenstraVariant::Rosen).unwrap();
            let me = geometric_lenstra(&c, LenstraVariant::Mediant).unwrap();
            let rosen_cf = if k % 2 == 0 { lam / (lam + 2.0) } else { r / (r + 1.0) };
            assert!((ro.constant - rosen_cf).abs() < 1e-12, "k={k} rosen {} vs {}", ro.constant, rosen_cf);
            assert!((me.constant - cf.mediant_lenstra.to_f64()).abs() < 1e-12, "k={k} mediant {}", me.constant);
        }
    }

    #[test]
    fn clipped_measure_linear_for_large_clip() {
        for k in [5u32, 8] {
            let c = HeckeContext::new(k).unwrap();
            let (o0, os) = build_domains(&c).unwrap();
            let p = c.precision();
            for s in [3.0, 5.0, 10.0] {
                let t = f(p, s);
                for d in [&o0, &os] {
                    let m = domain_measure(d, Some(&t)).unwrap().to_f64();
                    assert!((m - c.lambda_f64() / s).abs() < 1e-12, "k={k} s={s} m={m}");
                }
            }
            assert!(domain_measure(&os, None).is_err());
            assert!(domain_measure(&o0, None).unwrap() > 0);
            assert!((domain_measure(&os, Some(&f(p, 100.0))).unwrap().to_f64() * 100.0 / c.lambda_f64() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn clip_beyond_everything_is_zero() {
        let c = HeckeContext::new(6).unwrap();
        let (o0, _) = build_domains(&c).unwrap();
        let p = c.precision();
        // Omega_0 contains points with arbitrarily negative y, so only clipping a finite rectangle vanishes
        let fib = Fiber { index: 0, x_lo: f(p, 0.0), x_hi: f(p, 1.0), y_lo: f(p, -2.0), y_hi: f(p, -1.0) };
        assert!(clipped_fiber_measure(&fib, &f(p, 3.5)).is_zero());
        assert!(domain_measure(&o0, Some(&f(p, 2.0))).unwrap() > 0);
    }

    #[test]
    fn witness_even_k8() {
        let c = HeckeContext::new(8).unwrap();
        let w = witness_orbit(&c).unwrap();
        assert!(w.exact_certified);
        assert_eq!(w.period, 4);
        assert_eq!(w.t_hat_period, 3);
        assert!((w.points[0].theta - 0.5).abs() < 1e-15);
        assert!(w.min_theta >= 0.5 - 1e-12);
        let extra: Vec<_> = w.points.iter().filter(|p| p.extra).collect();
        assert_eq!(extra.len(), 1);
        assert!((extra[0].x - 1.0).abs() < 1e-15 && (extra[0].y + 1.0).abs() < 1e-15);
        assert!(extra[0].equality);
    }

    #[test]
    fn witness_odd_k9() {
        let c = HeckeContext::new(9).unwrap();
        let w = witness_orbit(&c).unwrap();
        assert!(w.exact_certified, "{:?}", w.word);
        assert!(w.return_distance_log2.unwrap() < -100.0);
        assert_eq!(w.expanding_x, Some(true));
        assert_eq!(w.contracting_y, Some(true));
        assert!(w.min_theta >= c.hurwitz_c().to_f64() - 1e-12);
        assert!((w.points[0].theta - c.hurwitz_c().to_f64()).abs() < 1e-15);
        assert!(w.period > 2 * c.ell());
        assert_eq!(w.t_hat_period, w.word.iter().filter(|s| s.is_u()).count());
        assert_eq!(w.t_hat_period, 2 * c.ell() + 1);
    }

    #[test]
    fn bijectivity_small() {
        for k in [4u32, 5, 8, 9] {
            let c = HeckeContext::new(k).unwrap();
            let r = check_bijectivity(&c, 2000, 42).unwrap();
            assert!(r.passed(), "k={k} {r:?}");
            assert!(r.tiling_cells > 0);
        }
    }

    #[test]
    fn u_plus_fiber_image() {
        let c = HeckeContext::new(8).unwrap();
        let (_, os) = build_domains(&c).unwrap();
        let imgs = image_rectangles(&c, &os);
        let l = c.ell();
        let r = imgs.iter().find(|r| r.symbol == MediantSymbol::Uplus && r.fiber == l).unwrap();
        let lam = c.lambda_f64();
        assert!((r.x_lo - c.phi_float(1).to_f64()).abs() < 1e-14);
        assert!((r.x_hi - lam / 2.0).abs() < 1e-14);
        assert!(r.y_lo.is_infinite() && (r.y_hi + lam).abs() < 1e-14);
    }

    #[test]
    fn invariance_small() {
        let c = HeckeContext::new(7).unwrap();
        let rects = random_branch_rects(&c, 30, 1).unwrap();
        let r = check_invariance(&c, &rects).unwrap();
        assert!(r.max_deviation < 1e-12, "{r:?}");
    }

    #[test]
    fn dual_equation_holds() {
        let c = HeckeContext::new(9).unwrap();
        let p = c.precision();
        let r = dual_functional_residual(&c, MediantSymbol::Vminus, &f(p, -0.2), &f(p, -0.9));
        assert!(r < 1e-40);
    }

    #[test]
    fn induced_composition() {
        let c = HeckeContext::new(8).unwrap();
        let p = c.precision();
        let g = induced_composition_gap(&c, &PlanarPoint::new(f(p, 0.123456), f(p, -3.5)), 10).unwrap();
        assert!(g < 1e-40);
    }
}
