//! Index-k constants: lambda, parity, R, C(k), and the boundary tables phi_j, L_j.

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::maps::{t_orbit, Real, Value};
use crate::poly::Poly;
use crate::ring::{LambdaRing, ProjZL, ZLambda};
use rug::Float;
use serde::Serialize;
use std::cmp::Ordering;
use std::sync::Arc;

pub const DEFAULT_PRECISION: u32 = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "l", rename_all = "lowercase")]
pub enum Parity {
    /// k = 2l
    Even(u32),
    /// k = 2l + 3
    Odd(u32),
}

#[derive(Debug)]
pub struct HeckeContext {
    k: u32,
    prec: u32,
    ring: Arc<LambdaRing>,
    parity: Parity,
    lambda: Interval,
    r: Interval,
    hurwitz_c: Interval,
    phi: Vec<ProjZL>,
    /// L_1, L_2, ... (index j stored at j - 1)
    l_table: Vec<Interval>,
    /// exact L_j when k is even
    l_exact: Option<Vec<ProjZL>>,
}

fn iv(prec: u32, n: i64) -> Interval {
    Interval::from_i64(prec, n)
}

impl HeckeContext {
    pub fn new(k: u32) -> Result<Self> {
        Self::with_precision(k, DEFAULT_PRECISION)
    }

    pub fn with_precision(k: u32, prec: u32) -> Result<Self> {
        if k < 4 {
            return Err(Error::UnsupportedIndex(k));
        }
        if prec < 64 {
            return Err(Error::InvalidArgument("precision must be at least 64 bits".into()));
        }
        let ring = LambdaRing::new(k)?;
        let wp = prec + 64;
        let lambda = ring.lambda_enclosure(wp);
        let parity = if k % 2 == 0 { Parity::Even(k / 2) } else { Parity::Odd((k - 3) / 2) };
        let two = iv(wp, 2);
        let one = iv(wp, 1);

        let (r, hurwitz_c) = match parity {
            Parity::Even(_) => (one.clone(), one.div(&two)?),
            Parity::Odd(_) => {
                let b = two.sub(&lambda);
                let disc = b.mul(&b).add(&iv(wp, 4));
                let r = disc.sqrt()?.sub(&b).div(&two)?;
                let h = one.sub(&lambda.div(&two)?);
                let c = two.mul(&h.mul(&h).add(&one).sqrt()?).recip()?;
                (r, c)
            }
        };

        // phi_0 = -lambda/2 and its T-orbit, exactly
        let lam_zl = ZLambda::lambda(&ring);
        let phi0 = ProjZL::new(-&lam_zl, ZLambda::from_int(&ring, 2))?;
        let steps = match parity {
            Parity::Even(l) => l as usize - 1,
            Parity::Odd(l) => 2 * l as usize + 1,
        };
        let orbit = t_orbit(&ring, &Real::Exact(phi0.clone()), steps, wp)?;
        let mut phi = vec![phi0];
        for v in &orbit.xs {
            match v {
                Value::Exact(p) => phi.push(p.clone()),
                Value::Approx(_) => unreachable!(),
            }
        }
        if phi.len() != steps + 1 || !phi.last().unwrap().is_zero() {
            return Err(Error::Check(format!("T-orbit of -λ/2 does not reach 0 after {steps} steps for k={k}")));
        }

        let (l_table, l_exact) = match parity {
            Parity::Even(l) => {
                let one_zl = ProjZL::from_zl(ZLambda::one(&ring));
                let lam_p = ProjZL::from_zl(lam_zl.clone());
                let mut ls = vec![ProjZL::new(ZLambda::one(&ring), &lam_zl + &ZLambda::one(&ring))?];
                for _ in 2..l {
                    let prev = ls.last().unwrap();
                    // 1/(lambda - L)
                    ls.push(ProjZL::new(prev.den.clone(), &(&lam_zl * &prev.den) - &prev.num)?);
                }
                let expect = ProjZL::new(&lam_zl - &ZLambda::one(&ring), ZLambda::one(&ring))?;
                if l >= 2 && *ls.last().unwrap() != expect {
                    return Err(Error::Check(format!("L_(l-1) != lambda - 1 for k={k}")));
                }
                let _ = (one_zl, lam_p);
                let ivs = ls.iter().map(|p| p.eval(wp)).collect::<Result<Vec<_>>>()?;
                (ivs, Some(ls))
            }
            Parity::Odd(l) => {
                let l = l as usize;
                let n = 2 * l + 1;
                let mut t: Vec<Option<Interval>> = vec![None; n + 1];
                t[2 * l] = Some(lambda.sub(&r.recip()?));
                t[2 * l + 1] = Some(lambda.sub(&r));
                let two_lam = lambda.mul(&two);
                if l >= 1 {
                    t[1] = Some(two_lam.sub(t[2 * l].as_ref().unwrap()).recip()?);
                }
                let l2 = two_lam.sub(t[2 * l + 1].as_ref().unwrap()).recip()?;
                if 2 < 2 * l {
                    t[2] = Some(l2.clone());
                }
                for j in 3..2 * l {
                    let prev = t[j - 2].clone().unwrap();
                    t[j] = Some(lambda.sub(&prev).recip()?);
                }
                let table: Vec<Interval> = t[1..].iter().map(|v| v.clone().unwrap()).collect();
                // consistency of the closing relations
                let close = |a: &Interval, b: &Interval| -> bool {
                    let d = a.sub(b).abs();
                    d.hi < Float::with_val(wp, Float::i_exp(1, -(prec as i32)))
                };
                let l_2 = &table[1];
                if !close(l_2, &l2) {
                    return Err(Error::Check(format!("L_2 recurrences disagree for k={k}")));
                }
                if l >= 2 {
                    let a = lambda.sub(&table[2 * l - 3]).recip()?;
                    let b = lambda.sub(&table[2 * l - 2]).recip()?;
                    if !close(&a, &table[2 * l - 1]) || !close(&b, &table[2 * l]) {
                        return Err(Error::Check(format!("odd L recurrences do not close for k={k}")));
                    }
                }
                (table, None)
            }
        };

        let ctx = HeckeContext { k, prec, ring, parity, lambda, r, hurwitz_c, phi, l_table, l_exact };
        ctx.check_invariants()?;
        Ok(ctx)
    }

    fn check_invariants(&self) -> Result<()> {
        let wp = self.prec + 64;
        let lam = self.lambda_float();
        if !(lam > 1 && lam < 2) {
            return Err(Error::Check("lambda outside (1, 2)".into()));
        }
        let phi: Vec<Float> = self.phi.iter().map(|p| p.to_float(wp)).collect();
        match self.parity {
            Parity::Even(_) => {
                if !phi.windows(2).all(|w| w[0] < w[1]) {
                    return Err(Error::Check("even phi table not increasing".into()));
                }
            }
            Parity::Odd(l) => {
                let l = l as usize;
                let r = self.r_float();
                let res = Float::with_val(wp, &r * &r) + Float::with_val(wp, (2 - lam.clone()) * &r) - 1u32;
                if res.abs() > Float::with_val(wp, Float::i_exp(1, -(self.prec as i32 / 2))) {
                    return Err(Error::Check("R is not a root".into()));
                }
                let half = Float::with_val(wp, &lam / 2u32);
                if !(r > half && r < 1) {
                    return Err(Error::Check("R outside (lambda/2, 1)".into()));
                }
                // phi_0 < phi_{l+1} < phi_1 < phi_{l+2} < ... < phi_{2l} < phi_l < 0
                let mut chain = Vec::new();
                for j in 0..l {
                    chain.push(j);
                    chain.push(j + l + 1);
                }
                chain.push(l);
                if !chain.windows(2).all(|w| phi[w[0]] < phi[w[1]]) || phi[l] >= 0 {
                    return Err(Error::Check("odd phi interleaving violated".into()));
                }
                let cut3 = Float::with_val(wp, -2) / Float::with_val(wp, 3u32 * lam.clone());
                let cut5 = Float::with_val(wp, -2) / Float::with_val(wp, 5u32 * lam.clone());
                if !(phi[l] > cut3 && phi[l] < cut5) {
                    return Err(Error::Check("phi_l outside (-2/(3λ), -2/(5λ))".into()));
                }
                if !(0..=2 * l).filter(|&j| j != l).all(|j| phi[j] < cut3) {
                    return Err(Error::Check("odd chain member right of -2/(3λ)".into()));
                }
            }
        }
        Ok(())
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn precision(&self) -> u32 {
        self.prec
    }

    pub fn ring(&self) -> &Arc<LambdaRing> {
        &self.ring
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn is_even(&self) -> bool {
        matches!(self.parity, Parity::Even(_))
    }

    /// l in k = 2l (even) or k = 2l + 3 (odd).
    pub fn ell(&self) -> usize {
        match self.parity {
            Parity::Even(l) | Parity::Odd(l) => l as usize,
        }
    }

    pub fn min_poly(&self) -> &Poly {
        self.ring.min_poly()
    }

    pub fn lambda_exact(&self) -> ZLambda {
        ZLambda::lambda(&self.ring)
    }

    pub fn lambda_interval(&self) -> &Interval {
        &self.lambda
    }

    pub fn lambda_float(&self) -> Float {
        Float::with_val(self.prec, self.lambda.mid())
    }

    pub fn lambda_f64(&self) -> f64 {
        self.lambda.to_f64()
    }

    pub fn r_interval(&self) -> &Interval {
        &self.r
    }

    pub fn r_float(&self) -> Float {
        Float::with_val(self.prec, self.r.mid())
    }

    pub fn r_f64(&self) -> f64 {
        self.r.to_f64()
    }

    pub fn hurwitz_c(&self) -> Float {
        Float::with_val(self.prec, self.hurwitz_c.mid())
    }

    pub fn hurwitz_c_interval(&self) -> &Interval {
        &self.hurwitz_c
    }

    /// Exact phi_j = T^j(-lambda/2).
    pub fn phi(&self) -> &[ProjZL] {
        &self.phi
    }

    pub fn phi_float(&self, j: usize) -> Float {
        self.phi[j].to_float(self.prec)
    }

    /// L_j for j >= 1.
    pub fn l_interval(&self, j: usize) -> &Interval {
        &self.l_table[j - 1]
    }

    pub fn l_float(&self, j: usize) -> Float {
        Float::with_val(self.prec, self.l_table[j - 1].mid())
    }

    pub fn l_count(&self) -> usize {
        self.l_table.len()
    }

    pub fn l_exact(&self) -> Option<&[ProjZL]> {
        self.l_exact.as_deref()
    }

    /// Residual of the minimal polynomial at the stored lambda.
    pub fn min_poly_residual(&self) -> Float {
        let lam = self.lambda_float();
        let mut acc = Float::with_val(self.prec, 0);
        for c in self.min_poly().iter().rev() {
            acc *= &lam;
            acc += c;
        }
        acc.abs()
    }

    pub fn closed_form_constants(&self) -> ConstantsReport {
        let wp = self.prec + 64;
        let lam = &self.lambda;
        let two = iv(wp, 2);
        let one = iv(wp, 1);
        let (rosen, mediant) = match self.parity {
            Parity::Even(_) => {
                let rosen = lam.div(&lam.add(&two)).unwrap();
                let mediant = if self.k == 4 { two.sqrt().unwrap().div(&two).unwrap() } else { lam.sub(&one) };
                (rosen, mediant)
            }
            Parity::Odd(_) => (self.r.div(&self.r.add(&one)).unwrap(), lam.sub(&self.r)),
        };
        let f = |i: &Interval| Float::with_val(self.prec, i.mid());
        let report = ConstantsReport {
            k: self.k,
            rosen_lenstra: f(&rosen),
            mediant_lenstra: f(&mediant),
            hurwitz_c: f(&self.hurwitz_c),
            k4_candidates: (self.k == 4).then(|| (f(&two.sqrt().unwrap().div(&two).unwrap()), f(&lam.sub(&one)))),
        };
        assert!(
            mediant.lo.partial_cmp(&self.hurwitz_c.hi) == Some(Ordering::Greater),
            "mediant Lenstra constant must exceed C(k)"
        );
        report
    }

    pub fn to_json(&self, digits: usize) -> serde_json::Value {
        let s = |x: &Float| fmt_float(x, digits);
        serde_json::json!({
            "k": self.k,
            "precision_bits": self.prec,
            "lambda": s(&self.lambda_float()),
            "parity": self.parity,
            "R": s(&self.r_float()),
            "C": s(&self.hurwitz_c()),
            "phi": (0..self.phi.len()).map(|j| s(&self.phi_float(j))).collect::<Vec<_>>(),
            "L": (1..=self.l_count()).map(|j| s(&self.l_float(j))).collect::<Vec<_>>(),
            "min_poly": self.min_poly().iter().map(|c| c.to_string()).collect::<Vec<_>>(),
        })
    }
}

/// Decimal string with `digits` significant digits.
pub fn fmt_float(x: &Float, digits: usize) -> String {
    if x.is_zero() {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_sign_negative() { "-inf".into() } else { "inf".into() };
    }
    let s = x.to_string_radix(10, Some(digits));
    // rug yields d.ddd...e<exp>; expand moderate exponents to plain decimals
    let (mant, exp) = match s.find('e') {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().unwrap_or(0)),
        None => (s.as_str(), 0),
    };
    if !(-8..=20).contains(&exp) {
        return s;
    }
    let neg = mant.starts_with('-');
    let m = mant.trim_start_matches('-').replace('.', "");
    let point = 1 + exp;
    let body = if point <= 0 {
        format!("0.{}{}", "0".repeat((-point) as usize), m)
    } else if (point as usize) >= m.len() {
        format!("{}{}", m, "0".repeat(point as usize - m.len()))
    } else {
        format!("{}.{}", &m[..point as usize], &m[point as usize..])
    };
    let body = if body.contains('.') { body.trim_end_matches('0').trim_end_matches('.').to_string() } else { body };
    if neg {
        format!("-{body}")
    } else {
        body
    }
}

#[derive(Clone, Debug)]
pub struct ConstantsReport {
    pub k: u32,
    pub rosen_lenstra: Float,
    pub mediant_lenstra: Float,
    pub hurwitz_c: Float,
    /// (sqrt(2)/2, sqrt(2) - 1) for k = 4
    pub k4_candidates: Option<(Float, Float)>,
}

impl ConstantsReport {
    pub fn to_json(&self, digits: usize) -> serde_json::Value {
        let s = |x: &Float| fmt_float(x, digits);
        let mut v = serde_json::json!({
            "k": self.k,
            "rosen_lenstra": s(&self.rosen_lenstra),
            "mediant_lenstra": s(&self.mediant_lenstra),
            "hurwitz_C": s(&self.hurwitz_c),
        });
        if let Some((a, b)) = &self.k4_candidates {
            v["k4_candidates"] = serde_json::json!({"sqrt2_over_2": s(a), "sqrt2_minus_1": s(b)});
        }
        v
    }
}
