//! Long-orbit statistics: small-Theta counting, the empirical Lenstra breakpoint, entropy,
//! Borel frequency and the Legendre audit.
//!
//! Orbit statistics run in f64; orbits are keyed by (seed, orbit id) through ChaCha stream ids.

use crate::context::HeckeContext;
use crate::error::{Error, Result};
use crate::maps::{self, Real};
use crate::planar::{build_domains, domain_measure, witness_orbit};
use crate::ring::{ProjZL, ZLambda};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{HashSet, VecDeque};

/// Uniform starting point in [-lambda/2, lambda/2) for orbit `id` of `seed`.
pub fn random_start(lam: f64, seed: u64, id: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng.gen_range(-lam / 2.0..lam / 2.0)
}

/// One step of S-hat in f64; y = -inf maps to a/c of the branch.
#[inline]
fn s_hat_f64(lam: f64, cut: f64, x: f64, y: f64) -> (f64, f64, bool) {
    if x < -cut {
        let ny = if y == f64::NEG_INFINITY { -lam } else { -1.0 / y - lam };
        (-1.0 / x - lam, ny, true)
    } else if x < 0.0 {
        let ny = if y == f64::NEG_INFINITY { -1.0 / lam } else { -y / (lam * y + 1.0) };
        (-x / (lam * x + 1.0), ny, false)
    } else if x <= cut {
        let ny = if y == f64::NEG_INFINITY { -1.0 / lam } else { y / (1.0 - lam * y) };
        (x / (1.0 - lam * x), ny, false)
    } else {
        let ny = if y == f64::NEG_INFINITY { -lam } else { 1.0 / y - lam };
        (1.0 / x - lam, ny, true)
    }
}

/// Theta_i and U-flags along S-hat^i(x, -inf), i = 1..n.
#[derive(Clone, Debug)]
pub struct OrbitF64 {
    pub theta: Vec<f64>,
    pub is_u: Vec<bool>,
    pub terminated: bool,
}

pub fn mediant_orbit_f64(lam: f64, x0: f64, n: usize) -> OrbitF64 {
    let cut = 2.0 / (3.0 * lam);
    let (mut x, mut y) = (x0, f64::NEG_INFINITY);
    let mut theta = Vec::with_capacity(n);
    let mut is_u = Vec::with_capacity(n);
    let mut terminated = false;
    for _ in 0..n {
        if x == 0.0 {
            terminated = true;
            break;
        }
        let (nx, ny, u) = s_hat_f64(lam, cut, x, y);
        x = nx;
        y = ny;
        theta.push(1.0 / (x - y));
        is_u.push(u);
    }
    OrbitF64 { theta, is_u, terminated }
}

/// Threshold grid "lo:hi:steps", inclusive endpoints.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Parse(format!("grid '{spec}' is not lo:hi:steps")));
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| Error::Parse(format!("bad grid start '{}'", parts[0])))?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| Error::Parse(format!("bad grid end '{}'", parts[1])))?;
    let n: usize = parts[2].trim().parse().map_err(|_| Error::Parse(format!("bad grid steps '{}'", parts[2])))?;
    linear_grid(lo, hi, n)
}

pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 || lo <= 0.0 || hi <= lo {
        return Err(Error::InvalidArgument("grid needs 0 < lo < hi and at least 2 steps".into()));
    }
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct CountingReport {
    pub n: usize,
    pub grid: Vec<f64>,
    /// C(N, x, t) over all mediant times
    pub counts: Vec<u64>,
    /// C_0: the same tally restricted to U-times
    pub counts_u: Vec<u64>,
    pub normalized: Vec<f64>,
    pub terminated: bool,
}

impl CountingReport {
    /// Rows (t, count, count/N, count/(N t)).
    pub fn csv_rows(&self) -> Vec<[f64; 4]> {
        self.grid
            .iter()
            .zip(&self.counts)
            .map(|(&t, &c)| [t, c as f64, c as f64 / self.n as f64, c as f64 / (self.n as f64 * t)])
            .collect()
    }
}

fn tally(sorted: &[f64], grid: &[f64]) -> Vec<u64> {
    grid.iter().map(|t| sorted.partition_point(|v| v < t) as u64).collect()
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_unstable_by(|a, b| a.total_cmp(b));
    v
}

pub fn count_small_theta(ctx: &HeckeContext, x: f64, n: usize, grid: &[f64]) -> Result<CountingReport> {
    if n == 0 || grid.iter().any(|&t| t <= 0.0) {
        return Err(Error::InvalidArgument("need N >= 1 and positive thresholds".into()));
    }
    let o = mediant_orbit_f64(ctx.lambda_f64(), x, n);
    let u: Vec<f64> = o.theta.iter().zip(&o.is_u).filter(|(_, &u)| u).map(|(t, _)| *t).collect();
    let len = o.theta.len().max(1);
    let counts = tally(&sorted(o.theta), grid);
    let counts_u = tally(&sorted(u), grid);
    let normalized = counts.iter().map(|&c| c as f64 / len as f64).collect();
    Ok(CountingReport { n: len, grid: grid.to_vec(), counts, counts_u, normalized, terminated: o.terminated })
}

/// Normalized counting curve F(t) averaged over seeds, one random orbit per seed.
pub fn mean_counting_curve(ctx: &HeckeContext, seeds: &[u64], n: usize, grid: &[f64]) -> Result<Vec<f64>> {
    let lam = ctx.lambda_f64();
    let curves: Vec<Vec<f64>> = seeds
        .par_iter()
        .map(|&s| count_small_theta(ctx, random_start(lam, s, 0), n, grid).map(|r| r.normalized))
        .collect::<Result<_>>()?;
    let mut f = vec![0.0; grid.len()];
    for c in &curves {
        for (a, b) in f.iter_mut().zip(c) {
            *a += b / seeds.len() as f64;
        }
    }
    Ok(f)
}

#[derive(Clone, Debug, Serialize)]
pub struct BreakpointEstimate {
    pub k: u32,
    pub l_hat: f64,
    pub plateau_value: f64,
    /// closed-form mediant Lenstra constant
    pub target: f64,
    pub rel_error: f64,
    /// k = 4 only: (candidate, |L_hat - candidate|)
    pub candidates: Vec<(String, f64, f64)>,
    pub grid: Vec<f64>,
    /// F(t)/t
    pub curve: Vec<f64>,
    pub fit_points: usize,
    pub fit_sse: f64,
}

/// Deficit beyond which grid points are left out of the fit.
pub const FIT_DEFICIT: f64 = 0.03;
/// Fit weights t^w: the relative variance of a count below t falls roughly like 1/t.
pub const FIT_WEIGHT_EXP: f64 = 2.0;
/// Smallest t used in the fit.
pub const FIT_T_MIN: f64 = 0.1;

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Fits G(t) = P (1 - B (t - L)_+^2) to the normalized curve G = F/t and returns (L, P, sse, points).
pub fn fit_breakpoint(grid: &[f64], f: &[f64]) -> Result<(f64, f64, f64, usize)> {
    fit_breakpoint_with(grid, f, FIT_DEFICIT, FIT_WEIGHT_EXP)
}

/// As `fit_breakpoint`, with the deficit cutoff and the weight exponent (weights t^w) explicit.
/// The first pass selects points against the median plateau of the lowest grid quartile, the
/// second against the fitted plateau.
pub fn fit_breakpoint_with(grid: &[f64], f: &[f64], deficit: f64, weight_exp: f64) -> Result<(f64, f64, f64, usize)> {
    let g: Vec<f64> = grid.iter().zip(f).map(|(t, v)| v / t).collect();
    let mut low: Vec<f64> = g[..(grid.len() / 4).max(1)].to_vec();
    let p0 = median(&mut low);
    if !(p0 > 0.0) {
        return Err(Error::Estimator("empty plateau".into()));
    }
    let first = fit_pass(grid, &g, p0, deficit, weight_exp)?;
    match fit_pass(grid, &g, first.1, deficit, weight_exp) {
        Ok(second) => Ok(second),
        Err(_) => Ok(first),
    }
}

fn fit_pass(grid: &[f64], g: &[f64], p0: f64, deficit: f64, weight_exp: f64) -> Result<(f64, f64, f64, usize)> {
    let last = g.iter().position(|v| 1.0 - v / p0 > deficit).unwrap_or(g.len());
    let pts: Vec<(f64, f64)> = (0..last).filter(|&i| grid[i] >= FIT_T_MIN).map(|i| (grid[i], g[i] / p0)).collect();
    if pts.len() < 5 {
        return Err(Error::Estimator(format!("only {} grid points in the linear region", pts.len())));
    }
    let t_max = pts.last().unwrap().0;
    let mut best = (f64::NAN, f64::NAN, f64::INFINITY);
    let steps = 4000;
    for i in 0..=steps {
        let l = 0.02 + (t_max - 0.02) * i as f64 / steps as f64;
        // g = P - Q s with s = (t - L)_+^2, Q = P B >= 0
        let (mut n, mut ss, mut sg, mut sss, mut ssg, mut sgg) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for &(t, v) in &pts {
            let s = (t - l).max(0.0).powi(2);
            let w = t.powf(weight_exp);
            n += w;
            ss += w * s;
            sg += w * v;
            sss += w * s * s;
            ssg += w * s * v;
            sgg += w * v * v;
        }
        let det = n * sss - ss * ss;
        let (p, q) = if det.abs() < 1e-300 {
            (sg / n, 0.0)
        } else {
            let p = (sss * sg - ss * ssg) / det;
            let q = (ss * sg - n * ssg) / det;
            if q < 0.0 {
                (sg / n, 0.0)
            } else {
                (p, q)
            }
        };
        let sse = sgg - 2.0 * p * sg + 2.0 * q * ssg + n * p * p - 2.0 * p * q * ss + q * q * sss;
        if sse < best.2 - 1e-15 {
            best = (l, p * p0, sse);
        }
    }
    Ok((best.0, best.1, best.2.max(0.0), pts.len()))
}

pub fn breakpoint_estimate(ctx: &HeckeContext, seeds: &[u64], n: usize, grid: &[f64]) -> Result<BreakpointEstimate> {
    if seeds.len() < 3 {
        return Err(Error::InvalidArgument("breakpoint estimate needs at least 3 seeds".into()));
    }
    let f = mean_counting_curve(ctx, seeds, n, grid)?;
    let curve: Vec<f64> = grid.iter().zip(&f).map(|(t, v)| v / t).collect();
    let (l_hat, plateau_value, fit_sse, fit_points) = fit_breakpoint(grid, &f).map_err(|e| {
        let raw: Vec<String> = grid.iter().zip(&curve).map(|(t, g)| format!("{t:.4}:{g:.5}")).collect();
        Error::Estimator(format!("{e}; curve F/t = [{}]", raw.join(", ")))
    })?;
    let target = ctx.closed_form_constants().mediant_lenstra.to_f64();
    let candidates = if ctx.k() == 4 {
        let s2 = 2f64.sqrt();
        vec![("sqrt2/2".to_string(), s2 / 2.0, (l_hat - s2 / 2.0).abs()), ("sqrt2-1".to_string(), s2 - 1.0, (l_hat - s2 + 1.0).abs())]
    } else {
        Vec::new()
    };
    Ok(BreakpointEstimate {
        k: ctx.k(),
        l_hat,
        plateau_value,
        target,
        rel_error: l_hat / target - 1.0,
        candidates,
        grid: grid.to_vec(),
        curve,
        fit_points,
        fit_sse,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct EntropyReport {
    pub k: u32,
    pub n: usize,
    /// (1/N) sum log|T'(x_i)|
    pub h_hat: f64,
    /// batch-means standard error of h_hat
    pub std_error: f64,
    pub omega0_measure: f64,
    pub product: f64,
    /// (k - 2) pi^2 / (2k)
    pub target: f64,
    pub rel_error: f64,
    pub reseeds: usize,
}

const BATCHES: usize = 50;

/// Rohlin estimator along a Rosen orbit; log|T'(x)| = -2 log|x|.
pub fn lyapunov_entropy(ctx: &HeckeContext, n: usize, seed: u64) -> Result<EntropyReport> {
    if n < BATCHES {
        return Err(Error::InvalidArgument(format!("N must be at least {BATCHES}")));
    }
    let lam = ctx.lambda_f64();
    let mut id = 0u64;
    let mut x = random_start(lam, seed, id);
    let batch = n / BATCHES;
    let mut sums = vec![0.0f64; BATCHES];
    let mut reseeds = 0;
    for i in 0..batch * BATCHES {
        if x == 0.0 {
            id += 1;
            reseeds += 1;
            x = random_start(lam, seed, id);
        }
        let a = x.abs();
        sums[i / batch] += -2.0 * a.ln();
        let r = (1.0 / (lam * a) + 0.5).floor();
        x = 1.0 / a - lam * r;
    }
    let means: Vec<f64> = sums.iter().map(|s| s / batch as f64).collect();
    let h_hat = means.iter().sum::<f64>() / BATCHES as f64;
    let var = means.iter().map(|m| (m - h_hat).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    let std_error = (var / BATCHES as f64).sqrt();
    let (o0, _) = build_domains(ctx)?;
    let omega0_measure = domain_measure(&o0, None)?.to_f64();
    let k = ctx.k() as f64;
    let target = (k - 2.0) * std::f64::consts::PI.powi(2) / (2.0 * k);
    let product = h_hat * omega0_measure;
    Ok(EntropyReport {
        k: ctx.k(),
        n: batch * BATCHES,
        h_hat,
        std_error,
        omega0_measure,
        product,
        target,
        rel_error: product / target - 1.0,
        reseeds,
    })
}

/// Rosen-time Theta values: Theta at the U-times of the mediant orbit.
pub fn rosen_thetas_f64(lam: f64, x0: f64, n: usize) -> Vec<f64> {
    let cut = 2.0 / (3.0 * lam);
    let (mut x, mut y) = (x0, f64::NEG_INFINITY);
    let mut out = Vec::with_capacity(n);
    while out.len() < n && x != 0.0 {
        let (nx, ny, u) = s_hat_f64(lam, cut, x, y);
        x = nx;
        y = ny;
        if u {
            out.push(1.0 / (x - y));
        }
    }
    out
}

/// Fraction of Rosen indices n <= N with theta_n < threshold, averaged over seeds.
pub fn borel_frequency(ctx: &HeckeContext, seeds: &[u64], n: usize, threshold: f64) -> f64 {
    let lam = ctx.lambda_f64();
    let freqs: Vec<f64> = seeds
        .par_iter()
        .map(|&s| {
            let th = rosen_thetas_f64(lam, random_start(lam, s, 0), n);
            th.iter().filter(|&&v| v < threshold).count() as f64 / th.len().max(1) as f64
        })
        .collect();
    freqs.iter().sum::<f64>() / freqs.len().max(1) as f64
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessTail {
    pub k: u32,
    pub n: usize,
    pub threshold: f64,
    pub hits: usize,
    /// index of the last hit (Rosen time), if any
    pub last_hit: Option<usize>,
    /// hits with index beyond N/10
    pub late_hits: usize,
    pub min_late_theta: f64,
}

/// Rosen-time Theta along the certified periodic word of the witness, with y started at -inf.
/// x follows the exact period; only y is iterated, and y contracts onto the periodic partner.
pub fn witness_tail(ctx: &HeckeContext, n: usize, threshold: f64) -> Result<WitnessTail> {
    let w = witness_orbit(ctx)?;
    if !w.exact_certified {
        return Err(Error::Check("witness orbit not certified".into()));
    }
    let lam = ctx.lambda_f64();
    let xs: Vec<f64> = w.points.iter().map(|p| p.x).collect();
    let period = w.word.len();
    let mut y = f64::NEG_INFINITY;
    let (mut hits, mut last_hit, mut late_hits) = (0, None, 0);
    let mut min_late = f64::INFINITY;
    let mut m = 0usize;
    let mut i = 0usize;
    while m < n {
        let sym = w.word[i % period];
        y = sym.inverse().apply_f64(lam, y);
        let x_next = xs[(i + 1) % period];
        i += 1;
        if sym.is_u() {
            m += 1;
            let th = 1.0 / (x_next - y);
            if m > n / 10 {
                min_late = min_late.min(th);
            }
            if th < threshold {
                hits += 1;
                last_hit = Some(m);
                if m > n / 10 {
                    late_hits += 1;
                }
            }
        }
    }
    Ok(WitnessTail { k: ctx.k(), n, threshold, hits, last_hit, late_hits, min_late_theta: min_late })
}

/// Largest Theta over the first n mediant times (unboundedness check).
pub fn max_mediant_theta(ctx: &HeckeContext, seed: u64, n: usize) -> f64 {
    let lam = ctx.lambda_f64();
    mediant_orbit_f64(lam, random_start(lam, seed, 0), n).theta.into_iter().fold(0.0, f64::max)
}

/// A G_k-rational a/c with c > 0.
#[derive(Clone, Debug, Serialize)]
pub struct GkRational {
    pub a: ZLambda,
    pub c: ZLambda,
    pub value: f64,
    /// length of the shortest generating word found
    pub word_len: usize,
}

/// Breadth-first closure of {infinity, 0} under z -> -1/z, z -> z + lambda, z -> z - lambda,
/// deduped by exact value. Words of length w reach g(infinity) and g(0) for |g| <= w.
pub fn enumerate_gk_rationals(ctx: &HeckeContext, max_word_len: usize, q_cap: f64, restrict: bool) -> Vec<GkRational> {
    let ring = ctx.ring();
    let lam = ZLambda::lambda(ring);
    let mut seen: HashSet<ProjZL> = HashSet::new();
    let mut queue = VecDeque::new();
    let mut out = Vec::new();
    for z in [ProjZL::infinity(ring), ProjZL::from_zl(ZLambda::zero(ring))] {
        seen.insert(z.clone());
        queue.push_back((z, 0usize));
    }
    let half = ctx.lambda_f64() / 2.0;
    while let Some((z, d)) = queue.pop_front() {
        if !z.is_infinite() {
            let v = z.to_f64();
            let c = z.den.to_f64();
            let inside = !restrict || ((-half..half).contains(&v) && z.cmp_value_half_open(ctx));
            if inside && c <= q_cap {
                out.push(GkRational { a: z.num.clone(), c: z.den.clone(), value: v, word_len: d });
            }
        }
        if d == max_word_len {
            continue;
        }
        let next = [
            if z.is_zero() { ProjZL::infinity(ring) } else { ProjZL::new(-z.den.clone(), z.num.clone()).unwrap() },
            if z.is_infinite() { z.clone() } else { ProjZL::new(&z.num + &(&lam * &z.den), z.den.clone()).unwrap() },
            if z.is_infinite() { z.clone() } else { ProjZL::new(&z.num - &(&lam * &z.den), z.den.clone()).unwrap() },
        ];
        for nz in next {
            if seen.insert(nz.clone()) {
                queue.push_back((nz, d + 1));
            }
        }
    }
    out
}

trait HalfOpen {
    fn cmp_value_half_open(&self, ctx: &HeckeContext) -> bool;
}

impl HalfOpen for ProjZL {
    /// Exact -lambda/2 <= z < lambda/2.
    fn cmp_value_half_open(&self, ctx: &HeckeContext) -> bool {
        let ring = ctx.ring();
        let lam = ZLambda::lambda(ring);
        // 2 num + lam den >= 0 and 2 num - lam den < 0, den > 0
        let two = ZLambda::from_int(ring, 2);
        let lo = &(&two * &self.num) + &(&lam * &self.den);
        let hi = &(&two * &self.num) - &(&lam * &self.den);
        lo.sign() >= 0 && hi.sign() < 0
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AuditEntry {
    pub a: String,
    pub c: String,
    pub value: f64,
    pub theta: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LegendreAudit {
    pub x: f64,
    pub threshold: f64,
    pub depth: usize,
    pub checked: usize,
    pub members: usize,
    pub violations: Vec<AuditEntry>,
    pub inconclusive: Vec<AuditEntry>,
    /// x itself is one of the rationals; nothing to audit
    pub skipped_terminal: bool,
}

/// Every rational with Theta(x, a/c) < threshold must appear in the mediant-convergent list of x.
pub fn legendre_audit(ctx: &HeckeContext, x: &Real, threshold: f64, depth: usize, rationals: &[GkRational]) -> Result<LegendreAudit> {
    if threshold <= 0.0 {
        return Err(Error::InvalidArgument("threshold must be positive".into()));
    }
    let p = ctx.precision();
    let ring = ctx.ring();
    let orbit = maps::s_orbit(ring, x, depth, p)?;
    let entries = maps::mediant_entries(ring, &orbit.symbols);
    let xv = x.to_f64();
    let mut audit = LegendreAudit {
        x: xv,
        threshold,
        depth,
        checked: 0,
        members: 0,
        violations: Vec::new(),
        inconclusive: Vec::new(),
        skipped_terminal: false,
    };
    // a terminating expansion lists every mediant convergent
    let complete = orbit.terminated;
    if let Real::Exact(xe) = x {
        if rationals.iter().any(|r| ProjZL::new(r.a.clone(), r.c.clone()).map(|q| &q == xe).unwrap_or(false)) {
            audit.skipped_terminal = true;
            return Ok(audit);
        }
    }
    // Rosen convergents p_n/q_n join the mediant list; a U step only closes the current one
    let mut list: Vec<ProjZL> = entries.iter().filter_map(|e| ProjZL::new(e.num.clone(), e.den.clone()).ok()).collect();
    let digits = maps::expand(ctx, x, depth)?.digits;
    for st in maps::convergents(ctx, &digits).iter() {
        if let Ok(v) = ProjZL::new(st.p_cur.clone(), st.q_cur.clone()) {
            list.push(v);
        }
    }
    let q_reach = entries.last().map(|e| e.den.to_f64()).unwrap_or(1.0);
    for r in rationals {
        let th = maps::theta_direct(ctx, x, &r.a, &r.c)?.to_f64();
        if th >= threshold {
            continue;
        }
        audit.checked += 1;
        let q = ProjZL::new(r.a.clone(), r.c.clone())?;
        let entry = AuditEntry { a: r.a.to_string(), c: r.c.to_string(), value: r.value, theta: th };
        if list.contains(&q) {
            audit.members += 1;
        } else if complete || r.c.to_f64() < q_reach {
            audit.violations.push(entry);
        } else {
            audit.inconclusive.push(entry);
        }
    }
    Ok(audit)
}
