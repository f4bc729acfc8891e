use clap::{Parser, Subcommand, ValueEnum};
use rosen_mediant::context::fmt_float;
use rosen_mediant::maps::{self, MediantSymbol, Real};
use rosen_mediant::planar::{self, DualBranch, LenstraVariant};
use rosen_mediant::{parse, stats, HeckeContext, MobiusZL, ZLambda};
use rug::Float;
use serde_json::{json, Value as Json};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "rosen", version, about = "Rosen continued fractions and mediant convergents for Hecke groups G_k")]
struct Cli {
    /// Hecke group index
    #[arg(long, global = true, default_value_t = 8, value_parser = clap::value_parser!(u32).range(4..))]
    k: u32,
    /// working precision in bits
    #[arg(long, global = true, default_value_t = 256, value_parser = clap::value_parser!(u32).range(128..))]
    precision: u32,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// write to this file instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// significant digits for high-precision values
    #[arg(long, global = true, default_value_t = 30)]
    digits: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Subcommand)]
enum Cmd {
    /// lambda, R, C(k), the phi and L tables and the closed-form constants
    Context,
    /// Rosen digits, mediant symbols, convergents and Theta values of x
    Expand {
        /// decimal or exact literal in lambda, e.g. "(1-l)/2"
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long, default_value_t = 20)]
        depth: usize,
    },
    /// fiber rectangles of Omega_0 and Omega* and their images under S-hat
    Domain {
        /// the dual map partition instead
        #[arg(long)]
        dual: bool,
    },
    /// run every check for k; nonzero exit on any failure
    Verify {
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// counting curves, breakpoint, entropy and Borel frequency
    Stats {
        #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
        n_iter: u64,
        #[arg(long, default_value = "0.01:1.2:120")]
        grid: String,
        /// number of independent orbits (seeds seed, seed+1, ...)
        #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
        orbits: u64,
        #[arg(long)]
        entropy: bool,
        #[arg(long)]
        borel: bool,
    },
    /// the periodic witness orbit of tau_0
    Witness,
    /// rationals with Theta below a threshold that are not (mediant) convergents
    LegendreAudit {
        /// a single x; random points are drawn otherwise
        #[arg(long, allow_hyphen_values = true)]
        x: Option<String>,
        #[arg(long, default_value_t = 100)]
        samples: u64,
        /// defaults to the mediant Lenstra constant minus 0.01
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long, default_value_t = 60)]
        depth: usize,
        #[arg(long, default_value_t = 8)]
        word_len: usize,
        #[arg(long, default_value_t = 1e6)]
        q_cap: f64,
    },
}

/// One command's output in all three renderings; `table` doubles as the CSV body.
struct Report {
    json: Json,
    text: String,
    table: Option<(Vec<String>, Vec<Vec<String>>)>,
    ok: bool,
}

impl Report {
    fn new(json: Json, text: String) -> Self {
        Report { json, text, table: None, ok: true }
    }

    fn with_table(mut self, header: &[&str], rows: Vec<Vec<String>>) -> Self {
        self.table = Some((header.iter().map(|s| s.to_string()).collect(), rows));
        self
    }
}

type Res<T> = std::result::Result<T, String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(ok) => {
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Res<bool> {
    let ctx = HeckeContext::with_precision(cli.k, cli.precision).map_err(err)?;
    let mut report = match &cli.cmd {
        Cmd::Context => cmd_context(&ctx, cli.digits),
        Cmd::Expand { x, depth } => cmd_expand(&ctx, x, *depth, cli.digits)?,
        Cmd::Domain { dual } => cmd_domain(&ctx, *dual)?,
        Cmd::Verify { samples } => cmd_verify(&ctx, *samples, cli.seed)?,
        Cmd::Stats { n_iter, grid, orbits, entropy, borel } => {
            cmd_stats(&ctx, *n_iter as usize, grid, *orbits, *entropy, *borel, cli.seed)?
        }
        Cmd::Witness => cmd_witness(&ctx)?,
        Cmd::LegendreAudit { x, samples, threshold, depth, word_len, q_cap } => {
            cmd_legendre(&ctx, x.as_deref(), *samples, *threshold, *depth, *word_len, *q_cap, cli.seed)?
        }
    };
    if let Json::Object(m) = &mut report.json {
        m.insert("schema_version".into(), json!(SCHEMA_VERSION));
        m.insert("k".into(), json!(cli.k));
    }
    let body = render(&report, cli.format)?;
    match &cli.out {
        Some(p) => std::fs::write(p, body).map_err(err)?,
        None => std::io::stdout().write_all(body.as_bytes()).map_err(err)?,
    }
    Ok(report.ok)
}

fn render(r: &Report, format: Format) -> Res<String> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(&r.json).map_err(err)? + "\n"),
        Format::Text => Ok(r.text.clone()),
        Format::Csv => {
            let (header, rows) = match &r.table {
                Some(t) => t.clone(),
                None => (vec!["key".into(), "value".into()], flatten(&r.json)),
            };
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&header).map_err(err)?;
            for row in rows {
                w.write_record(&row).map_err(err)?;
            }
            String::from_utf8(w.into_inner().map_err(err)?).map_err(err)
        }
    }
}

/// Dotted key/value pairs for reports without a natural table.
fn flatten(v: &Json) -> Vec<Vec<String>> {
    fn go(prefix: &str, v: &Json, out: &mut Vec<Vec<String>>) {
        let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
        match v {
            Json::Object(m) => m.iter().for_each(|(k, v)| go(&key(k), v, out)),
            Json::Array(a) => a.iter().enumerate().for_each(|(i, v)| go(&key(&i.to_string()), v, out)),
            Json::String(s) => out.push(vec![prefix.into(), s.clone()]),
            other => out.push(vec![prefix.into(), other.to_string()]),
        }
    }
    let mut out = Vec::new();
    go("", v, &mut out);
    out
}

fn num(x: f64) -> Json {
    if x.is_finite() {
        json!(x)
    } else if x > 0.0 {
        json!("inf")
    } else if x < 0.0 {
        json!("-inf")
    } else {
        json!("nan")
    }
}

fn symbol_str(s: MediantSymbol) -> String {
    s.label().to_string()
}

fn cmd_context(ctx: &HeckeContext, digits: usize) -> Report {
    let mut v = ctx.to_json(digits);
    v["constants"] = ctx.closed_form_constants().to_json(digits);
    let mut text = String::new();
    for key in ["lambda", "R", "C"] {
        text += &format!("{key:<16} {}\n", v[key].as_str().unwrap_or(""));
    }
    for (key, c) in [("rosen_lenstra", "Rosen Lenstra"), ("mediant_lenstra", "mediant Lenstra"), ("hurwitz_C", "Hurwitz C")] {
        text += &format!("{c:<16} {}\n", v["constants"][key].as_str().unwrap_or(""));
    }
    for (j, p) in v["phi"].as_array().into_iter().flatten().enumerate() {
        text += &format!("phi_{j:<12} {}\n", p.as_str().unwrap_or(""));
    }
    for (j, l) in v["L"].as_array().into_iter().flatten().enumerate() {
        text += &format!("L_{:<14} {}\n", j + 1, l.as_str().unwrap_or(""));
    }
    Report::new(v, text)
}

fn cmd_expand(ctx: &HeckeContext, x_src: &str, depth: usize, digits: usize) -> Res<Report> {
    let x = parse::parse_real(ctx, x_src).map_err(err)?;
    let p = ctx.precision();
    let exp = maps::expand(ctx, &x, depth).map_err(err)?;
    let sym = maps::symbol_expand(ctx, &x, depth).map_err(err)?;
    let conv = maps::convergents(ctx, &exp.digits);
    let entries = maps::mediant_entries(ctx.ring(), &sym.symbols);
    let theta = maps::theta_orbit(ctx, &x, depth).map_err(err)?;
    let orbit = maps::t_orbit(ctx.ring(), &x, depth, p).map_err(err)?;

    let conv_json: Vec<Json> = conv
        .iter()
        .map(|c| json!({"n": c.n, "p": c.p_cur.to_string(), "q": c.q_cur.to_string(), "value": num(c.value)}))
        .collect();
    let med_json: Vec<Json> = entries
        .iter()
        .zip(&theta.values)
        .map(|(e, t)| {
            json!({
                "index": e.index,
                "kind": e.kind,
                "level": e.level,
                "offset": e.offset,
                "num": e.num.to_string(),
                "den": e.den.to_string(),
                "value": num(e.value),
                "theta": num(*t),
            })
        })
        .collect();
    let v = json!({
        "x": x_src,
        "x_value": fmt_float(&x.to_float(p), digits),
        "depth": depth,
        "digits": exp.digits.iter().map(|d| json!({"eps": d.eps, "r": d.r})).collect::<Vec<_>>(),
        "digit_string": maps::format_digits(&exp.digits),
        "t_orbit": orbit.xs.iter().map(|v| fmt_float(&v.to_float(p), digits)).collect::<Vec<_>>(),
        "symbols": sym.symbols.iter().map(|s| symbol_str(*s)).collect::<Vec<_>>(),
        "symbol_string": maps::format_symbols(&sym.symbols),
        "convergents": conv_json,
        "mediants": med_json,
        "terminated": exp.terminated,
    });

    let mut text = format!("x = {} ({})\n", x_src, fmt_float(&x.to_float(p), digits));
    if exp.digits.is_empty() && exp.terminated {
        text += "terminal point: the expansion is empty\n";
    } else {
        text += &format!("digits   {}\n", maps::format_digits(&exp.digits));
        text += &format!("symbols  {}\n", maps::format_symbols(&sym.symbols));
        let xs: Vec<String> = orbit.xs.iter().map(|v| fmt_float(&v.to_float(p), 15)).collect();
        text += &format!("T-orbit  {}\n", xs.join(" "));
        if exp.terminated {
            text += "expansion terminates\n";
        }
        text += "convergents\n";
        for c in conv.iter().skip(1) {
            text += &format!("  {:>3}  {} / {}  = {:.15}\n", c.n, c.p_cur, c.q_cur, c.value);
        }
        text += "mediant entries\n";
        for (e, t) in entries.iter().zip(&theta.values) {
            let kind = if e.kind == maps::ConvergentKind::Principal { "P" } else { "M" };
            text += &format!("  {:>3} {kind} {} / {}  = {:.15}  Theta {:.12}\n", e.index, e.num, e.den, e.value, t);
        }
    }
    let rows = entries
        .iter()
        .zip(&theta.values)
        .zip(&sym.symbols)
        .map(|((e, t), s)| {
            vec![
                e.index.to_string(),
                symbol_str(*s),
                format!("{:?}", e.kind).to_lowercase(),
                e.num.to_string(),
                e.den.to_string(),
                e.value.to_string(),
                t.to_string(),
            ]
        })
        .collect();
    Ok(Report::new(v, text).with_table(&["index", "symbol", "kind", "num", "den", "value", "theta"], rows))
}

fn fiber_row(label: &str, f: &Json) -> Vec<String> {
    let s = |k: &str| match &f[k] {
        Json::String(s) => s.clone(),
        other => other.to_string(),
    };
    vec![label.into(), s("j"), s("x_lo"), s("x_hi"), s("y_lo"), s("y_hi")]
}

fn cmd_domain(ctx: &HeckeContext, dual: bool) -> Res<Report> {
    if dual {
        let part = planar::dual_partition(ctx);
        let branches: Vec<Json> = [DualBranch::I, DualBranch::II, DualBranch::III, DualBranch::IV]
            .iter()
            .map(|b| json!({"branch": b.label(), "symbol": symbol_str(b.symbol())}))
            .collect();
        let mut text = String::from("dual partition endpoints\n");
        for e in &part {
            text += &format!("  {e:.15}\n");
        }
        let rows = part.iter().map(|e| vec![e.to_string()]).collect();
        let v = json!({"dual_partition": part.iter().map(|e| num(*e)).collect::<Vec<_>>(), "branches": branches});
        return Ok(Report::new(v, text).with_table(&["endpoint"], rows));
    }
    let (o0, os) = planar::build_domains(ctx).map_err(err)?;
    let images = planar::image_rectangles(ctx, &os);
    let img_json: Vec<Json> = images
        .iter()
        .map(|r| {
            json!({
                "symbol": symbol_str(r.symbol),
                "fiber": r.fiber,
                "x_lo": num(r.x_lo),
                "x_hi": num(r.x_hi),
                "y_lo": num(r.y_lo),
                "y_hi": num(r.y_hi),
            })
        })
        .collect();
    let v = json!({
        "omega0": o0.to_json()["fibers"],
        "omega_star": os.to_json()["fibers"],
        "images": img_json,
    });
    let mut rows = Vec::new();
    let mut text = String::new();
    for (label, key) in [("omega0", "omega0"), ("omega_star", "omega_star")] {
        text += &format!("{label}\n");
        for f in v[key].as_array().into_iter().flatten() {
            let r = fiber_row(label, f);
            text += &format!("  j={:<3} [{}, {}) x [{}, {}]\n", r[1], r[2], r[3], r[4], r[5]);
            rows.push(r);
        }
    }
    text += "images under S-hat\n";
    for (r, j) in images.iter().zip(&img_json) {
        let row = fiber_row(&format!("image_{}", symbol_str(r.symbol)), &json!({
            "j": r.fiber, "x_lo": j["x_lo"], "x_hi": j["x_hi"], "y_lo": j["y_lo"], "y_hi": j["y_hi"]
        }));
        text += &format!("  {} fiber {:<3} [{}, {}) x [{}, {}]\n", symbol_str(r.symbol), r.fiber, row[2], row[3], row[4], row[5]);
        rows.push(row);
    }
    Ok(Report::new(v, text).with_table(&["domain", "j", "x_lo", "x_hi", "y_lo", "y_hi"], rows))
}

struct Check {
    name: &'static str,
    passed: bool,
    detail: Json,
}

fn cmd_verify(ctx: &HeckeContext, samples: usize, seed: u64) -> Res<Report> {
    let mut checks = Vec::new();

    let b = planar::check_bijectivity(ctx, samples, seed).map_err(err)?;
    checks.push(Check { name: "bijectivity", passed: b.passed(), detail: serde_json::to_value(&b).map_err(err)? });

    let rects = planar::random_branch_rects(ctx, 100, seed).map_err(err)?;
    let inv = planar::check_invariance(ctx, &rects).map_err(err)?;
    checks.push(Check { name: "invariance", passed: inv.max_deviation < 1e-12, detail: serde_json::to_value(&inv).map_err(err)? });

    checks.push(dual_check(ctx)?);
    checks.push(induced_check(ctx, seed)?);

    let w = planar::witness_orbit(ctx).map_err(err)?;
    let c = ctx.hurwitz_c().to_f64();
    let mut wok = w.exact_certified && w.min_theta >= c - 1e-12;
    if !ctx.is_even() {
        wok &= w.return_distance_log2.map(|d| d <= -100.0).unwrap_or(false);
    }
    checks.push(Check {
        name: "witness",
        passed: wok,
        detail: json!({"period": w.period, "t_hat_period": w.t_hat_period, "min_theta": w.min_theta, "C": c, "exact_certified": w.exact_certified}),
    });

    let cf = ctx.closed_form_constants();
    let ro = planar::geometric_lenstra(ctx, LenstraVariant::Rosen).map_err(err)?;
    let me = planar::geometric_lenstra(ctx, LenstraVariant::Mediant).map_err(err)?;
    let (rc, mc) = (cf.rosen_lenstra.to_f64(), cf.mediant_lenstra.to_f64());
    checks.push(Check {
        name: "constants",
        passed: (ro.constant - rc).abs() < 1e-10 && (me.constant - mc).abs() < 1e-10 && me.constant > c,
        detail: json!({"rosen_geometric": ro.constant, "rosen_closed_form": rc, "mediant_geometric": me.constant, "mediant_closed_form": mc}),
    });

    checks.push(determinant_check(ctx));

    let ok = checks.iter().all(|c| c.passed);
    let failures: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    let mut text = String::new();
    for c in &checks {
        text += &format!("{:<12} {}  {}\n", c.name, if c.passed { "PASS" } else { "FAIL" }, c.detail);
    }
    text += if ok { "all checks passed\n" } else { "verification FAILED\n" };
    let rows = checks.iter().map(|c| vec![c.name.to_string(), c.passed.to_string(), c.detail.to_string()]).collect();
    let v = json!({
        "passed": ok,
        "failures": failures,
        "checks": checks.iter().map(|c| json!({"name": c.name, "passed": c.passed, "detail": c.detail})).collect::<Vec<_>>(),
    });
    let mut r = Report::new(v, text).with_table(&["check", "passed", "detail"], rows);
    r.ok = ok;
    Ok(r)
}

/// Residual of the dual functional equation on a deterministic grid over each branch.
fn dual_check(ctx: &HeckeContext) -> Res<Check> {
    let p = ctx.precision();
    let part = planar::dual_partition(ctx);
    let (lam, r_inv, l_inv) = (-part[0], -part[1], -part[2]);
    let branches = planar::branch_ranges(ctx);
    let mut worst = 0.0f64;
    let mut mismatches = 0;
    let mut n = 0;
    let steps = 12;
    for b in [DualBranch::I, DualBranch::II, DualBranch::III, DualBranch::IV] {
        let (sym, lo, hi) = branches.iter().find(|(s, _, _)| *s == b.symbol()).ok_or("missing branch")?;
        let (lo, hi) = (lo.to_f64(), hi.to_f64());
        for i in 0..steps {
            let u = (i as f64 + 0.5) / steps as f64;
            let y = match b {
                DualBranch::I => -lam + u * (lam - r_inv),
                DualBranch::II => -r_inv + u * (r_inv - l_inv),
                DualBranch::III => -l_inv + u * l_inv,
                DualBranch::IV => -lam - 50.0 * u.powi(3) - 1e-9,
            };
            let yf = Float::with_val(p, y);
            let (_, got) = planar::dual_step(ctx, &yf).map_err(err)?;
            if got != b {
                mismatches += 1;
            }
            for j in 0..steps {
                let x = lo + (hi - lo) * (j as f64 + 0.5) / steps as f64;
                let res = planar::dual_functional_residual(ctx, *sym, &Float::with_val(p, x), &yf).to_f64();
                worst = worst.max(res);
                n += 1;
            }
        }
    }
    Ok(Check {
        name: "dual",
        passed: mismatches == 0 && worst < 1e-12,
        detail: json!({"points": n, "branch_mismatches": mismatches, "max_residual": worst}),
    })
}

fn induced_check(ctx: &HeckeContext, seed: u64) -> Res<Check> {
    let lam = ctx.lambda_f64();
    let mut failures = 0;
    let mut worst = 0.0f64;
    let n = 1000u64;
    for i in 0..n {
        let x = stats::random_start(lam, seed, i);
        let r = maps::induced_length(ctx, &Real::from_f64(x, ctx.precision()), 1e-12).map_err(err)?;
        failures += usize::from(!r.verified);
        if r.diff.is_finite() {
            worst = worst.max(r.diff);
        }
    }
    Ok(Check { name: "induced", passed: failures == 0, detail: json!({"points": n, "failures": failures, "max_diff": worst}) })
}

/// Every branch matrix has determinant +-1, and the Rosen digit matrices factor into mediant steps.
fn determinant_check(ctx: &HeckeContext) -> Check {
    let r = ctx.ring();
    let one = ZLambda::one(r);
    let zero = ZLambda::zero(r);
    let lam = ZLambda::lambda(r);
    let mut bad = Vec::new();
    for s in [MediantSymbol::Uminus, MediantSymbol::Vminus, MediantSymbol::Vplus, MediantSymbol::Uplus] {
        let d = s.matrix().to_zl(r).det();
        if d != one && d != -one.clone() {
            bad.push(format!("det {}", symbol_str(s)));
        }
    }
    let up = MediantSymbol::Uplus.inverse().to_zl(r);
    let vp = MediantSymbol::Vplus.inverse().to_zl(r);
    let vm = MediantSymbol::Vminus.inverse().to_zl(r);
    for t in 2u32..=6 {
        let lhs1 = MobiusZL::new(lam.mul_int(t as i64), one.clone(), -one.clone(), zero.clone());
        let lhs2 = MobiusZL::new(-lam.mul_int(t as i64), one.clone(), one.clone(), zero.clone());
        if lhs1 != up.mul(&vp.pow(t - 2)).mul(&vm) || lhs2 != up.mul(&vp.pow(t - 1)) {
            bad.push(format!("factorization t={t}"));
        }
    }
    Check { name: "determinant", passed: bad.is_empty(), detail: json!({"failures": bad}) }
}

#[allow(clippy::too_many_arguments)]
fn cmd_stats(ctx: &HeckeContext, n: usize, grid_spec: &str, orbits: u64, entropy: bool, borel: bool, seed: u64) -> Res<Report> {
    let grid = stats::parse_grid(grid_spec).map_err(err)?;
    let seeds: Vec<u64> = (0..orbits).map(|i| seed + i).collect();
    let lam = ctx.lambda_f64();

    let mut totals = vec![0u64; grid.len()];
    let mut totals_u = vec![0u64; grid.len()];
    let mut steps = 0usize;
    for &s in &seeds {
        let r = stats::count_small_theta(ctx, stats::random_start(lam, s, 0), n, &grid).map_err(err)?;
        steps += r.n;
        totals.iter_mut().zip(&r.counts).for_each(|(a, b)| *a += b);
        totals_u.iter_mut().zip(&r.counts_u).for_each(|(a, b)| *a += b);
    }
    let rows: Vec<Vec<String>> = grid
        .iter()
        .zip(&totals)
        .map(|(&t, &c)| {
            let f = c as f64 / steps as f64;
            vec![t.to_string(), c.to_string(), f.to_string(), (f / t).to_string()]
        })
        .collect();
    let mut text = format!("k = {}, N = {n} per orbit, {} orbits\n", ctx.k(), seeds.len());
    let mut v = json!({
        "n_iter": n,
        "seeds": seeds,
        "grid": grid_spec,
        "counting": {
            "by": "orbit index",
            "steps": steps,
            "t": grid,
            "count": totals,
            "count_u": totals_u,
        },
        "breakpoint": null,
    });
    // the fit needs a few independent orbits to average out the ratio noise
    if seeds.len() >= 3 {
        let bp = stats::breakpoint_estimate(ctx, &seeds, n, &grid).map_err(err)?;
        text += &format!(
            "L_hat {:.6}  closed form {:.6}  relative error {:+.2}%\n",
            bp.l_hat,
            bp.target,
            100.0 * bp.rel_error
        );
        for (name, value, dist) in &bp.candidates {
            text += &format!("  candidate {name} = {value:.6}, |L_hat - candidate| = {dist:.6}\n");
        }
        v["breakpoint"] = json!({
            "l_hat": bp.l_hat,
            "plateau": bp.plateau_value,
            "target": bp.target,
            "rel_error": bp.rel_error,
            "candidates": bp.candidates.iter().map(|(n, v, d)| json!({"name": n, "value": v, "distance": d})).collect::<Vec<_>>(),
            "fit_points": bp.fit_points,
            "fit_sse": bp.fit_sse,
        });
    } else {
        text += "breakpoint skipped: needs at least 3 orbits\n";
    }
    if entropy {
        let e = stats::lyapunov_entropy(ctx, n, seed).map_err(err)?;
        text += &format!(
            "entropy h_hat {:.6} +- {:.6}, mu(Omega_0) {:.6}, product {:.6} vs {:.6} ({:+.3}%)\n",
            e.h_hat,
            e.std_error,
            e.omega0_measure,
            e.product,
            e.target,
            100.0 * e.rel_error
        );
        v["entropy"] = serde_json::to_value(&e).map_err(err)?;
    }
    if borel {
        let c = ctx.hurwitz_c().to_f64();
        let freq = stats::borel_frequency(ctx, &seeds, n, c);
        let tail = stats::witness_tail(ctx, n, c - 0.01).map_err(err)?;
        text += &format!("Borel frequency of Theta < C(k) = {c:.6}: {freq:.6}\n");
        text += &format!("witness tail below C(k) - 0.01: {} hits, {} late\n", tail.hits, tail.late_hits);
        v["borel"] = json!({"threshold": c, "frequency": freq, "witness_tail": serde_json::to_value(&tail).map_err(err)?});
    }
    Ok(Report::new(v, text).with_table(&["t", "count", "count_over_n", "count_over_nt"], rows))
}

fn cmd_witness(ctx: &HeckeContext) -> Res<Report> {
    let w = planar::witness_orbit(ctx).map_err(err)?;
    let mut text = format!(
        "k = {}, tau_0 = {:.15}, period {} (T-hat period {}), certified {}\n",
        w.k, w.tau0, w.period, w.t_hat_period, w.exact_certified
    );
    text += &format!("min Theta {:.15}  C(k) {:.15}\n", w.min_theta, w.hurwitz_c);
    for p in &w.points {
        text += &format!(
            "  {:<3} x {:+.15}  y {:+.15}  Theta {:.15}{}{}\n",
            symbol_str(p.symbol),
            p.x,
            p.y,
            p.theta,
            if p.equality { "  =C" } else { "" },
            if p.extra { "  extra" } else { "" }
        );
    }
    let rows = w
        .points
        .iter()
        .map(|p| vec![symbol_str(p.symbol), p.x.to_string(), p.y.to_string(), p.theta.to_string(), p.equality.to_string(), p.extra.to_string()])
        .collect();
    let v = serde_json::to_value(&w).map_err(err)?;
    Ok(Report::new(v, text).with_table(&["symbol", "x", "y", "theta", "equality", "extra"], rows))
}

#[allow(clippy::too_many_arguments)]
fn cmd_legendre(
    ctx: &HeckeContext,
    x: Option<&str>,
    samples: u64,
    threshold: Option<f64>,
    depth: usize,
    word_len: usize,
    q_cap: f64,
    seed: u64,
) -> Res<Report> {
    let threshold = threshold.unwrap_or(ctx.closed_form_constants().mediant_lenstra.to_f64() - 0.01);
    let rats = stats::enumerate_gk_rationals(ctx, word_len, q_cap, true);
    let xs: Vec<(String, Real)> = match x {
        Some(s) => vec![(s.to_string(), parse::parse_real(ctx, s).map_err(err)?)],
        None => {
            let lam = ctx.lambda_f64();
            (0..samples)
                .map(|i| {
                    let v = stats::random_start(lam, seed, i);
                    (v.to_string(), Real::from_f64(v, ctx.precision()))
                })
                .collect()
        }
    };
    let mut audits = Vec::new();
    let mut rows = Vec::new();
    let (mut checked, mut members, mut violations, mut inconclusive) = (0, 0, 0, 0);
    for (label, xr) in &xs {
        let a = stats::legendre_audit(ctx, xr, threshold, depth, &rats).map_err(err)?;
        checked += a.checked;
        members += a.members;
        violations += a.violations.len();
        inconclusive += a.inconclusive.len();
        for e in &a.violations {
            rows.push(vec![label.clone(), e.a.clone(), e.c.clone(), e.value.to_string(), e.theta.to_string()]);
        }
        if !a.violations.is_empty() || a.skipped_terminal || x.is_some() {
            let mut j = serde_json::to_value(&a).map_err(err)?;
            j["x_source"] = json!(label);
            audits.push(j);
        }
    }
    let text = format!(
        "{} rationals (word length <= {word_len}), threshold {threshold:.6}, {} points\nchecked {checked}, members {members}, violations {violations}, inconclusive {inconclusive}\n",
        rats.len(),
        xs.len()
    );
    let v = json!({
        "threshold": threshold,
        "rationals": rats.len(),
        "points": xs.len(),
        "depth": depth,
        "checked": checked,
        "members": members,
        "violations": violations,
        "inconclusive": inconclusive,
        "audits": audits,
    });
    Ok(Report::new(v, text).with_table(&["x", "a", "c", "value", "theta"], rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flatten_paths() {
        let rows = flatten(&json!({"a": {"b": [1, "x"]}, "c": true}));
        assert_eq!(rows, vec![vec!["a.b.0".to_string(), "1".into()], vec!["a.b.1".into(), "x".into()], vec!["c".into(), "true".into()]]);
    }

    #[test]
    fn non_finite_numbers_become_strings() {
        assert_eq!(num(f64::NEG_INFINITY), json!("-inf"));
        assert_eq!(num(1.5), json!(1.5));
    }

    #[test]
    fn csv_uses_table_when_present() {
        let r = Report::new(json!({}), String::new()).with_table(&["t", "n"], vec![vec!["0.1".into(), "3".into()]]);
        assert_eq!(render(&r, Format::Csv).unwrap(), "t,n\n0.1,3\n");
    }

    #[test]
    fn cli_parses() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
        assert!(Cli::try_parse_from(["rosen", "--k", "3", "context"]).is_err());
        let c = Cli::try_parse_from(["rosen", "expand", "--x", "-lambda/2", "--k", "8"]).unwrap();
        assert_eq!(c.k, 8);
    }
}
