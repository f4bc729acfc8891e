use serde_json::Value;
use std::process::{Command, Output};

fn rosen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rosen")).args(args).output().expect("run rosen")
}

fn json(args: &[&str]) -> Value {
    let out = rosen(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json output")
}

fn f(v: &Value) -> f64 {
    v.as_f64().or_else(|| v.as_str().and_then(|s| s.parse().ok())).expect("number")
}

#[test]
fn expand_first_digit() {
    let v = json(&["--k", "4", "expand", "--x", "0.3", "--depth", "10"]);
    assert!(v["digit_string"].as_str().unwrap().starts_with("(+1:2)"));
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["mediants"].as_array().unwrap().len(), 10);
}

#[test]
fn expand_zero_is_terminal() {
    let v = json(&["--k", "5", "expand", "--x", "0"]);
    assert!(v["digits"].as_array().unwrap().is_empty());
    assert_eq!(v["terminated"], true);
    let text = rosen(&["--k", "5", "--format", "text", "expand", "--x", "0"]);
    assert!(String::from_utf8_lossy(&text.stdout).contains("terminal"));
}

#[test]
fn expand_cusp_runs_through_phi() {
    let v = json(&["--k", "8", "expand", "--x", "-lambda/2", "--depth", "5"]);
    let ctx = json(&["--k", "8", "context"]);
    let orbit: Vec<f64> = v["t_orbit"].as_array().unwrap().iter().map(f).collect();
    let phi: Vec<f64> = ctx["phi"].as_array().unwrap().iter().map(f).collect();
    assert!((orbit[0] - phi[1]).abs() < 1e-12 && (orbit[1] - phi[2]).abs() < 1e-12);
}

#[test]
fn unsupported_k_is_usage_error() {
    let out = rosen(&["--k", "3", "verify"]);
    assert_eq!(out.status.code(), Some(2));
    let out = rosen(&["--k", "8", "expand", "--x", "5"]);
    assert!(!out.status.success());
}

#[test]
fn domain_fibers() {
    let v = json(&["--k", "8", "domain"]);
    let os = v["omega_star"].as_array().unwrap();
    assert_eq!(os.len(), 5);
    assert!((f(&os[0]["y_hi"]) + 2.8477590650).abs() < 1e-9);
    assert!(!v["images"].as_array().unwrap().is_empty());

    let v = json(&["--k", "9", "domain"]);
    let os = v["omega_star"].as_array().unwrap();
    assert_eq!(os.len(), 10);
    let last = &os[9];
    let lam = 2.0 * (std::f64::consts::PI / 9.0).cos();
    assert!((f(&last["x_lo"]) - 1.0).abs() < 1e-12 && (f(&last["x_hi"]) - 2.0 / lam).abs() < 1e-12);
    let r = json(&["--k", "9", "context"]);
    assert!((f(&last["y_lo"]) + f(&r["R"])).abs() < 1e-12);
}

#[test]
fn dual_partition() {
    let v = json(&["--k", "8", "domain", "--dual"]);
    let e: Vec<f64> = v["dual_partition"].as_array().unwrap().iter().map(f).collect();
    let lam = 2.0 * (std::f64::consts::PI / 8.0).cos();
    assert_eq!(e.len(), 3);
    assert!((e[0] + lam).abs() < 1e-12 && (e[1] + 1.0).abs() < 1e-12 && (e[2] + 1.0 / lam).abs() < 1e-12);
}

#[test]
fn verify_passes_even_and_odd() {
    for k in ["8", "9"] {
        let out = rosen(&["--k", k, "--seed", "42", "verify", "--samples", "20000"]);
        assert!(out.status.success(), "k={k}: {}", String::from_utf8_lossy(&out.stdout));
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(v["passed"], true);
        assert!(v["failures"].as_array().unwrap().is_empty());
        assert_eq!(v["checks"].as_array().unwrap().len(), 7);
    }
}

#[test]
fn witness_periods() {
    let v = json(&["--k", "8", "witness"]);
    assert_eq!(v["period"], 4);
    assert_eq!(v["t_hat_period"], 3);
    assert!((f(&v["min_theta"]) - 0.5).abs() < 1e-12);
    let v = json(&["--k", "9", "witness"]);
    assert_eq!(v["period"], 9);
}

#[test]
fn stats_breakpoint_and_csv() {
    let v = json(&["--k", "5", "stats", "--n-iter", "200000"]);
    let b = &v["breakpoint"];
    assert!(f(&b["rel_error"]).abs() < 0.1, "{b}");
    assert_eq!(v["counting"]["by"], "orbit index");

    let out = rosen(&["--k", "5", "--format", "csv", "stats", "--n-iter", "1000", "--orbits", "1", "--grid", "0.1:1:10"]);
    let body = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = body.lines().collect();
    assert_eq!(lines[0], "t,count,count_over_n,count_over_nt");
    assert_eq!(lines.len(), 11);
}

#[test]
fn stats_k4_reports_both_candidates() {
    let v = json(&["--k", "4", "stats", "--n-iter", "100000"]);
    let names: Vec<&str> = v["breakpoint"]["candidates"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(names.len(), 2);
}

#[test]
fn legendre_single_point_and_sample() {
    let v = json(&["--k", "8", "legendre-audit", "--samples", "10"]);
    assert_eq!(v["violations"], 0);
    assert_eq!(v["points"], 10);
    let v = json(&["--k", "8", "legendre-audit", "--x", "0.123456789"]);
    assert_eq!(v["points"], 1);
    assert_eq!(v["audits"].as_array().unwrap().len(), 1);
}

#[test]
fn output_is_deterministic() {
    let args = ["--k", "7", "--seed", "3", "stats", "--n-iter", "50000", "--entropy", "--borel"];
    assert_eq!(rosen(&args).stdout, rosen(&args).stdout);
    let args = ["--k", "6", "--seed", "5", "verify", "--samples", "5000"];
    assert_eq!(rosen(&args).stdout, rosen(&args).stdout);
}

#[test]
fn out_flag_writes_file() {
    let dir = std::env::temp_dir().join(format!("rosen-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("ctx.json");
    let out = rosen(&["--k", "6", "--out", path.to_str().unwrap(), "context"]);
    assert!(out.status.success() && out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["k"], 6);
    assert_eq!(v["lambda"].as_str().unwrap().len(), "1.73205080756887729352744634151".len());
    std::fs::remove_dir_all(&dir).unwrap();
}
