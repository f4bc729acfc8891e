use rosen_mediant::maps::Real;
use rosen_mediant::parse::parse_real;
use rosen_mediant::{stats, HeckeContext};

fn ctx(k: u32) -> HeckeContext {
    HeckeContext::new(k).unwrap()
}

fn lenstra(c: &HeckeContext) -> f64 {
    c.closed_form_constants().mediant_lenstra.to_f64()
}

#[test]
fn counting_is_linear_below_the_constant() {
    for k in [5u32, 8] {
        let c = ctx(k);
        let l = lenstra(&c);
        let grid: Vec<f64> = (0..9).map(|i| l * (0.1 + 0.1 * i as f64)).collect();
        let f = stats::mean_counting_curve(&c, &[1, 2, 3, 4, 5], 1_000_000, &grid).unwrap();
        let g: Vec<f64> = f.iter().zip(&grid).map(|(a, t)| a / t).collect();
        let (mn, mx) = g.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        assert!((mx - mn) / mn < 0.02, "k={k}: {g:?}");
    }
}

#[test]
fn counting_falls_short_above_the_constant() {
    for k in [5u32, 8] {
        let c = ctx(k);
        let l = lenstra(&c);
        let (t1, t2) = (1.2 * l, 0.8 * l);
        let r = stats::count_small_theta(&c, stats::random_start(c.lambda_f64(), 40, 0), 1_000_000, &[t2, t1]).unwrap();
        let ratio = r.counts[1] as f64 / r.counts[0] as f64;
        assert!(ratio < t1 / t2 - 0.01, "k={k}: {ratio}");
    }
}

#[test]
fn mediant_theta_is_unbounded() {
    let c = ctx(8);
    let big = (0..10u64).filter(|&s| stats::max_mediant_theta(&c, s, 100_000) > 10.0).count();
    assert!(big >= 9, "{big} of 10");
}

#[test]
fn breakpoint_is_stable_under_more_data() {
    let c = ctx(8);
    let grid = stats::parse_grid("0.01:1.2:120").unwrap();
    let a = stats::breakpoint_estimate(&c, &[61, 62, 63, 64, 65], 1_000_000, &grid).unwrap();
    let b = stats::breakpoint_estimate(&c, &[71, 72, 73, 74, 75], 2_000_000, &grid).unwrap();
    assert!((a.l_hat / b.l_hat - 1.0).abs() < 0.03, "{} vs {}", a.l_hat, b.l_hat);
    assert!(a.rel_error.abs() < 0.03 && b.rel_error.abs() < 0.03);
}

#[test]
fn statistics_are_deterministic() {
    let c = ctx(7);
    let grid = stats::parse_grid("0.05:1:20").unwrap();
    let a = stats::mean_counting_curve(&c, &[9, 10, 11], 200_000, &grid).unwrap();
    let b = stats::mean_counting_curve(&c, &[9, 10, 11], 200_000, &grid).unwrap();
    assert_eq!(a, b);
    let e1 = stats::lyapunov_entropy(&c, 100_000, 4).unwrap();
    let e2 = stats::lyapunov_entropy(&c, 100_000, 4).unwrap();
    assert_eq!(e1.h_hat.to_bits(), e2.h_hat.to_bits());
    assert_eq!(stats::random_start(c.lambda_f64(), 5, 6), stats::random_start(c.lambda_f64(), 5, 6));
    assert_ne!(stats::random_start(c.lambda_f64(), 5, 6), stats::random_start(c.lambda_f64(), 5, 7));
}

#[test]
fn entropy_matches_closed_form() {
    for k in [4u32, 6, 7] {
        let r = stats::lyapunov_entropy(&ctx(k), 1_000_000, 8).unwrap();
        let target = (k as f64 - 2.0) * std::f64::consts::PI.powi(2) / (2.0 * k as f64);
        assert!((r.target - target).abs() < 1e-12);
        assert!(r.rel_error.abs() < 0.01, "k={k}: {r:?}");
    }
}

#[test]
fn borel_frequency_is_positive() {
    let c = ctx(5);
    let f = stats::borel_frequency(&c, &[1, 2], 200_000, c.hurwitz_c().to_f64());
    assert!(f > 0.01 && f < 1.0);
}

#[test]
fn enumeration_contains_simple_cusps() {
    let c = ctx(6);
    let rats = stats::enumerate_gk_rationals(&c, 5, 1e4, true);
    let lam = c.lambda_f64();
    assert!(rats.iter().all(|r| r.value >= -lam / 2.0 && r.value < lam / 2.0));
    assert!(rats.iter().any(|r| r.value == 0.0));
    // 1/lambda = -1/z at z = -lambda, one translation and one inversion
    assert!(rats.iter().any(|r| (r.value - 1.0 / lam).abs() < 1e-14));
    let mut vals: Vec<f64> = rats.iter().map(|r| r.value).collect();
    vals.sort_by(f64::total_cmp);
    assert!(vals.windows(2).all(|w| w[1] - w[0] > 1e-12), "duplicates");
}

#[test]
fn legendre_audit_cases() {
    let c = ctx(8);
    let rats = stats::enumerate_gk_rationals(&c, 6, 1e5, true);
    let ell = lenstra(&c);
    let x = Real::from_f64(0.2718281828, c.precision());
    let a = stats::legendre_audit(&c, &x, ell - 0.01, 60, &rats).unwrap();
    assert!(a.violations.is_empty(), "{a:?}");
    assert!(a.checked > 0 && a.members == a.checked);
    // a point that is itself a cusp has nothing to audit
    let cusp = parse_real(&c, "1/l").unwrap();
    assert!(stats::legendre_audit(&c, &cusp, ell, 20, &rats).unwrap().skipped_terminal);
    assert!(stats::legendre_audit(&c, &x, -1.0, 20, &rats).is_err());
}
