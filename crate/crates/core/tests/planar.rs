use rosen_mediant::planar::{self, LenstraVariant, Measure, Membership, PlanarPoint};
use rosen_mediant::{Error, HeckeContext};
use rug::Float;

fn ctx(k: u32) -> HeckeContext {
    HeckeContext::new(k).unwrap()
}

fn fl(v: f64) -> Float {
    Float::with_val(256, v)
}

#[test]
fn rectangle_measure() {
    let Measure::Finite(m) = planar::rect_measure(&fl(0.0), &fl(1.0), &fl(-2.0), &fl(-1.0)).unwrap() else {
        panic!("finite expected")
    };
    assert!((m.to_f64() - (4.0f64 / 3.0).ln()).abs() < 1e-15);
    let inf = Float::with_val(256, rug::float::Special::NegInfinity);
    let Measure::Finite(m) = planar::rect_measure(&fl(0.0), &fl(1.0), &inf, &fl(-1.0)).unwrap() else {
        panic!("finite expected")
    };
    assert!((m.to_f64() - 2f64.ln()).abs() < 1e-15);
    assert!(matches!(planar::rect_measure(&fl(0.0), &fl(1.0), &fl(-1.0), &fl(0.0)).unwrap(), Measure::Infinite));
    assert_eq!(planar::rect_measure(&fl(0.0), &fl(1.0), &fl(-0.5), &fl(0.5)).unwrap_err(), Error::CrossesDiagonal);
}

#[test]
fn omega0_finite_omega_star_infinite() {
    for k in 4u32..=10 {
        let c = ctx(k);
        let (o0, os) = planar::build_domains(&c).unwrap();
        let m = planar::domain_measure(&o0, None).unwrap().to_f64();
        assert!(m > 0.0 && m.is_finite(), "k={k}");
        assert_eq!(planar::domain_measure(&os, None).unwrap_err(), Error::InfiniteMeasure);
        assert!(o0.fibers.len() < os.fibers.len() || k == 4);
    }
}

#[test]
fn clip_threshold_is_reciprocal_lenstra_constant() {
    for k in 5u32..=12 {
        let c = ctx(k);
        let (_, os) = planar::build_domains(&c).unwrap();
        let s0 = planar::linear_clip_threshold(&c, &os, 1e-9);
        let target = 1.0 / c.closed_form_constants().mediant_lenstra.to_f64();
        assert!((s0 - target).abs() < 1e-7, "k={k}: {s0} vs {target}");
        let lam = c.lambda_f64();
        for s in [s0 * 1.01, s0 * 2.0, s0 * 10.0] {
            let m = planar::domain_measure(&os, Some(&fl(s))).unwrap().to_f64();
            assert!((m - lam / s).abs() < 1e-12 * lam / s, "k={k} s={s}");
        }
        let s = 0.8 * s0;
        let m = planar::domain_measure(&os, Some(&fl(s))).unwrap().to_f64();
        assert!(m < lam / s - 1e-6, "k={k}: no deficit below the threshold");
    }
}

#[test]
fn omega_star_partitions_its_x_range() {
    for k in 4u32..=13 {
        let c = ctx(k);
        let (o0, os) = planar::build_domains(&c).unwrap();
        for d in [&o0, &os] {
            assert!(d.fibers.windows(2).all(|w| w[0].x_hi == w[1].x_lo), "k={k}");
        }
        let lam = c.lambda_f64();
        assert!((os.x_min().to_f64() + lam / 2.0).abs() < 1e-15);
        assert!((os.x_max().to_f64() - 2.0 / lam).abs() < 1e-15);
        let inside = PlanarPoint::new(fl(0.1), fl(-5.0));
        assert_eq!(os.membership(&inside), Membership::Inside);
        assert_eq!(os.membership(&PlanarPoint::new(fl(0.1), fl(0.5))), Membership::Outside);
    }
}

#[test]
fn rosen_and_mediant_extensions_commute_with_inducing() {
    for k in [5u32, 8, 11] {
        let c = ctx(k);
        let (_, os) = planar::build_domains(&c).unwrap();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(k as u64);
        for i in 0..50 {
            let mut pt = planar::sample_omega_star(&c, &os, &mut rng, i);
            // start on the Rosen domain: x in the interval, y below the U-level fibers
            if pt.x.to_f64() >= c.lambda_f64() / 2.0 {
                continue;
            }
            pt.y = fl(pt.y.to_f64().min(-3.0));
            let gap = planar::induced_composition_gap(&c, &pt, 15).unwrap();
            assert!(gap < 1e-40, "k={k} i={i} gap {gap}");
        }
    }
}

#[test]
fn natural_extension_small_samples() {
    for k in [6u32, 7] {
        let r = planar::check_bijectivity(&ctx(k), 20_000, 99).unwrap();
        assert!(r.passed(), "{r:?}");
        let rects = planar::random_branch_rects(&ctx(k), 40, 5).unwrap();
        assert!(planar::check_invariance(&ctx(k), &rects).unwrap().max_deviation < 1e-12);
    }
}

#[test]
fn witness_orbits() {
    for k in [6u32, 7, 10, 11, 12] {
        let c = ctx(k);
        let w = planar::witness_orbit(&c).unwrap();
        assert!(w.exact_certified, "k={k}");
        assert!(w.min_theta >= c.hurwitz_c().to_f64() - 1e-12);
        assert!(w.points.iter().any(|p| p.equality), "k={k}");
        let ell = c.ell();
        if k % 2 == 0 {
            assert_eq!(w.t_hat_period, ell - 1);
            assert_eq!(w.period, ell);
        } else {
            assert_eq!(w.t_hat_period, 2 * ell + 1);
        }
    }
}

#[test]
fn lenstra_geometry_exceeds_hurwitz() {
    for k in 4u32..=16 {
        let c = ctx(k);
        let ro = planar::geometric_lenstra(&c, LenstraVariant::Rosen).unwrap();
        let me = planar::geometric_lenstra(&c, LenstraVariant::Mediant).unwrap();
        let cf = c.closed_form_constants();
        assert!((ro.constant - cf.rosen_lenstra.to_f64()).abs() < 1e-10, "k={k}");
        assert!((me.constant - cf.mediant_lenstra.to_f64()).abs() < 1e-10, "k={k}");
        assert!(ro.constant < me.constant);
    }
}

#[test]
fn bks_coordinates_conjugate_to_s_hat() {
    // (t, v) with y = -1/v follows the Rosen natural extension
    let c = ctx(9);
    let p = c.precision();
    let (mut t, mut v) = (Float::with_val(p, 0.1234567), Float::with_val(p, 0));
    let mut pt = PlanarPoint::new(t.clone(), Float::with_val(p, rug::float::Special::NegInfinity));
    for _ in 0..20 {
        let (nt, nv, d) = planar::bks_step(&c, &t, &v).unwrap();
        let (npt, d2) = planar::rosen_ext_step(&c, &pt).unwrap();
        assert_eq!(d, d2);
        assert!(Float::with_val(p, &nt - &npt.x).abs().to_f64() < 1e-50);
        let y = -Float::with_val(p, nv.clone()).recip();
        assert!(Float::with_val(p, &y - &npt.y).abs().to_f64() < 1e-50);
        (t, v, pt) = (nt, nv, npt);
    }
}

#[test]
fn dual_map_partition() {
    let c = ctx(8);
    let part = planar::dual_partition(&c);
    let lam = c.lambda_f64();
    assert!((part[0] + lam).abs() < 1e-15 && (part[1] + 1.0).abs() < 1e-15 && (part[2] + 1.0 / lam).abs() < 1e-15);
    let y = Float::with_val(c.precision(), -0.7);
    let (ny, b) = planar::dual_step(&c, &y).unwrap();
    assert_eq!(b, planar::DualBranch::II);
    assert!(ny.is_finite());
}
