use proptest::prelude::*;
use rosen_mediant::{LambdaRing, MobiusZL, ProjZL, ZLambda};
use rug::Integer;
use std::sync::Arc;

fn elem(r: &Arc<LambdaRing>, c: &[i64]) -> ZLambda {
    ZLambda::from_coeffs(r, c.iter().take(r.degree()).map(|&v| Integer::from(v)).collect())
}

fn lam(k: u32) -> f64 {
    2.0 * (std::f64::consts::PI / k as f64).cos()
}

fn approx(z: &ZLambda, k: u32) -> f64 {
    z.coeffs().iter().enumerate().map(|(i, c)| c.to_f64() * lam(k).powi(i as i32)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn arithmetic_matches_floats(k in 4u32..=15, a in prop::collection::vec(-50i64..50, 8), b in prop::collection::vec(-50i64..50, 8)) {
        let r = LambdaRing::new(k).unwrap();
        let (x, y) = (elem(&r, &a), elem(&r, &b));
        let (fx, fy) = (approx(&x, k), approx(&y, k));
        let scale = 1.0 + fx.abs() * fy.abs() + fx.abs() + fy.abs();
        prop_assert!(((&x * &y).to_f64() - fx * fy).abs() < 1e-9 * scale);
        prop_assert!(((&x + &y).to_f64() - (fx + fy)).abs() < 1e-9 * scale);
        prop_assert!(((&x - &y).to_f64() - (fx - fy)).abs() < 1e-9 * scale);
    }

    #[test]
    fn ring_laws(k in 4u32..=12, a in prop::collection::vec(-20i64..20, 6), b in prop::collection::vec(-20i64..20, 6), c in prop::collection::vec(-20i64..20, 6)) {
        let r = LambdaRing::new(k).unwrap();
        let (x, y, z) = (elem(&r, &a), elem(&r, &b), elem(&r, &c));
        prop_assert_eq!(&x * &(&y + &z), &(&x * &y) + &(&x * &z));
        prop_assert_eq!(&(&x * &y) * &z, &x * &(&y * &z));
        prop_assert_eq!(&x * &y, &y * &x);
        prop_assert!((&x - &x).is_zero());
    }

    #[test]
    fn exact_sign(k in 4u32..=12, a in prop::collection::vec(-30i64..30, 6)) {
        let r = LambdaRing::new(k).unwrap();
        let x = elem(&r, &a);
        let f = approx(&x, k);
        if f.abs() > 1e-6 {
            prop_assert_eq!(x.sign(), if f > 0.0 { 1 } else { -1 });
        }
    }

    #[test]
    fn projective_scaling(k in 4u32..=10, a in prop::collection::vec(-9i64..9, 4), s in 1i64..40) {
        let r = LambdaRing::new(k).unwrap();
        let num = elem(&r, &a);
        let den = ZLambda::from_int(&r, 7);
        let p = ProjZL::new(num.clone(), den.clone()).unwrap();
        let q = ProjZL::new(num.mul_int(s), den.mul_int(s)).unwrap();
        prop_assert_eq!(p, q);
    }
}

#[test]
fn lambda_enclosure_and_reduction() {
    for k in 4u32..=30 {
        let r = LambdaRing::new(k).unwrap();
        let iv = r.lambda_enclosure(256);
        assert!((iv.to_f64() - lam(k)).abs() < 1e-15);
        assert!(iv.width().to_f64() < 1e-70, "k={k}");
        // lambda^degree reduces to lower powers
        let l = ZLambda::lambda(&r);
        let p = l.pow(r.degree() as u32);
        assert_eq!(p.coeffs().len(), r.degree());
        assert!((p.to_f64() - lam(k).powi(r.degree() as i32)).abs() < 1e-9);
    }
}

#[test]
fn known_degrees() {
    // phi(2k)/2
    for (k, d) in [(4u32, 2usize), (5, 2), (6, 2), (7, 3), (8, 4), (9, 3), (10, 4), (12, 4)] {
        assert_eq!(LambdaRing::new(k).unwrap().degree(), d, "k={k}");
    }
}

#[test]
fn special_values_are_exact() {
    let r4 = LambdaRing::new(4).unwrap();
    let l = ZLambda::lambda(&r4);
    assert_eq!(&l * &l, ZLambda::from_int(&r4, 2));
    let r6 = LambdaRing::new(6).unwrap();
    let l = ZLambda::lambda(&r6);
    assert_eq!(&l * &l, ZLambda::from_int(&r6, 3));
    // golden ratio: lambda^2 = lambda + 1 for k = 5
    let r5 = LambdaRing::new(5).unwrap();
    let l = ZLambda::lambda(&r5);
    assert_eq!(&l * &l, &l + &ZLambda::one(&r5));
}

#[test]
fn mobius_group_laws() {
    let r = LambdaRing::new(7).unwrap();
    let l = ZLambda::lambda(&r);
    let (one, zero) = (ZLambda::one(&r), ZLambda::zero(&r));
    let t = MobiusZL::new(one.clone(), l.clone(), zero.clone(), one.clone());
    let s = MobiusZL::new(zero.clone(), -one.clone(), one.clone(), zero.clone());
    assert!(s.mul(&s).same_map(&MobiusZL::identity(&r)));
    assert!(t.mul(&t.inverse().unwrap()).same_map(&MobiusZL::identity(&r)));
    // (S T)^k = identity in PSL_2 for the Hecke group G_7
    assert!(s.mul(&t).pow(7).same_map(&MobiusZL::identity(&r)));
    assert_eq!(t.det(), one);
    let x = ProjZL::from_ratio(&r, 1, 3).unwrap();
    let back = t.inverse().unwrap().apply(&t.apply(&x).unwrap()).unwrap();
    assert_eq!(back, x);
}

#[test]
fn mixed_rings_are_rejected() {
    let a = ZLambda::one(&LambdaRing::new(5).unwrap());
    let b = ZLambda::one(&LambdaRing::new(7).unwrap());
    assert!(a.checked_add(&b).is_err());
    assert!(a.checked_mul(&b).is_err());
}
