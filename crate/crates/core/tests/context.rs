use rosen_mediant::{Error, HeckeContext, Parity};

fn lam(k: u32) -> f64 {
    2.0 * (std::f64::consts::PI / k as f64).cos()
}

#[test]
fn lambda_and_parity() {
    for k in 4u32..=30 {
        let c = HeckeContext::new(k).unwrap();
        assert!((c.lambda_f64() - lam(k)).abs() < 1e-15, "k={k}");
        assert!(c.min_poly_residual().to_f64().abs() < 1e-60, "k={k}");
        match c.parity() {
            Parity::Even(l) => assert_eq!(2 * l, k),
            Parity::Odd(l) => assert_eq!(2 * l + 3, k),
        }
    }
}

#[test]
fn r_and_hurwitz() {
    for k in 4u32..=20 {
        let c = HeckeContext::new(k).unwrap();
        let (l, r) = (c.lambda_f64(), c.r_f64());
        if k % 2 == 0 {
            assert_eq!(r, 1.0);
            assert!((c.hurwitz_c().to_f64() - 0.5).abs() < 1e-15);
        } else {
            // R^2 + (2 - lambda) R - 1 = 0
            assert!((r * r + (2.0 - l) * r - 1.0).abs() < 1e-12, "k={k}");
            assert!((c.hurwitz_c().to_f64() - 1.0 / ((2.0 - l).powi(2) + 4.0).sqrt()).abs() < 1e-12, "k={k}");
        }
    }
}

#[test]
fn phi_table_ends_at_zero() {
    for k in 4u32..=14 {
        let c = HeckeContext::new(k).unwrap();
        let phi = c.phi();
        assert!((phi[0].to_f64() + c.lambda_f64() / 2.0).abs() < 1e-15);
        assert!(phi.last().unwrap().is_zero());
        let expected = if k % 2 == 0 { k as usize / 2 } else { k as usize - 1 };
        assert_eq!(phi.len(), expected, "k={k}");
    }
}

#[test]
fn closed_forms() {
    let c = HeckeContext::new(8).unwrap().closed_form_constants();
    let l = lam(8);
    assert!((c.rosen_lenstra.to_f64() - l / (l + 2.0)).abs() < 1e-14);
    assert!((c.mediant_lenstra.to_f64() - (l - 1.0)).abs() < 1e-14);
    let c4 = HeckeContext::new(4).unwrap().closed_form_constants();
    let (a, b) = c4.k4_candidates.unwrap();
    assert!((a.to_f64() - 2f64.sqrt() / 2.0).abs() < 1e-15 && (b.to_f64() - (2f64.sqrt() - 1.0)).abs() < 1e-15);
    for k in 5u32..=15 {
        let c = HeckeContext::new(k).unwrap();
        let cf = c.closed_form_constants();
        assert!(cf.mediant_lenstra > c.hurwitz_c(), "k={k}");
    }
}

#[test]
fn rejects_bad_parameters() {
    assert_eq!(HeckeContext::new(3).unwrap_err(), Error::UnsupportedIndex(3));
    assert!(HeckeContext::with_precision(8, 32).is_err());
}

#[test]
fn json_is_stable() {
    let a = HeckeContext::new(9).unwrap().to_json(30);
    let b = HeckeContext::new(9).unwrap().to_json(30);
    assert_eq!(a, b);
    assert_eq!(a["phi"].as_array().unwrap().len(), 8);
}
