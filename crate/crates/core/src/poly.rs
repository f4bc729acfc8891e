//! Integer polynomials: cyclotomic polynomials and the minimal polynomial of 2cos(pi/k).

use rug::Integer;

/// Dense polynomial, constant term first.
pub type Poly = Vec<Integer>;

fn trim(p: &mut Poly) {
    while p.len() > 1 && p.last().is_some_and(|c| *c == 0) {
        p.pop();
    }
}

pub fn mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = vec![Integer::new(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if *x == 0 {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += Integer::from(x * y);
        }
    }
    trim(&mut out);
    out
}

/// Exact division by a monic divisor. Returns None when the remainder is nonzero.
pub fn div_exact(num: &Poly, den: &Poly) -> Option<Poly> {
    let dn = den.len() - 1;
    assert!(den[dn] == 1, "divisor must be monic");
    if num.len() < den.len() {
        return if num.iter().all(|c| *c == 0) { Some(vec![Integer::new()]) } else { None };
    }
    let mut rem = num.clone();
    let mut q = vec![Integer::new(); num.len() - dn];
    for i in (0..q.len()).rev() {
        let c = rem[i + dn].clone();
        if c != 0 {
            for (j, d) in den.iter().enumerate() {
                rem[i + j] -= Integer::from(&c * d);
            }
        }
        q[i] = c;
    }
    if rem.iter().all(|c| *c == 0) {
        trim(&mut q);
        Some(q)
    } else {
        None
    }
}

pub fn cyclotomic(n: u32) -> Poly {
    assert!(n >= 1);
    // x^n - 1 divided by every Phi_d with d | n, d < n
    let mut p = vec![Integer::new(); n as usize + 1];
    p[0] = Integer::from(-1);
    p[n as usize] = Integer::from(1);
    for d in 1..n {
        if n % d == 0 {
            p = div_exact(&p, &cyclotomic(d)).expect("cyclotomic division is exact");
        }
    }
    p
}

/// Minimal polynomial psi of 2cos(pi/k), from x^d psi(x + 1/x) = Phi_{2k}(x).
pub fn min_poly_lambda(k: u32) -> Poly {
    let phi = cyclotomic(2 * k);
    let deg = phi.len() - 1;
    assert!(deg % 2 == 0);
    let d = deg / 2;
    let mut rest = phi;
    let mut psi = vec![Integer::new(); d + 1];
    let mut binom_pows: Vec<Poly> = vec![vec![Integer::from(1)]];
    let x2p1: Poly = vec![Integer::from(1), Integer::new(), Integer::from(1)];
    for j in 1..=d {
        let next = mul(&binom_pows[j - 1], &x2p1);
        binom_pows.push(next);
    }
    for j in (0..=d).rev() {
        let c = rest.get(d + j).cloned().unwrap_or_default();
        if c != 0 {
            // subtract c * x^(d-j) * (x^2+1)^j
            for (i, b) in binom_pows[j].iter().enumerate() {
                rest[d - j + i] -= Integer::from(&c * b);
            }
        }
        psi[j] = c;
    }
    assert!(rest.iter().all(|c| *c == 0), "Phi_2k is not palindromic");
    psi
}

/// Horner evaluation at a rational point, exact.
pub fn eval_rational(p: &Poly, x: &rug::Rational) -> rug::Rational {
    let mut acc = rug::Rational::new();
    for c in p.iter().rev() {
        acc *= x;
        acc += c;
    }
    acc
}
