use proptest::prelude::*;

use dyadic::linalg::Mat3;
use dyadic::spectral::{
    char_poly_a0, char_poly_a0_deriv, eig_a, eig_a0, evaluate_q, exp_qa, find_q, matrix_a,
    matrix_a0, rho_quadratic, EigenBasis,
};
use dyadic::Params;

fn vec3(v: [f64; 3]) -> nalgebra::Vector3<f64> {
    nalgebra::Vector3::new(v[0], v[1], v[2])
}

/// `|M v1 - kappa v1|`, `|M v2 - (Re w v2 - Im w v3)|`, `|M v3 - (Im w v2 + Re w v3)|`,
/// each relative to the vector length.
fn residuals(m: &Mat3, e: &EigenBasis) -> [f64; 3] {
    let (v1, v2, v3) = (vec3(e.v1), vec3(e.v2), vec3(e.v3));
    let r1 = (m * v1 - v1 * e.kappa).norm() / v1.norm();
    let r2 = (m * v2 - (v2 * e.w_re - v3 * e.w_im)).norm() / (v2.norm() + v3.norm());
    let r3 = (m * v3 - (v2 * e.w_im + v3 * e.w_re)).norm() / (v2.norm() + v3.norm());
    [r1, r2, r3]
}

fn params() -> impl Strategy<Value = Params> {
    (1.5f64..4.0, 2.05f64..4.0).prop_map(|(l, b)| Params::new(l, b, 10).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn char_poly_is_increasing(p in params(), alpha in -10.0f64..10.0) {
        prop_assert!(char_poly_a0_deriv(alpha, &p) > 0.0);
        let h = 1e-6;
        prop_assert!(char_poly_a0(alpha + h, &p) > char_poly_a0(alpha - h, &p));
    }

    #[test]
    fn a0_eigenpairs(p in params()) {
        let e = eig_a0(&p).unwrap();
        prop_assert!(e.kappa > 0.75 && e.kappa < 1.0);
        prop_assert!(e.w_re < 0.125 && e.w_im > 0.0);
        prop_assert!(char_poly_a0(e.kappa, &p).abs() <= 1e-10 * p.lambda.powf(2.0 * p.beta));
        prop_assert_eq!((e.v1[0], e.v2[0], e.v3[0]), (1.0, 1.0, 0.0));
        for r in residuals(&matrix_a0(&p), &e) {
            prop_assert!(r <= 1e-10, "residual {r}");
        }
        // trace A0 = 1
        prop_assert!((e.kappa + 2.0 * e.w_re - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn a_eigenpairs(p in params(), lq in 0.0f64..7.6) {
        let q = lq.exp();
        let check = eig_a(q, &p).unwrap();
        let e = check.basis;
        prop_assert_eq!((e.v1[0], e.v2[0], e.v3[0]), (1.0, 1.0, 0.0));
        let m = matrix_a(q, &p).unwrap();
        let scale = m.norm().max(1.0);
        for r in residuals(&m, &e) {
            prop_assert!(r <= 1e-10 * scale, "residual {r}");
        }
    }

    #[test]
    fn exponential_acts_on_eigenbasis(p in params(), q in 0.5f64..30.0) {
        let e = eig_a(q, &p).unwrap().basis;
        let b = exp_qa(q, &p, &e).unwrap();
        let k = (q * e.kappa).exp();
        let ab = (e.w() * q).exp();
        let (v1, v2, v3) = (vec3(e.v1), vec3(e.v2), vec3(e.v3));
        let scale = k.max(1.0) * (v1.norm() + v2.norm() + v3.norm());
        prop_assert!((b * v1 - v1 * k).norm() <= 1e-8 * scale);
        prop_assert!((b * v2 - (v2 * ab.re - v3 * ab.im)).norm() <= 1e-8 * scale);
        prop_assert!((b * v3 - (v2 * ab.im + v3 * ab.re)).norm() <= 1e-8 * scale);
    }

    #[test]
    fn rho_roots_solve_the_quadratic(p in params(), q in 1.0f64..200.0) {
        let e = eig_a(q, &p).unwrap().basis;
        let k = (q * e.kappa).exp();
        let ab = (e.w() * q).exp();
        let quad = rho_quadratic(&e, k, ab.re, ab.im).unwrap();
        prop_assume!(quad.real_roots);
        let (u, v, w) = (quad.u, quad.v, quad.w);
        for r in [quad.rho1, quad.rho2] {
            let terms = (u * r * r).abs() + (v * r).abs() + w.abs();
            prop_assert!((u * r * r + v * r + w).abs() <= 1e-8 * terms);
        }
        let sum = quad.rho1 + quad.rho2;
        prop_assert!((sum + v / u).abs() <= 1e-8 * (v / u).abs().max(quad.rho1.abs()));
        let prod = quad.rho1 * quad.rho2;
        prop_assert!((prod - w / u).abs() <= 1e-8 * (w / u).abs().max(f64::MIN_POSITIVE));
    }
}

#[test]
fn report_invariants_at_selected_q() {
    let p = Params::new(2.0, 2.5, 10).unwrap();
    let r = find_q(&p, p.rho_threshold).unwrap();
    assert!(r.pass);
    assert!((r.k - (r.q * r.kappa).exp()).abs() <= 1e-12 * r.k);
    let ab = (r.basis().w() * r.q).exp();
    assert!((r.a - ab.re).abs() <= 1e-9 * r.k && (r.b - ab.im).abs() <= 1e-9 * r.k);
    assert!(r.basis().vector_norm_sum() <= r.mu);
    assert!(r.basis().gap() >= r.nu);
    assert!(r.a.abs().max(r.b.abs()) < r.omega * r.k * (1.0 + 1e-12));
    assert!(r.omega < r.omega_max);
    assert!(r.btilde_residual <= 1e-8);
    assert!(r.y * r.y + r.z * r.z > 0.0);
    assert!(r.rho.abs() > p.rho_threshold);
}

#[test]
fn search_is_monotone_in_r() {
    let p = Params::new(2.0, 2.5, 10).unwrap();
    let base = p.rho_threshold;
    let mut last = 0.0;
    for factor in [1.0, 3.0, 1e2, 1e4, 1e8, 1e12] {
        let q = find_q(&p, base * factor).unwrap().q;
        assert!(q >= last, "R = {factor} R0 gave q = {q} < {last}");
        last = q;
    }
}

#[test]
fn fixed_q_report_can_fail() {
    let p = Params::new(2.0, 2.5, 10).unwrap();
    let r = evaluate_q(3.0, &p, p.rho_threshold).unwrap();
    assert!(!r.pass);
    assert!(r.checks.first_failure().is_some());
    assert!(evaluate_q(3.0, &p, -1.0).is_err());
    assert!(matrix_a(0.0, &p).is_err());
}

#[test]
fn unreachable_threshold_fails_the_search() {
    let p = Params::new(2.0, 2.5, 10).unwrap();
    let e = find_q(&p, 1e300).unwrap_err();
    assert_eq!(e.exit_code(), 3);
}
