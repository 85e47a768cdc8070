use equichern::calculus::{equivariant_differential_of, liouville_data, moment_of_one_form};
use equichern::catalog::{
    circle_action, cotangent_circle_case, exact_symplectic_case, exact_symplectic_moment_oracle,
    exact_symplectic_primitive, plane_rotation_action, plane_rotation_case, plane_rotation_one_form,
};
use equichern::ExteriorElement;
use num_complex::Complex64;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[test]
fn plane_rotation_d_lambda_is_two_area_plus_x_r_squared() {
    let case = plane_rotation_case();
    let lambda = case.one_form.as_ref().unwrap();
    for (p, x) in [([0.3, -1.2], 0.7), ([2.0, 0.5], -1.1), ([-0.4, 0.9], 3.0)] {
        let e = lambda.equivariant_differential(&case.action, &p, &[x]).unwrap();
        let r2 = p[0] * p[0] + p[1] * p[1];
        assert!((e.scalar_part() - c(x * r2)).norm() < 1e-13);
        assert!((e.coeff(0b11) - c(2.0)).norm() < 1e-13);
        assert!(e.coeff(0b01).norm() + e.coeff(0b10).norm() == 0.0);
    }
}

#[test]
fn cotangent_circle_d_lambda_is_dtheta_dxi_minus_x_xi() {
    let case = cotangent_circle_case().unwrap();
    let lambda = case.one_form.as_ref().unwrap();
    for (p, x) in [([0.2, 1.5], 0.4), ([3.0, -0.7], 2.0)] {
        let e = lambda.equivariant_differential(&case.action, &p, &[x]).unwrap();
        assert!((e.scalar_part() - c(-x * p[1])).norm() < 1e-13);
        assert!((e.coeff(0b11) - c(1.0)).norm() < 1e-13);
    }
}

#[test]
fn equivariant_differential_squares_to_zero_on_invariant_forms() {
    let action = plane_rotation_action();
    let lambda = plane_rotation_one_form();
    for (p, x) in [([0.6, -0.8], 1.3), ([1.5, 0.2], -0.4)] {
        let dd = equivariant_differential_of(
            &|q: &[f64]| lambda.equivariant_differential(&action, q, &[x]),
            &action,
            &p,
            &[x],
        )
        .unwrap();
        assert!(dd.max_abs() < 1e-8, "D² = {}", dd.max_abs());
    }
}

#[test]
fn analytic_and_numerical_exterior_derivatives_agree() {
    let action = plane_rotation_action();
    let analytic = plane_rotation_one_form();
    let numeric = equichern::calculus::InvariantOneForm::new(|p| vec![-p[1], p[0]]);
    let p = [0.7, -0.3];
    let a = analytic.d(&action, &p).unwrap();
    let b = numeric.d(&action, &p).unwrap();
    assert!((&a - &b).max_abs() < 1e-9);
}

#[test]
fn liouville_moment_is_xi_for_the_lifted_circle() {
    let lifted = circle_action().cotangent_lift().unwrap();
    let (lambda, mu) = liouville_data(&lifted).unwrap();
    for p in [[0.0, 1.5], [2.0, -0.3]] {
        let f = moment_of_one_form(&lifted, &lambda, &p).unwrap();
        assert!((f[0] - p[1]).abs() < 1e-14);
        assert!((mu(&p, &[1.0]) - f[0]).abs() < 1e-14);
    }
}

#[test]
fn exact_symplectic_moment_matches_quadratic_form() {
    let case = exact_symplectic_case();
    let omega = exact_symplectic_primitive();
    for p in [[0.3, -0.2], [1.4, 0.9]] {
        let f = moment_of_one_form(&case.action, &omega, &p).unwrap();
        assert!((f[0] - exact_symplectic_moment_oracle(&p)).abs() < 1e-13);
    }
}

#[test]
fn interior_product_obeys_leibniz_rule() {
    let a = ExteriorElement::real_one_form(&[1.0, 2.0, -0.5]);
    let b = ExteriorElement::real_one_form(&[0.3, -1.0, 4.0]);
    let v = [0.2, -1.1, 0.7];
    let lhs = a.wedge(&b).interior(&v);
    let mut rhs = a.interior(&v).wedge(&b);
    rhs -= &a.wedge(&b.interior(&v));
    assert!((&lhs - &rhs).max_abs() < 1e-15);
}
