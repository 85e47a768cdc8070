use equichern::generalized::{
    boundary_value_fourier, boundary_value_pv, check_proper, localization_residual, symplectic_theta_pairing,
    theta_radial_oracle, BoundarySign, TestDensity,
};
use equichern::verify::{fit_decay_exponent, localization_density};
use equichern::{catalog, Error};
use num_complex::Complex64;
use std::f64::consts::PI;

#[test]
fn principal_value_and_fourier_routes_agree() {
    for q in [TestDensity::bump(0.3, 1.0), TestDensity::gaussian(1.0, 0.25)] {
        for s in [BoundarySign::Plus, BoundarySign::Minus] {
            let a = boundary_value_pv(&q, s).unwrap();
            let b = boundary_value_fourier(&q, s).unwrap();
            assert!((a - b).norm() < 1e-10, "{a} vs {b}");
        }
    }
}

#[test]
fn boundary_values_jump_by_two_pi_i_q_zero() {
    let q = TestDensity::bump(0.3, 1.0);
    let plus = boundary_value_pv(&q, BoundarySign::Plus).unwrap();
    let minus = boundary_value_pv(&q, BoundarySign::Minus).unwrap();
    let jump = Complex64::new(0.0, -2.0 * PI * q.eval(&[0.0]));
    assert!((plus - minus - jump).norm() < 1e-12);
}

#[test]
fn even_density_has_zero_principal_value() {
    let even = TestDensity::bump(0.0, 1.0);
    let v = boundary_value_pv(&even, BoundarySign::Plus).unwrap();
    assert!(v.re.abs() < 1e-12);
    assert!((v.im + PI * even.eval(&[0.0])).abs() < 1e-12);
}

#[test]
fn theta_homogeneity_route_matches_radial_oracle() {
    let q = TestDensity::gaussian(1.0, 0.25);
    let th = symplectic_theta_pairing(1.0, &q).unwrap();
    let oracle = theta_radial_oracle(1.0, &q).unwrap();
    assert!((th.homogeneity - oracle).norm() < 1e-8);
    assert!(th.agreement() < 1e-4);
}

#[test]
fn zero_weight_is_not_proper() {
    assert!(matches!(check_proper(&[vec![0.0]]), Err(Error::NotProper(_))));
    assert!(matches!(
        symplectic_theta_pairing(0.0, &TestDensity::gaussian(1.0, 0.25)),
        Err(Error::NotProper(_))
    ));
    let x = check_proper(&[vec![1.0, 0.0], vec![0.5, 1.0]]).unwrap();
    assert!(x[0] > 0.0 && 0.5 * x[0] + x[1] > 0.0);
}

#[test]
fn localization_residual_decreases_with_truncation() {
    let case = catalog::plane_rotation_case();
    let lambda = case.one_form.as_ref().unwrap();
    let q = localization_density();
    let r10 = localization_residual(&case.action, lambda, &q, 10.0, &[1.0, 0.0]).unwrap();
    let r20 = localization_residual(&case.action, lambda, &q, 20.0, &[1.0, 0.0]).unwrap();
    assert!(r20 < r10 && r20 < 1e-3, "{r10} {r20}");
}

#[test]
fn localization_rejects_points_on_the_critical_set() {
    let case = catalog::plane_rotation_case();
    let lambda = case.one_form.as_ref().unwrap();
    let r = localization_residual(&case.action, lambda, &localization_density(), 10.0, &[1e-9, 0.0]);
    assert!(matches!(r, Err(Error::CriticalPoint(_))));
}

#[test]
fn decay_fit_recovers_power_law() {
    let series: Vec<(f64, f64)> = (0..12)
        .map(|k| 1.0 + k as f64)
        .map(|t| (t, 3.0 * t.powf(-4.5)))
        .collect();
    let fit = fit_decay_exponent(&series, (1.0, 12.0)).unwrap();
    assert!((fit.exponent + 4.5).abs() < 1e-12);
    assert!(fit.std_error < 1e-10);
}

#[test]
fn decay_fit_rejects_degenerate_windows() {
    let series: Vec<(f64, f64)> = (0..12).map(|k| (1.0 + k as f64, 1.0)).collect();
    assert!(matches!(
        fit_decay_exponent(&series, (1.0, 5.0)),
        Err(Error::DegenerateWindow(_))
    ));
    let mut zeros = series.clone();
    zeros[3].1 = 0.0;
    assert!(matches!(
        fit_decay_exponent(&zeros, (1.0, 12.0)),
        Err(Error::DegenerateWindow(_))
    ));
}

#[test]
fn density_combinations_are_linear() {
    let a = TestDensity::bump(0.2, 1.0);
    let b = TestDensity::gaussian(-0.4, 0.3);
    let ab = a.combine(2.0, &b, -0.5).unwrap();
    for x in [-1.0, -0.2, 0.0, 0.6] {
        assert!((ab.eval(&[x]) - 2.0 * a.eval(&[x]) + 0.5 * b.eval(&[x])).abs() < 1e-15);
    }
}
