use equichern::catalog::{
    atiyah_case, atiyah_chern_closed_form, atiyah_exp_curvature, atiyah_g, atiyah_point_from_z, atiyah_spec, atiyah_z,
    case_by_name, CASE_NAMES,
};
use equichern::chern::{
    assemble_curvature, beta_truncated, chern_form, closedness_residual, transgression_identity_residual,
};
use equichern::super_exponential;
use num_complex::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn g_function_matches_definition_and_series() {
    for z in [c(1.0, 0.0), c(-0.3, 2.0), c(0.5, -0.5)] {
        let direct = (z.exp() - 1.0) / z;
        assert!((atiyah_g(z) - direct).norm() < 1e-14);
    }
    for z in [c(1e-9, 0.0), c(0.0, -3e-8)] {
        assert!((atiyah_g(z) - (1.0 + z / 2.0)).norm() < 1e-15);
    }
}

#[test]
fn atiyah_exponential_matches_closed_form_entrywise() {
    let spec = atiyah_spec(false, 1.0);
    let z1 = c(0.8, -0.4);
    let p = atiyah_point_from_z(z1, c(-0.2, 0.6));
    assert!((atiyah_z(&p).0 - z1).norm() < 1e-15);
    let e = super_exponential(&assemble_curvature(&spec, 1.3, &[0.9], &p).unwrap()).unwrap();
    let oracle = atiyah_exp_curvature(1.3, 0.9, z1);
    for (i, row) in oracle.iter().enumerate() {
        for (j, entry) in row.iter().enumerate() {
            assert!((&e.entry(i, j) - entry).max_abs() < 1e-12, "entry ({i}, {j})");
        }
    }
}

#[test]
fn atiyah_chern_form_matches_closed_form_at_t_one() {
    let case = atiyah_case(1.0);
    let p = atiyah_point_from_z(c(0.5, 0.2), c(0.1, -0.3));
    for th in [0.3, -1.1] {
        let ch = chern_form(&case.spec, 1.0, &[th], &p).unwrap();
        assert!((&ch - &atiyah_chern_closed_form(th, &p)).max_abs() < 1e-12);
    }
}

#[test]
fn chern_forms_are_equivariantly_closed() {
    for name in CASE_NAMES {
        let case = case_by_name(name).unwrap();
        let p = &case.sample_points[0];
        let r = closedness_residual(&case.spec, 0.5, &case.sample_x[0], p).unwrap();
        assert!(r < 1e-7, "{name}: {r}");
    }
}

#[test]
fn reversed_fibre_weight_breaks_closedness() {
    let case = atiyah_case(-1.0);
    let r = closedness_residual(&case.spec, 0.5, &case.sample_x[0], &case.sample_points[0]).unwrap();
    assert!(r > 1e-3);
}

#[test]
fn transgression_identity_holds_on_every_case() {
    for name in CASE_NAMES {
        let case = case_by_name(name).unwrap();
        let r =
            transgression_identity_residual(&case.spec, 0.5, &case.sample_x[0], &case.sample_points[0], 1e-4).unwrap();
        assert!(r < 1e-6, "{name}: {r}");
    }
}

#[test]
fn beta_reports_a_tail_bound_off_the_critical_set() {
    let case = case_by_name("plane_rotation").unwrap();
    let b = beta_truncated(&case.spec, 20.0, &[0.7], &[1.0, 0.5]).unwrap();
    assert!(b.quadrature_error < 1e-8);
    assert!(b.tail_bound.is_none_or(|t| t.is_finite()));
}
