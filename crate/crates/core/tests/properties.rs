use equichern::catalog::{atiyah_inequality_margin, atiyah_spec};
use equichern::generalized::{boundary_value_pv, BoundarySign, TestDensity};
use equichern::graded::operator_norm;
use equichern::verify::{random_form, random_homogeneous};
use equichern::{smallest_eigenvalue, super_exponential, HermitianPart};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn shape() -> impl Strategy<Value = (u64, usize, usize, usize)> {
    (any::<u64>(), 0usize..=3, 1usize..=2, 0usize..=2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn graded_norm_is_submultiplicative((seed, n, p, q) in shape()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_form(&mut rng, n, p, q, 2.0);
        let b = random_form(&mut rng, n, p, q, 0.5);
        let lhs = (&a * &b).graded_norm();
        prop_assert!(lhs <= a.graded_norm() * b.graded_norm() * (1.0 + 1e-12));
    }

    #[test]
    fn supertrace_is_graded_cyclic((seed, n, p, q) in shape(), pa in 0usize..2, pb in 0usize..2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_homogeneous(&mut rng, n, p, q, pa);
        let b = random_homogeneous(&mut rng, n, p, q, pb);
        let sign = if pa * pb == 1 { -1.0 } else { 1.0 };
        let diff = &(&a * &b).supertrace() - &(&b * &a).supertrace().scale_re(sign);
        prop_assert!(diff.max_abs() < 1e-12);
    }

    #[test]
    fn forms_without_degree_zero_part_are_nilpotent((seed, n, p, q) in shape()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = random_form(&mut rng, n, p, q, 1.0);
        w.set_block(0, &DMatrix::zeros(p + q, p + q)).unwrap();
        let mut power = w.clone();
        for _ in 0..n {
            power = &power * &w;
        }
        prop_assert_eq!(power.max_abs(), 0.0);
    }

    #[test]
    fn exponential_obeys_hermitian_bound((seed, n, p, q) in shape()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = p + q;
        let g = DMatrix::from_fn(d, d, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let r = (&g + g.adjoint()) * Complex64::new(1.0, 0.0);
        let s = DMatrix::from_fn(d, d, |_, _| Complex64::new(rng.gen_range(-0.5..0.5), 0.0));
        let mut t = random_form(&mut rng, n, p, q, 1.0);
        t.set_block(0, &DMatrix::zeros(d, d)).unwrap();
        let m_r = smallest_eigenvalue(&HermitianPart::new(r.clone()).unwrap());
        let mut a = t.clone();
        a.set_block(0, &(&s - &r)).unwrap();
        let lhs = super_exponential(&a).unwrap().graded_norm();
        let nt = t.graded_norm();
        let poly: f64 = (0..=n).scan(1.0, |term, k| {
            let out = *term;
            *term *= nt / (k + 1) as f64;
            Some(out)
        }).sum();
        let rhs = (-m_r).exp() * operator_norm(&s).exp() * poly;
        prop_assert!(lhs <= rhs * (1.0 + 1e-12), "{} > {}", lhs, rhs);
    }

    #[test]
    fn boundary_value_is_linear_in_the_density(a in -2.0f64..2.0, b in -2.0f64..2.0, c1 in -0.5f64..0.5) {
        let q1 = TestDensity::bump(c1, 1.0);
        let q2 = TestDensity::gaussian(0.3, 0.2);
        let mix = q1.combine(a, &q2, b).unwrap();
        let lhs = boundary_value_pv(&mix, BoundarySign::Plus).unwrap();
        let rhs = boundary_value_pv(&q1, BoundarySign::Plus).unwrap() * a
            + boundary_value_pv(&q2, BoundarySign::Plus).unwrap() * b;
        prop_assert!((lhs - rhs).norm() < 1e-10 * (1.0 + rhs.norm()));
    }

    #[test]
    fn seminorm_is_monotone_in_order(center in -1.0f64..1.0, width in 0.1f64..1.0, r in 0usize..4) {
        let q = TestDensity::gaussian(center, width);
        let k = [(-2.0, 2.0)];
        prop_assert!(q.seminorm(&k, r).unwrap() <= q.seminorm(&k, r + 1).unwrap());
    }

    #[test]
    fn atiyah_margin_is_nonnegative_outside_radius(dir in prop::array::uniform4(-1.0f64..1.0), r2 in 2.0f64..200.0) {
        let len: f64 = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assume!(len > 1e-3);
        let p: Vec<f64> = dir.iter().map(|x| x / len * r2.sqrt()).collect();
        prop_assert!(atiyah_inequality_margin(&p) >= -1e-12 * r2);
        let data = atiyah_spec(true, 1.0).point_data(&p).unwrap();
        let f2: f64 = data.moment_components().iter().map(|f| f * f).sum();
        prop_assert!(data.support_indicator() + f2 >= 0.5 * r2 * (1.0 - 1e-12));
    }
}
