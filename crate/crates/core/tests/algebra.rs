use equichern::expm::{exp_divided_difference, super_exponential_by_collocation};
use equichern::reference::{brute_force_product, dense_exponential, supertrace_by_definition};
use equichern::{super_exponential, supertrace, wedge_product, GradedMatrixForm, Parity};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_form(rng: &mut ChaCha8Rng, n: usize, p: usize, q: usize, scale: f64) -> GradedMatrixForm {
    let mut a = GradedMatrixForm::zeros(n, p, q);
    for v in a.raw_mut() {
        *v = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale;
    }
    a
}

fn rel_err(a: &GradedMatrixForm, b: &GradedMatrixForm) -> f64 {
    let diff = a - b;
    diff.max_abs() / b.max_abs().max(1e-300)
}

#[test]
fn engine_product_matches_monomial_expansion() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (n, p, q) in [(0, 1, 1), (2, 1, 1), (3, 2, 1), (4, 1, 2), (4, 3, 3)] {
        let a = random_form(&mut rng, n, p, q, 1.0);
        let b = random_form(&mut rng, n, p, q, 1.0);
        let fast = wedge_product(&a, &b).unwrap();
        let slow = brute_force_product(&a, &b);
        assert!(rel_err(&fast, &slow) < 1e-13, "n={n} p={p} q={q}");
    }
}

#[test]
fn product_rejects_mismatched_shapes() {
    let a = GradedMatrixForm::zeros(2, 1, 1);
    let b = GradedMatrixForm::zeros(3, 1, 1);
    assert!(wedge_product(&a, &b).is_err());
    let c2 = GradedMatrixForm::zeros(2, 2, 1);
    assert!(wedge_product(&a, &c2).is_err());
}

#[test]
fn supertrace_matches_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = random_form(&mut rng, 3, 2, 2, 1.0);
    let st = supertrace(&a);
    let by_def = supertrace_by_definition(&a);
    for (m, v) in by_def.iter().enumerate() {
        assert!((st.coeff(m) - v).norm() < 1e-14);
    }
}

#[test]
fn exponential_matches_dense_oracle_on_random_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..12 {
        let n = 1 + trial % 4;
        let p = 1 + trial % 3;
        let q = 1 + (trial / 2) % 3;
        let a = random_form(&mut rng, n, p, q, 1.5);
        let fast = super_exponential(&a).unwrap();
        let dense = dense_exponential(&a);
        let e = rel_err(&fast, &dense);
        assert!(e < 1e-9, "trial {trial}: relative error {e}");
    }
}

#[test]
fn exponential_handles_hermitian_and_diagonal_blocks() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut a = random_form(&mut rng, 3, 2, 2, 1.0);
    let mut m = DMatrix::<Complex64>::zeros(4, 4);
    for i in 0..4 {
        for j in 0..=i {
            let z = c(
                rng.gen_range(-3.0..3.0),
                if i == j { 0.0 } else { rng.gen_range(-3.0..3.0) },
            );
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    a.set_block(0, &(-m.clone())).unwrap();
    let e = rel_err(&super_exponential(&a).unwrap(), &dense_exponential(&a));
    assert!(e < 1e-9, "hermitian: {e}");

    let mut d = DMatrix::<Complex64>::zeros(4, 4);
    for i in 0..4 {
        d[(i, i)] = c(-(i as f64) * 5.0, 0.3 * i as f64);
    }
    a.set_block(0, &d).unwrap();
    let e = rel_err(&super_exponential(&a).unwrap(), &dense_exponential(&a));
    assert!(e < 1e-9, "diagonal: {e}");
}

#[test]
fn exponential_handles_defective_degree_zero_part() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut a = random_form(&mut rng, 3, 2, 1, 0.7);
    let mut j = DMatrix::<Complex64>::zeros(3, 3);
    j[(0, 0)] = c(-1.0, 0.0);
    j[(1, 1)] = c(-1.0, 0.0);
    j[(0, 1)] = c(1.0, 0.0);
    j[(2, 2)] = c(0.5, 0.0);
    a.set_block(0, &j).unwrap();
    let fast = super_exponential(&a).unwrap();
    let dense = dense_exponential(&a);
    assert!(rel_err(&fast, &dense) < 1e-9);
    let coll = super_exponential_by_collocation(&a).unwrap();
    assert!(rel_err(&coll, &dense) < 1e-9);
}

#[test]
fn exponential_of_pure_degree_zero_is_matrix_exponential() {
    let mut m = DMatrix::<Complex64>::zeros(2, 2);
    m[(0, 1)] = c(1.0, 0.0);
    m[(1, 0)] = c(-1.0, 0.0);
    let a = GradedMatrixForm::from_matrix(2, 1, 1, &m).unwrap();
    let e = super_exponential(&a).unwrap();
    let (s, co) = 1f64.sin_cos();
    assert!((e.get(0, 0, 0) - c(co, 0.0)).norm() < 1e-14);
    assert!((e.get(0, 0, 1) - c(s, 0.0)).norm() < 1e-14);
    assert!(e.positive_degree_part().max_abs() == 0.0);
}

#[test]
fn divided_differences_of_exp_match_closed_forms() {
    let a = c(0.3, 0.1);
    let b = c(-2.0, 0.5);
    let two = exp_divided_difference(&[a, b]);
    assert!((two - (a.exp() - b.exp()) / (a - b)).norm() < 1e-15);
    let triple = exp_divided_difference(&[a, a, a]);
    assert!((triple - a.exp() / 2.0).norm() < 1e-15);
}

#[test]
fn parity_classification() {
    let n = 2;
    let even = GradedMatrixForm::identity(n, 1, 1);
    assert_eq!(even.parity(), Parity::Even);
    let mut odd = GradedMatrixForm::zeros(n, 1, 1);
    odd.set(0, 0, 1, c(1.0, 0.0));
    assert_eq!(odd.parity(), Parity::Odd);
    assert_eq!(GradedMatrixForm::zeros(n, 1, 1).parity(), Parity::Zero);
    let sum = &even + &odd;
    assert_eq!(sum.parity(), Parity::Inhomogeneous);
}
