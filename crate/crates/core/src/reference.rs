//! Independent reference evaluations used as oracles by the verification checks.
//!
//! Nothing here calls the engine code paths: products are expanded monomial by
//! monomial with explicitly sorted index lists, and exponentials go through the
//! dense left-multiplication matrix of the algebra End(E)⊗Λ.

use crate::graded::GradedMatrixForm;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Sign of the permutation that sorts `indices`, or 0 when an index repeats.
pub fn permutation_sign(indices: &[usize]) -> i32 {
    let mut v = indices.to_vec();
    let mut sign = 1;
    for i in 0..v.len() {
        for j in 0..v.len() - 1 - i {
            if v[j] == v[j + 1] {
                return 0;
            }
            if v[j] > v[j + 1] {
                v.swap(j, j + 1);
                sign = -sign;
            }
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        0
    } else {
        sign
    }
}

fn bits(mask: usize, n: usize) -> Vec<usize> {
    (0..n).filter(|i| mask & (1 << i) != 0).collect()
}

/// Product of two graded matrix forms expanded over all monomial pairs and all
/// matrix entries, with the sign (−1)^{(parity of the left entry)·|J|}.
pub fn brute_force_product(a: &GradedMatrixForm, b: &GradedMatrixForm) -> GradedMatrixForm {
    let n = a.n_generators();
    let p = a.dim_plus();
    let d = a.dim();
    let mut out = GradedMatrixForm::zeros(n, p, a.dim_minus());
    for ia in 0..1usize << n {
        for jb in 0..1usize << n {
            let mut idx = bits(ia, n);
            idx.extend(bits(jb, n));
            let s = permutation_sign(&idx);
            if s == 0 {
                continue;
            }
            let j_odd = bits(jb, n).len() % 2 == 1;
            for i in 0..d {
                for k in 0..d {
                    let x = a.get(ia, i, k);
                    if x == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    let entry_odd = (i < p) != (k < p);
                    let sign = if entry_odd && j_odd { -s } else { s } as f64;
                    for j in 0..d {
                        let y = b.get(jb, k, j);
                        let cur = out.get(ia | jb, i, j);
                        out.set(ia | jb, i, j, cur + x * y * sign);
                    }
                }
            }
        }
    }
    out
}

fn basis_element(n: usize, p: usize, q: usize, index: usize) -> GradedMatrixForm {
    let d = p + q;
    let mask = index / (d * d);
    let ij = index % (d * d);
    let mut e = GradedMatrixForm::zeros(n, p, q);
    e.set(mask, ij / d, ij % d, Complex64::new(1.0, 0.0));
    e
}

fn vectorize(a: &GradedMatrixForm) -> DVector<Complex64> {
    DVector::from_column_slice(a.raw())
}

/// Dense matrix of left multiplication x ↦ a·x on End(E)⊗Λ.
pub fn left_multiplication_matrix(a: &GradedMatrixForm) -> DMatrix<Complex64> {
    let (n, p, q) = (a.n_generators(), a.dim_plus(), a.dim_minus());
    let size = (1usize << n) * a.dim() * a.dim();
    let mut l = DMatrix::<Complex64>::zeros(size, size);
    for col in 0..size {
        let e = basis_element(n, p, q, col);
        let img = vectorize(&brute_force_product(a, &e));
        l.set_column(col, &img);
    }
    l
}

/// Exponential computed as exp(L_a) applied to the unit, with the dense
/// scaling-and-squaring matrix exponential.
pub fn dense_exponential(a: &GradedMatrixForm) -> GradedMatrixForm {
    let (n, p, q) = (a.n_generators(), a.dim_plus(), a.dim_minus());
    let l = left_multiplication_matrix(a);
    let e = l.exp();
    let one = vectorize(&GradedMatrixForm::identity(n, p, q));
    let v = e * one;
    let mut out = GradedMatrixForm::zeros(n, p, q);
    out.raw_mut().copy_from_slice(v.as_slice());
    out
}

/// Supertrace from the definition tr(W₊₊) − tr(W₋₋) per monomial.
pub fn supertrace_by_definition(a: &GradedMatrixForm) -> Vec<Complex64> {
    let d = a.dim();
    (0..1usize << a.n_generators())
        .map(|m| {
            (0..d)
                .map(|i| {
                    let v = a.get(m, i, i);
                    if i < a.dim_plus() {
                        v
                    } else {
                        -v
                    }
                })
                .sum()
        })
        .collect()
}
