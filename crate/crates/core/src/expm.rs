//! Exponential of matrix-valued exterior forms by the Volterra expansion.
//!
//! Writing a = M + ω with M the exterior-degree-0 block and ω nilpotent,
//!
//! e^{M+ω} = Σ_{k=0}^{n} ∫_{Δ_k} e^{s_0 M} ω e^{s_1 M} ω ⋯ ω e^{s_k M} ds,
//!
//! which stops at k = n because ω^{n+1} = 0.  In an eigenbasis of M each
//! simplex integral collapses to a divided difference of the exponential at
//! the eigenvalues visited along a path of matrix indices.  When M is not
//! safely diagonalisable the simplex integrals are evaluated by iterated
//! Gauss–Legendre collocation instead.

use crate::error::{Error, Result};
use crate::exterior::{degree, koszul_sign, ExteriorElement};
use crate::graded::GradedMatrixForm;
use crate::hermitian::hermitian_deviation;
use crate::quadrature::integration_matrix;
use nalgebra::{DMatrix, Schur, SymmetricEigen};
use num_complex::Complex64;
use std::collections::HashMap;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Largest admissible condition number of the eigenvector matrix before the
/// quadrature route is used.
pub const MAX_EIGENVECTOR_CONDITION: f64 = 1e8;

/// Divided difference exp[z_0, ..., z_k] of the exponential, accurate for
/// coalescing and for widely separated nodes.
pub fn exp_divided_difference(z: &[Complex64]) -> Complex64 {
    assert!(!z.is_empty(), "at least one node is required");
    let mut memo = HashMap::new();
    dd_subset(z, (1usize << z.len()) - 1, &mut memo)
}

fn dd_subset(z: &[Complex64], mask: usize, memo: &mut HashMap<usize, Complex64>) -> Complex64 {
    if let Some(v) = memo.get(&mask) {
        return *v;
    }
    let idx: Vec<usize> = (0..z.len()).filter(|i| mask & (1 << i) != 0).collect();
    let value = if idx.len() == 1 {
        z[idx[0]].exp()
    } else {
        let mean = idx.iter().map(|&i| z[i]).sum::<Complex64>() / idx.len() as f64;
        let spread = idx.iter().map(|&i| (z[i] - mean).norm()).fold(0.0, f64::max);
        if spread <= 1.0 {
            let w: Vec<Complex64> = idx.iter().map(|&i| z[i] - mean).collect();
            mean.exp() * taylor_divided_difference(&w)
        } else {
            let (mut a, mut b, mut best) = (idx[0], idx[1], -1.0);
            for (x, &i) in idx.iter().enumerate() {
                for &j in &idx[x + 1..] {
                    let dist = (z[i] - z[j]).norm();
                    if dist > best {
                        best = dist;
                        a = i;
                        b = j;
                    }
                }
            }
            let without_a = dd_subset(z, mask & !(1 << a), memo);
            let without_b = dd_subset(z, mask & !(1 << b), memo);
            (without_a - without_b) / (z[b] - z[a])
        }
    };
    memo.insert(mask, value);
    value
}

/// exp[w_0..w_k] = Σ_m h_m(w) / (m+k)! for nodes of modulus at most 1, where
/// h_m is the complete homogeneous symmetric polynomial of degree m.
fn taylor_divided_difference(w: &[Complex64]) -> Complex64 {
    let k = w.len() - 1;
    let mut inv_fact = 1.0;
    for j in 1..=k {
        inv_fact /= j as f64;
    }
    let mut h = vec![Complex64::new(1.0, 0.0); w.len()];
    let mut sum = Complex64::new(inv_fact, 0.0);
    for m in 1..40 {
        let mut prev = ZERO;
        for (i, wi) in w.iter().enumerate() {
            // h_m(w_0..w_i) = h_m(w_0..w_{i-1}) + w_i h_{m-1}(w_0..w_i)
            let v = prev + wi * h[i];
            h[i] = v;
            prev = v;
        }
        inv_fact /= (m + k) as f64;
        let term = h[k] * inv_fact;
        sum += term;
        if term.norm() < 1e-18 * sum.norm() && inv_fact < 1e-17 {
            break;
        }
    }
    sum
}

struct Eigenbasis {
    values: Vec<Complex64>,
    vectors: Option<(DMatrix<Complex64>, DMatrix<Complex64>)>,
}

fn eigenbasis(m: &DMatrix<Complex64>) -> Option<Eigenbasis> {
    let d = m.nrows();
    let scale = m.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let off_diagonal = (0..d)
        .flat_map(|i| (0..d).map(move |j| (i, j)))
        .filter(|(i, j)| i != j)
        .map(|(i, j)| m[(i, j)].norm())
        .fold(0.0, f64::max);
    if off_diagonal == 0.0 {
        return Some(Eigenbasis {
            values: (0..d).map(|i| m[(i, i)]).collect(),
            vectors: None,
        });
    }
    if hermitian_deviation(m) <= 1e-15 * scale {
        let sym = (m + m.adjoint()).scale(0.5);
        let eig = SymmetricEigen::try_new(sym, 1e-15, 10_000)?;
        let v = eig.eigenvectors;
        let vinv = v.adjoint();
        return Some(Eigenbasis {
            values: eig.eigenvalues.iter().map(|x| Complex64::new(*x, 0.0)).collect(),
            vectors: Some((v, vinv)),
        });
    }
    let schur = Schur::try_new(m.clone(), 1e-15, 10_000)?;
    let (qm, t) = schur.unpack();
    let values: Vec<Complex64> = (0..d).map(|i| t[(i, i)]).collect();
    let mut y = DMatrix::<Complex64>::zeros(d, d);
    let tiny = 1e-14 * scale.max(f64::MIN_POSITIVE);
    for k in 0..d {
        y[(k, k)] = Complex64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut num = ZERO;
            for j in i + 1..=k {
                num += t[(i, j)] * y[(j, k)];
            }
            let den = t[(i, i)] - t[(k, k)];
            if den.norm() <= tiny {
                if num.norm() <= tiny {
                    y[(i, k)] = ZERO;
                } else {
                    return None;
                }
            } else {
                y[(i, k)] = -num / den;
            }
        }
        let norm = (0..=k).map(|i| y[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        for i in 0..=k {
            y[(i, k)] /= norm;
        }
    }
    let v = &qm * &y;
    let vinv = v.clone().try_inverse()?;
    let cond = v.norm() * vinv.norm();
    if !cond.is_finite() || cond > MAX_EIGENVECTOR_CONDITION {
        return None;
    }
    Some(Eigenbasis {
        values,
        vectors: Some((v, vinv)),
    })
}

/// Product of matrices with exterior-form entries (no sign twist), stored in
/// the `[monomial][row][column]` layout.
fn matrix_of_forms_product(a: &[Complex64], b: &[Complex64], n: usize, d: usize) -> Vec<Complex64> {
    let d2 = d * d;
    let size = 1usize << n;
    let mut out = vec![ZERO; size * d2];
    for ma in 0..size {
        let blk_a = &a[ma * d2..(ma + 1) * d2];
        if blk_a.iter().all(|c| *c == ZERO) {
            continue;
        }
        for mb in 0..size {
            if ma & mb != 0 {
                continue;
            }
            let blk_b = &b[mb * d2..(mb + 1) * d2];
            if blk_b.iter().all(|c| *c == ZERO) {
                continue;
            }
            let s = koszul_sign(ma, mb);
            let target = &mut out[(ma | mb) * d2..((ma | mb) + 1) * d2];
            for i in 0..d {
                for k in 0..d {
                    let l = blk_a[i * d + k];
                    if l == ZERO {
                        continue;
                    }
                    let l = l * s;
                    for j in 0..d {
                        target[i * d + j] += l * blk_b[k * d + j];
                    }
                }
            }
        }
    }
    out
}

fn conjugate_blocks(
    data: &[Complex64],
    left: &DMatrix<Complex64>,
    right: &DMatrix<Complex64>,
    n: usize,
    d: usize,
) -> Vec<Complex64> {
    let d2 = d * d;
    let mut out = vec![ZERO; data.len()];
    for m in 0..1usize << n {
        let blk = &data[m * d2..(m + 1) * d2];
        if blk.iter().all(|c| *c == ZERO) {
            continue;
        }
        let w = DMatrix::from_fn(d, d, |i, j| blk[i * d + j]);
        let r = left * w * right;
        for i in 0..d {
            for j in 0..d {
                out[m * d2 + i * d + j] = r[(i, j)];
            }
        }
    }
    out
}

/// Exponential of a matrix-valued exterior form.
///
/// # Errors
/// Returns [`Error::EigenFailure`] when no eigen-decomposition converges and
/// the collocation route cannot be set up.
pub fn super_exponential(a: &GradedMatrixForm) -> Result<GradedMatrixForm> {
    let n = a.n_generators();
    let p = a.dim_plus();
    let q = a.dim_minus();
    let d = p + q;
    let d2 = d * d;
    if d == 0 {
        return Ok(GradedMatrixForm::zeros(n, p, q));
    }
    let m = a.degree_zero();
    if m.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::EigenFailure);
    }
    // Matrix-of-forms representation of the nilpotent part.
    let phi = a.toggle_row_signs();
    let mut omega: Vec<Complex64> = phi.raw().to_vec();
    for v in &mut omega[..d2] {
        *v = ZERO;
    }
    if d == 1 {
        let w = ExteriorElement::from_coeffs(n, omega).expect("consistent sizes");
        let e = w.exp().scale(m[(0, 0)].exp());
        let mut out = GradedMatrixForm::zeros(n, p, q);
        out.raw_mut().copy_from_slice(e.coeffs());
        return Ok(out.toggle_row_signs());
    }
    let result_phi = match eigenbasis(&m) {
        Some(basis) => {
            let omega_eig = match &basis.vectors {
                Some((v, vinv)) => conjugate_blocks(&omega, vinv, v, n, d),
                None => omega,
            };
            let summed = volterra_paths(&basis.values, &omega_eig, n, d);
            match &basis.vectors {
                Some((v, vinv)) => conjugate_blocks(&summed, v, vinv, n, d),
                None => summed,
            }
        }
        None => collocation_exponential(&m, &omega, n, d)?,
    };
    let mut out = GradedMatrixForm::zeros(n, p, q);
    out.raw_mut().copy_from_slice(&result_phi);
    Ok(out.toggle_row_signs())
}

/// Sums the Volterra series in an eigenbasis of the degree-0 block.
fn volterra_paths(values: &[Complex64], omega: &[Complex64], n: usize, d: usize) -> Vec<Complex64> {
    let d2 = d * d;
    let size = 1usize << n;
    // Entry (i, j) of the nilpotent part as an exterior element.
    let edges: Vec<Option<ExteriorElement>> = (0..d2)
        .map(|ij| {
            let coeffs: Vec<Complex64> = (0..size).map(|mk| omega[mk * d2 + ij]).collect();
            let e = ExteriorElement::from_coeffs(n, coeffs).expect("consistent sizes");
            if e.is_zero() {
                None
            } else {
                Some(e)
            }
        })
        .collect();
    let mut result: Vec<ExteriorElement> = vec![ExteriorElement::zero(n); d2];
    for i in 0..d {
        *result[i * d + i].coeff_mut(0) = values[i].exp();
    }
    let mut nodes = Vec::with_capacity(n + 1);
    for start in 0..d {
        nodes.clear();
        nodes.push(values[start]);
        walk(
            start,
            start,
            &ExteriorElement::one(n),
            &mut nodes,
            values,
            &edges,
            d,
            n,
            &mut result,
        );
    }
    let mut out = vec![ZERO; size * d2];
    for (ij, e) in result.iter().enumerate() {
        for (mk, c) in e.coeffs().iter().enumerate() {
            out[mk * d2 + ij] = *c;
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn walk(
    start: usize,
    current: usize,
    value: &ExteriorElement,
    nodes: &mut Vec<Complex64>,
    values: &[Complex64],
    edges: &[Option<ExteriorElement>],
    d: usize,
    n: usize,
    result: &mut [ExteriorElement],
) {
    if nodes.len() > n {
        return;
    }
    for next in 0..d {
        let Some(edge) = &edges[current * d + next] else {
            continue;
        };
        let v = value.wedge(edge);
        if v.is_zero() {
            continue;
        }
        nodes.push(values[next]);
        let dd = exp_divided_difference(nodes);
        result[start * d + next].axpy(dd, &v);
        walk(start, next, &v, nodes, values, edges, d, n, result);
        nodes.pop();
    }
}

/// Iterated Gauss–Legendre collocation for P_k(τ) = ∫_0^τ e^{(τ−s)M} ω P_{k−1}(s) ds,
/// with panels short enough that ‖M‖·width ≤ 1.
fn collocation_exponential(m: &DMatrix<Complex64>, omega: &[Complex64], n: usize, d: usize) -> Result<Vec<Complex64>> {
    const ORDER: usize = 12;
    let d2 = d * d;
    let size = 1usize << n;
    let norm = m.norm().max(1e-300);
    let panels = (norm.ceil() as usize).max(1);
    let h = 1.0 / panels as f64;
    let (x, _, s) = integration_matrix(ORDER);
    let total = panels * ORDER;
    // e^{(x_i h) M}, e^{−(x_i h) M} for local offsets, and e^{hM}.
    let exp_local: Vec<DMatrix<Complex64>> = x.iter().map(|xi| (m * Complex64::new(xi * h, 0.0)).exp()).collect();
    let exp_local_neg: Vec<DMatrix<Complex64>> = x.iter().map(|xi| (m * Complex64::new(-xi * h, 0.0)).exp()).collect();
    let exp_panel = (m * Complex64::new(h, 0.0)).exp();
    let exp_full = m.clone().exp();
    if exp_full.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::EigenFailure);
    }
    let as_form = |mat: &DMatrix<Complex64>| -> Vec<Complex64> {
        let mut v = vec![ZERO; size * d2];
        for i in 0..d {
            for j in 0..d {
                v[i * d + j] = mat[(i, j)];
            }
        }
        v
    };
    // P_0 at every node: e^{(a_p + x_i h) M}.
    let mut start_of_panel = DMatrix::<Complex64>::identity(d, d);
    let mut prev: Vec<Vec<Complex64>> = Vec::with_capacity(total);
    for _ in 0..panels {
        for e in &exp_local {
            prev.push(as_form(&(e * &start_of_panel)));
        }
        start_of_panel = &exp_panel * start_of_panel;
    }
    let mut result = as_form(&exp_full);
    let exp_local_f: Vec<Vec<Complex64>> = exp_local.iter().map(as_form).collect();
    let exp_local_neg_f: Vec<Vec<Complex64>> = exp_local_neg.iter().map(as_form).collect();
    let exp_panel_f = as_form(&exp_panel);
    for _level in 1..=n {
        let mut current: Vec<Vec<Complex64>> = Vec::with_capacity(total);
        let mut carry = vec![ZERO; size * d2];
        for p in 0..panels {
            // f(s) = e^{−(s−a_p)M} ω P_{k−1}(s) at the panel nodes.
            let f: Vec<Vec<Complex64>> = (0..ORDER)
                .map(|i| {
                    let inner = matrix_of_forms_product(omega, &prev[p * ORDER + i], n, d);
                    matrix_of_forms_product(&exp_local_neg_f[i], &inner, n, d)
                })
                .collect();
            for i in 0..ORDER {
                let mut g = vec![ZERO; size * d2];
                for (j, fj) in f.iter().enumerate() {
                    let c = s[i * ORDER + j] * h;
                    for (gv, fv) in g.iter_mut().zip(fj) {
                        *gv += fv * c;
                    }
                }
                let mut local = matrix_of_forms_product(&exp_local_f[i], &g, n, d);
                let propagated = matrix_of_forms_product(&exp_local_f[i], &carry, n, d);
                for (lv, pv) in local.iter_mut().zip(&propagated) {
                    *lv += pv;
                }
                current.push(local);
            }
            // Value at the panel end: e^{hM} carry + ∫_{a_p}^{a_p+h} e^{(a_p+h−s)M} f̃(s) ds.
            let mut end_integral = vec![ZERO; size * d2];
            let (_, wts, _) = integration_matrix(ORDER);
            for (j, fj) in f.iter().enumerate() {
                for (ev, fv) in end_integral.iter_mut().zip(fj) {
                    *ev += fv * (wts[j] * h);
                }
            }
            let mut next_carry = matrix_of_forms_product(&exp_panel_f, &end_integral, n, d);
            let propagated = matrix_of_forms_product(&exp_panel_f, &carry, n, d);
            for (cv, pv) in next_carry.iter_mut().zip(&propagated) {
                *cv += pv;
            }
            carry = next_carry;
        }
        for (r, c) in result.iter_mut().zip(&carry) {
            *r += c;
        }
        if carry.iter().all(|c| *c == ZERO) {
            break;
        }
        prev = current;
    }
    Ok(result)
}

/// Exponential through the collocation route regardless of diagonalisability.
/// Exposed for cross-checking the two evaluation strategies.
pub fn super_exponential_by_collocation(a: &GradedMatrixForm) -> Result<GradedMatrixForm> {
    let n = a.n_generators();
    let (p, q) = (a.dim_plus(), a.dim_minus());
    let d = p + q;
    let phi = a.toggle_row_signs();
    let mut omega: Vec<Complex64> = phi.raw().to_vec();
    for v in &mut omega[..d * d] {
        *v = ZERO;
    }
    let res = collocation_exponential(&a.degree_zero(), &omega, n, d)?;
    let mut out = GradedMatrixForm::zeros(n, p, q);
    out.raw_mut().copy_from_slice(&res);
    Ok(out.toggle_row_signs())
}

/// Minimal exterior degree present in the nilpotent part (used by tests).
pub fn min_positive_degree(a: &GradedMatrixForm) -> Option<usize> {
    let d2 = a.dim() * a.dim();
    (1..1usize << a.n_generators())
        .filter(|m| a.raw()[m * d2..(m + 1) * d2].iter().any(|c| *c != ZERO))
        .map(degree)
        .min()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn divided_difference_two_nodes() {
        let z = [c(0.3, 0.1), c(-2.5, 0.7)];
        let expect = (z[1].exp() - z[0].exp()) / (z[1] - z[0]);
        assert!((exp_divided_difference(&z) - expect).norm() < 1e-15);
    }

    #[test]
    fn divided_difference_confluent() {
        let z = [c(0.2, 0.0); 4];
        let expect = c(0.2f64.exp() / 6.0, 0.0);
        assert!((exp_divided_difference(&z) - expect).norm() < 1e-15);
    }

    #[test]
    fn divided_difference_far_apart() {
        let z = [c(0.0, 0.0), c(-1600.0, 0.0), c(0.0, 0.0)];
        // exp[0, 0, a] = (g(a) − 1)/a with g(a) = (e^a − 1)/a.
        let a = -1600.0f64;
        let g = (a.exp() - 1.0) / a;
        let expect = (g - 1.0) / a;
        assert!((exp_divided_difference(&z).re - expect).abs() < 1e-18);
    }
}
