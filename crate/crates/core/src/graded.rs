//! Matrix-valued exterior forms End(E⁺⊕E⁻) ⊗ Λ with the super sign rule.
//!
//! An element is stored in tensor form Σ_J dx_J ⊗ W_J, with one complex
//! (p+q)×(p+q) block W_J per monomial J.  Basis vectors `0..p` span E⁺ and
//! `p..p+q` span E⁻.  Products follow
//! (dx_I ⊗ A)(dx_J ⊗ B) = (−1)^{|A||J|} dx_I∧dx_J ⊗ AB.

use crate::error::{Error, Result};
use crate::exterior::{degree, koszul_sign, ExteriorElement, MAX_GENERATORS};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::ops::{Add, AddAssign, Mul, Sub, SubAssign};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Total ℤ₂-degree of an element, recomputed from its coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Zero,
    Even,
    Odd,
    Inhomogeneous,
}

/// Element of End(E⁺⊕E⁻) ⊗ Λ(dx_1, ..., dx_n).
#[derive(Clone, Debug, PartialEq)]
pub struct GradedMatrixForm {
    n: usize,
    p: usize,
    q: usize,
    data: Vec<Complex64>,
}

impl GradedMatrixForm {
    /// The zero element.
    pub fn zeros(n: usize, p: usize, q: usize) -> Self {
        assert!(n <= MAX_GENERATORS, "too many generators");
        let d = p + q;
        Self {
            n,
            p,
            q,
            data: vec![ZERO; (1 << n) * d * d],
        }
    }

    /// The identity endomorphism (degree 0).
    pub fn identity(n: usize, p: usize, q: usize) -> Self {
        let mut e = Self::zeros(n, p, q);
        let d = p + q;
        for i in 0..d {
            e.data[i * d + i] = ONE;
        }
        e
    }

    /// The grading operator Γ = diag(1, −1) (degree 0).
    pub fn grading(n: usize, p: usize, q: usize) -> Self {
        let mut e = Self::zeros(n, p, q);
        let d = p + q;
        for i in 0..d {
            e.data[i * d + i] = if i < p { ONE } else { -ONE };
        }
        e
    }

    /// Degree-0 element with the given block matrix.
    pub fn from_matrix(n: usize, p: usize, q: usize, m: &DMatrix<Complex64>) -> Result<Self> {
        let mut e = Self::zeros(n, p, q);
        e.set_block(0, m)?;
        Ok(e)
    }

    /// α ⊗ Id for a scalar form α.
    pub fn from_scalar_form(alpha: &ExteriorElement, p: usize, q: usize) -> Self {
        let n = alpha.n_generators();
        let mut e = Self::zeros(n, p, q);
        let d = p + q;
        for (m, c) in alpha.coeffs().iter().enumerate() {
            for i in 0..d {
                e.data[m * d * d + i * d + i] = *c;
            }
        }
        e
    }

    /// α ⊗ W for a scalar form α and a block matrix W.
    pub fn from_form_and_matrix(alpha: &ExteriorElement, p: usize, q: usize, w: &DMatrix<Complex64>) -> Result<Self> {
        let d = p + q;
        if w.nrows() != d || w.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "block is {}x{}, expected {d}x{d}",
                w.nrows(),
                w.ncols()
            )));
        }
        let n = alpha.n_generators();
        let mut e = Self::zeros(n, p, q);
        for (m, c) in alpha.coeffs().iter().enumerate() {
            if *c == ZERO {
                continue;
            }
            for i in 0..d {
                for j in 0..d {
                    e.data[m * d * d + i * d + j] = c * w[(i, j)];
                }
            }
        }
        Ok(e)
    }

    /// Number of exterior generators.
    pub fn n_generators(&self) -> usize {
        self.n
    }

    /// Dimension of E⁺.
    pub fn dim_plus(&self) -> usize {
        self.p
    }

    /// Dimension of E⁻.
    pub fn dim_minus(&self) -> usize {
        self.q
    }

    /// Total fibre dimension p + q.
    pub fn dim(&self) -> usize {
        self.p + self.q
    }

    /// Raw storage, laid out as `[monomial][row][column]`.
    pub fn raw(&self) -> &[Complex64] {
        &self.data
    }

    /// Mutable raw storage, laid out as `[monomial][row][column]`.
    pub fn raw_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Block coefficient of the monomial `mask` at `(i, j)`.
    pub fn get(&self, mask: usize, i: usize, j: usize) -> Complex64 {
        let d = self.dim();
        self.data[mask * d * d + i * d + j]
    }

    /// Sets the block coefficient of the monomial `mask` at `(i, j)`.
    pub fn set(&mut self, mask: usize, i: usize, j: usize, v: Complex64) {
        let d = self.dim();
        self.data[mask * d * d + i * d + j] = v;
    }

    /// The block matrix W_J of the monomial `mask`.
    pub fn block(&self, mask: usize) -> DMatrix<Complex64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| self.data[mask * d * d + i * d + j])
    }

    /// Replaces the block matrix of the monomial `mask`.
    pub fn set_block(&mut self, mask: usize, m: &DMatrix<Complex64>) -> Result<()> {
        let d = self.dim();
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "block is {}x{}, expected {d}x{d}",
                m.nrows(),
                m.ncols()
            )));
        }
        for i in 0..d {
            for j in 0..d {
                self.data[mask * d * d + i * d + j] = m[(i, j)];
            }
        }
        Ok(())
    }

    /// The entry (i, j) as a scalar form Σ_J (W_J)_{ij} dx_J.
    pub fn entry(&self, i: usize, j: usize) -> ExteriorElement {
        let d = self.dim();
        let coeffs = (0..1usize << self.n)
            .map(|m| self.data[m * d * d + i * d + j])
            .collect();
        ExteriorElement::from_coeffs(self.n, coeffs).expect("consistent sizes")
    }

    /// The exterior-degree-0 block.
    pub fn degree_zero(&self) -> DMatrix<Complex64> {
        self.block(0)
    }

    /// The component of exterior degree `k`.
    pub fn degree_part(&self, k: usize) -> Self {
        let d2 = self.dim() * self.dim();
        let mut out = Self::zeros(self.n, self.p, self.q);
        for m in 0..1usize << self.n {
            if degree(m) == k {
                out.data[m * d2..(m + 1) * d2].copy_from_slice(&self.data[m * d2..(m + 1) * d2]);
            }
        }
        out
    }

    /// The part of strictly positive exterior degree.
    pub fn positive_degree_part(&self) -> Self {
        let d2 = self.dim() * self.dim();
        let mut out = self.clone();
        for v in &mut out.data[..d2] {
            *v = ZERO;
        }
        out
    }

    /// Whether the layouts of two elements agree.
    pub fn same_shape(&self, other: &Self) -> bool {
        self.n == other.n && self.p == other.p && self.q == other.q
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "(n={}, p={}, q={}) vs (n={}, p={}, q={})",
                self.n, self.p, self.q, other.n, other.p, other.q
            )))
        }
    }

    /// Multiplication by a complex scalar.
    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= s;
        }
        out
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: Complex64, other: &Self) {
        assert!(self.same_shape(other), "shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// ΓAΓ: flips the sign of the odd (off-diagonal) blocks.
    pub fn twisted(&self) -> Self {
        let d = self.dim();
        let p = self.p;
        let mut out = self.clone();
        for m in 0..1usize << self.n {
            for i in 0..d {
                for j in 0..d {
                    if (i < p) != (j < p) {
                        out.data[m * d * d + i * d + j] = -out.data[m * d * d + i * d + j];
                    }
                }
            }
        }
        out
    }

    /// Switches between tensor form and the matrix-of-forms form in which the
    /// product becomes ordinary matrix multiplication over Λ.  The map
    /// multiplies odd-degree coefficients in the E⁻ rows by −1 and is an involution.
    pub fn toggle_row_signs(&self) -> Self {
        let d = self.dim();
        let mut out = self.clone();
        for m in 0..1usize << self.n {
            if degree(m) % 2 == 1 {
                for i in self.p..d {
                    for j in 0..d {
                        out.data[m * d * d + i * d + j] = -out.data[m * d * d + i * d + j];
                    }
                }
            }
        }
        out
    }

    /// Product in End(E)⊗Λ with the super sign rule.
    pub fn wedge_product(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        let d = self.dim();
        let d2 = d * d;
        let size = 1usize << self.n;
        let twisted = self.twisted();
        let nonzero_a: Vec<bool> = (0..size)
            .map(|m| self.data[m * d2..(m + 1) * d2].iter().any(|c| *c != ZERO))
            .collect();
        let nonzero_b: Vec<bool> = (0..size)
            .map(|m| other.data[m * d2..(m + 1) * d2].iter().any(|c| *c != ZERO))
            .collect();
        let mut out = Self::zeros(self.n, self.p, self.q);
        for a in 0..size {
            if !nonzero_a[a] {
                continue;
            }
            for b in 0..size {
                if a & b != 0 || !nonzero_b[b] {
                    continue;
                }
                let sign = koszul_sign(a, b);
                let left = if degree(b) % 2 == 1 {
                    &twisted.data[a * d2..(a + 1) * d2]
                } else {
                    &self.data[a * d2..(a + 1) * d2]
                };
                let right = &other.data[b * d2..(b + 1) * d2];
                let target = &mut out.data[(a | b) * d2..((a | b) + 1) * d2];
                for i in 0..d {
                    for k in 0..d {
                        let l = left[i * d + k];
                        if l == ZERO {
                            continue;
                        }
                        let l = l * sign;
                        for j in 0..d {
                            target[i * d + j] += l * right[k * d + j];
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Super-commutator [a, b] = ab − (−1)^{|a||b|} ba for homogeneous elements.
    pub fn supercommutator(&self, other: &Self) -> Result<Self> {
        let pa = self.parity();
        let pb = other.parity();
        let ab = self.wedge_product(other)?;
        let ba = other.wedge_product(self)?;
        let sign = match (pa, pb) {
            (Parity::Odd, Parity::Odd) => 1.0,
            (Parity::Inhomogeneous, _) | (_, Parity::Inhomogeneous) => {
                return Err(Error::DimensionMismatch(
                    "super-commutator of inhomogeneous elements".into(),
                ))
            }
            _ => -1.0,
        };
        let mut out = ab;
        out.axpy(Complex64::new(sign, 0.0), &ba);
        Ok(out)
    }

    /// Supertrace Str = tr(W₊₊) − tr(W₋₋), coefficient-wise in Λ.
    pub fn supertrace(&self) -> ExteriorElement {
        let d = self.dim();
        let coeffs = (0..1usize << self.n)
            .map(|m| {
                let mut s = ZERO;
                for i in 0..d {
                    let v = self.data[m * d * d + i * d + i];
                    if i < self.p {
                        s += v;
                    } else {
                        s -= v;
                    }
                }
                s
            })
            .collect();
        ExteriorElement::from_coeffs(self.n, coeffs).expect("consistent sizes")
    }

    /// Σ over monomials of the operator norm of the block matrix.
    pub fn graded_norm(&self) -> f64 {
        let d2 = self.dim() * self.dim();
        (0..1usize << self.n)
            .filter(|m| self.data[m * d2..(m + 1) * d2].iter().any(|c| *c != ZERO))
            .map(|m| operator_norm(&self.block(m)))
            .sum()
    }

    /// Largest modulus among all stored coefficients.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Total ℤ₂ parity, recomputed from the coefficients with tolerance `tol`.
    pub fn parity_with_tol(&self, tol: f64) -> Parity {
        let d = self.dim();
        let mut even = false;
        let mut odd = false;
        for m in 0..1usize << self.n {
            for i in 0..d {
                for j in 0..d {
                    if self.data[m * d * d + i * d + j].norm() > tol {
                        let matrix_parity = usize::from((i < self.p) != (j < self.p));
                        if (matrix_parity + degree(m)).is_multiple_of(2) {
                            even = true;
                        } else {
                            odd = true;
                        }
                    }
                }
            }
        }
        match (even, odd) {
            (false, false) => Parity::Zero,
            (true, false) => Parity::Even,
            (false, true) => Parity::Odd,
            (true, true) => Parity::Inhomogeneous,
        }
    }

    /// Total ℤ₂ parity with an exact-zero test.
    pub fn parity(&self) -> Parity {
        self.parity_with_tol(0.0)
    }

    /// Interior product on the form factor: ι(v)(dx_J ⊗ W) = ι(v)dx_J ⊗ W.
    pub fn interior(&self, v: &[f64]) -> Self {
        assert_eq!(v.len(), self.n, "vector length must equal generator count");
        let d2 = self.dim() * self.dim();
        let mut out = Self::zeros(self.n, self.p, self.q);
        for m in 0..1usize << self.n {
            let mut rest = m;
            while rest != 0 {
                let j = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                if v[j] == 0.0 {
                    continue;
                }
                let below = (m & ((1 << j) - 1)).count_ones();
                let s = if below.is_multiple_of(2) { v[j] } else { -v[j] };
                let target = m & !(1 << j);
                for k in 0..d2 {
                    let val = self.data[m * d2 + k];
                    out.data[target * d2 + k] += val * s;
                }
            }
        }
        out
    }
}

/// Largest singular value of a complex matrix.
pub fn operator_norm(m: &DMatrix<Complex64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if m.nrows() == 1 || m.ncols() == 1 {
        return m.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    }
    m.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

impl Add for &GradedMatrixForm {
    type Output = GradedMatrixForm;
    fn add(self, rhs: &GradedMatrixForm) -> GradedMatrixForm {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for &GradedMatrixForm {
    type Output = GradedMatrixForm;
    fn sub(self, rhs: &GradedMatrixForm) -> GradedMatrixForm {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl AddAssign<&GradedMatrixForm> for GradedMatrixForm {
    fn add_assign(&mut self, rhs: &GradedMatrixForm) {
        assert!(self.same_shape(rhs), "shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&GradedMatrixForm> for GradedMatrixForm {
    fn sub_assign(&mut self, rhs: &GradedMatrixForm) {
        assert!(self.same_shape(rhs), "shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

impl Mul for &GradedMatrixForm {
    type Output = GradedMatrixForm;
    /// # Panics
    /// Panics on shape mismatch; use [`GradedMatrixForm::wedge_product`] for a checked product.
    fn mul(self, rhs: &GradedMatrixForm) -> GradedMatrixForm {
        self.wedge_product(rhs).expect("shape mismatch in product")
    }
}

/// Checked product of two graded matrix forms.
pub fn wedge_product(a: &GradedMatrixForm, b: &GradedMatrixForm) -> Result<GradedMatrixForm> {
    a.wedge_product(b)
}

/// Supertrace of a graded matrix form.
pub fn supertrace(a: &GradedMatrixForm) -> ExteriorElement {
    a.supertrace()
}

/// Submultiplicative norm Σ_J ‖W_J‖_op.
pub fn graded_norm(a: &GradedMatrixForm) -> f64 {
    a.graded_norm()
}
