//! Exterior algebra over at most eight real generators with complex coefficients.
//!
//! An element is stored densely: coefficient `k` multiplies the monomial whose
//! generators are the set bits of `k`, taken in ascending order.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

/// Largest supported number of generators.
pub const MAX_GENERATORS: usize = 8;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Sign of the permutation sorting the concatenation of the (disjoint) monomials
/// `a` then `b` into ascending order.
#[inline]
pub fn koszul_sign(a: usize, b: usize) -> f64 {
    let mut swaps = 0u32;
    let mut rest = b;
    while rest != 0 {
        let j = rest.trailing_zeros();
        swaps += (a >> (j + 1)).count_ones();
        rest &= rest - 1;
    }
    if swaps & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Exterior degree of a monomial.
#[inline]
pub fn degree(mask: usize) -> usize {
    mask.count_ones() as usize
}

/// Element of the exterior algebra Λ(dx_1, ..., dx_n) with complex coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct ExteriorElement {
    n: usize,
    coeffs: Vec<Complex64>,
}

impl ExteriorElement {
    /// The zero element on `n` generators.
    ///
    /// # Panics
    /// Panics if `n > MAX_GENERATORS`; use [`ExteriorElement::try_zero`] to get an error instead.
    pub fn zero(n: usize) -> Self {
        Self::try_zero(n).expect("too many generators")
    }

    /// The zero element on `n` generators, or an error when `n` is too large.
    pub fn try_zero(n: usize) -> Result<Self> {
        if n > MAX_GENERATORS {
            return Err(Error::TooManyGenerators(n));
        }
        Ok(Self {
            n,
            coeffs: vec![ZERO; 1 << n],
        })
    }

    /// The constant `c`.
    pub fn scalar(n: usize, c: Complex64) -> Self {
        let mut e = Self::zero(n);
        e.coeffs[0] = c;
        e
    }

    /// The unit.
    pub fn one(n: usize) -> Self {
        Self::scalar(n, Complex64::new(1.0, 0.0))
    }

    /// The generator dx_i (zero-based index).
    pub fn generator(n: usize, i: usize) -> Self {
        assert!(i < n, "generator index {i} out of range for {n} generators");
        let mut e = Self::zero(n);
        e.coeffs[1 << i] = Complex64::new(1.0, 0.0);
        e
    }

    /// The one-form Σ v_i dx_i.
    pub fn one_form(v: &[Complex64]) -> Self {
        let mut e = Self::zero(v.len());
        for (i, c) in v.iter().enumerate() {
            e.coeffs[1 << i] = *c;
        }
        e
    }

    /// The one-form Σ v_i dx_i with real coefficients.
    pub fn real_one_form(v: &[f64]) -> Self {
        let mut e = Self::zero(v.len());
        for (i, c) in v.iter().enumerate() {
            e.coeffs[1 << i] = Complex64::new(*c, 0.0);
        }
        e
    }

    /// Builds an element from its dense coefficient vector of length 2^n.
    pub fn from_coeffs(n: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if n > MAX_GENERATORS {
            return Err(Error::TooManyGenerators(n));
        }
        if coeffs.len() != 1 << n {
            return Err(Error::DimensionMismatch(format!(
                "expected {} coefficients, got {}",
                1usize << n,
                coeffs.len()
            )));
        }
        Ok(Self { n, coeffs })
    }

    /// Number of generators.
    pub fn n_generators(&self) -> usize {
        self.n
    }

    /// Coefficient of the monomial `mask`.
    pub fn coeff(&self, mask: usize) -> Complex64 {
        self.coeffs[mask]
    }

    /// Mutable access to the coefficient of the monomial `mask`.
    pub fn coeff_mut(&mut self, mask: usize) -> &mut Complex64 {
        &mut self.coeffs[mask]
    }

    /// All coefficients, indexed by monomial bitmask.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// The degree-0 coefficient.
    pub fn scalar_part(&self) -> Complex64 {
        self.coeffs[0]
    }

    /// The homogeneous component of exterior degree `k`.
    pub fn degree_part(&self, k: usize) -> Self {
        let mut e = Self::zero(self.n);
        for (m, c) in self.coeffs.iter().enumerate() {
            if degree(m) == k {
                e.coeffs[m] = *c;
            }
        }
        e
    }

    /// The component of parity `p` (0 even, 1 odd).
    pub fn parity_part(&self, p: usize) -> Self {
        let mut e = Self::zero(self.n);
        for (m, c) in self.coeffs.iter().enumerate() {
            if degree(m) % 2 == p % 2 {
                e.coeffs[m] = *c;
            }
        }
        e
    }

    /// Coefficient of the top-degree monomial dx_1∧...∧dx_n.
    pub fn top_coeff(&self) -> Complex64 {
        self.coeffs[(1 << self.n) - 1]
    }

    /// True when every coefficient is exactly zero.
    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    /// Sum of the moduli of the coefficients.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    /// Largest modulus among the coefficients.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Multiplication by a complex scalar.
    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            n: self.n,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// Multiplication by a real scalar.
    pub fn scale_re(&self, s: f64) -> Self {
        Self {
            n: self.n,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: Complex64, other: &Self) {
        assert_eq!(self.n, other.n, "generator count mismatch");
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += s * b;
        }
    }

    /// Exterior (wedge) product `self ∧ other`.
    pub fn wedge(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "generator count mismatch");
        let mut out = Self::zero(self.n);
        for (a, ca) in self.coeffs.iter().enumerate() {
            if ca.re == 0.0 && ca.im == 0.0 {
                continue;
            }
            for (b, cb) in other.coeffs.iter().enumerate() {
                if a & b != 0 || (cb.re == 0.0 && cb.im == 0.0) {
                    continue;
                }
                out.coeffs[a | b] += ca * cb * koszul_sign(a, b);
            }
        }
        out
    }

    /// Checked wedge product returning an error on generator-count mismatch.
    pub fn try_wedge(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch(format!(
                "{} vs {} generators",
                self.n, other.n
            )));
        }
        Ok(self.wedge(other))
    }

    /// Interior product ι(v) with the tangent vector `v`.
    pub fn interior(&self, v: &[f64]) -> Self {
        assert_eq!(v.len(), self.n, "vector length must equal generator count");
        let mut out = Self::zero(self.n);
        for (m, c) in self.coeffs.iter().enumerate() {
            if c.re == 0.0 && c.im == 0.0 {
                continue;
            }
            let mut rest = m;
            while rest != 0 {
                let j = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                let below = (m & ((1 << j) - 1)).count_ones();
                let sign = if below.is_multiple_of(2) { 1.0 } else { -1.0 };
                out.coeffs[m & !(1 << j)] += c * (sign * v[j]);
            }
        }
        out
    }

    /// Exponential of the element.  Since the positive-degree part ω is
    /// nilpotent, e^{c+ω} = e^c Σ_{k≤n} ω^k / k! exactly.
    pub fn exp(&self) -> Self {
        let c = self.coeffs[0];
        let mut omega = self.clone();
        omega.coeffs[0] = ZERO;
        let mut sum = Self::one(self.n);
        let mut power = Self::one(self.n);
        for k in 1..=self.n {
            power = power.wedge(&omega).scale_re(1.0 / k as f64);
            if power.is_zero() {
                break;
            }
            sum += &power;
        }
        sum.scale(c.exp())
    }
}

impl Add for &ExteriorElement {
    type Output = ExteriorElement;
    fn add(self, rhs: &ExteriorElement) -> ExteriorElement {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Add for ExteriorElement {
    type Output = ExteriorElement;
    fn add(mut self, rhs: ExteriorElement) -> ExteriorElement {
        self += &rhs;
        self
    }
}

impl Sub for &ExteriorElement {
    type Output = ExteriorElement;
    fn sub(self, rhs: &ExteriorElement) -> ExteriorElement {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Sub for ExteriorElement {
    type Output = ExteriorElement;
    fn sub(mut self, rhs: ExteriorElement) -> ExteriorElement {
        self -= &rhs;
        self
    }
}

impl AddAssign<&ExteriorElement> for ExteriorElement {
    fn add_assign(&mut self, rhs: &ExteriorElement) {
        assert_eq!(self.n, rhs.n, "generator count mismatch");
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a += b;
        }
    }
}

impl SubAssign<&ExteriorElement> for ExteriorElement {
    fn sub_assign(&mut self, rhs: &ExteriorElement) {
        assert_eq!(self.n, rhs.n, "generator count mismatch");
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a -= b;
        }
    }
}

impl Neg for &ExteriorElement {
    type Output = ExteriorElement;
    fn neg(self) -> ExteriorElement {
        self.scale_re(-1.0)
    }
}

impl Mul for &ExteriorElement {
    type Output = ExteriorElement;
    fn mul(self, rhs: &ExteriorElement) -> ExteriorElement {
        self.wedge(rhs)
    }
}

impl Mul for ExteriorElement {
    type Output = ExteriorElement;
    fn mul(self, rhs: ExteriorElement) -> ExteriorElement {
        self.wedge(&rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn generators_anticommute() {
        let dx = ExteriorElement::generator(2, 0);
        let dy = ExteriorElement::generator(2, 1);
        assert_eq!((&dx * &dy).coeff(0b11), c(1.0));
        assert_eq!((&dy * &dx).coeff(0b11), c(-1.0));
        assert!((&dx * &dx).is_zero());
    }

    #[test]
    fn interior_of_two_form() {
        let dx = ExteriorElement::generator(2, 0);
        let dy = ExteriorElement::generator(2, 1);
        let w = &dx * &dy;
        let iv = w.interior(&[2.0, 3.0]);
        assert_eq!(iv.coeff(0b01), c(-3.0));
        assert_eq!(iv.coeff(0b10), c(2.0));
    }

    #[test]
    fn exp_of_nilpotent_two_form() {
        let dx = ExteriorElement::generator(2, 0);
        let dy = ExteriorElement::generator(2, 1);
        let a = &ExteriorElement::scalar(2, c(0.5)) + &(&dx * &dy);
        let e = a.exp();
        assert!((e.coeff(0) - c(0.5f64.exp())).norm() < 1e-15);
        assert!((e.coeff(3) - c(0.5f64.exp())).norm() < 1e-15);
    }
}
