//! Hermitian degree-0 blocks and their smallest eigenvalue.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

/// Tolerance used to accept a matrix as Hermitian, relative to its size.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// A Hermitian endomorphism of E⁺⊕E⁻ together with its smallest eigenvalue.
#[derive(Clone, Debug)]
pub struct HermitianPart {
    matrix: DMatrix<Complex64>,
    m_r: f64,
}

impl HermitianPart {
    /// Validates Hermitian symmetry and computes m(R).
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        let dev = hermitian_deviation(&matrix);
        let scale = 1.0 + matrix.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if dev > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian(dev));
        }
        let m_r = min_eigenvalue(&matrix);
        Ok(Self { matrix, m_r })
    }

    /// The Hermitian matrix.
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// Its smallest eigenvalue m(R).
    pub fn m_r(&self) -> f64 {
        self.m_r
    }
}

/// Largest modulus of M − M^H.
pub fn hermitian_deviation(m: &DMatrix<Complex64>) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    let mut dev: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

fn min_eigenvalue(m: &DMatrix<Complex64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    let sym = (m + m.adjoint()).scale(0.5);
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// m(R): the smallest eigenvalue, so that ‖e^{−R}‖_op = e^{−m(R)}.
pub fn smallest_eigenvalue(r: &HermitianPart) -> f64 {
    r.m_r()
}
