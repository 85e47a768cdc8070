//! Superconnection curvature, equivariant Chern and transgression forms.
//!
//! For a symbol σ: E⁺ → E⁻, an invariant one-form λ and a connection A = d + ω
//! on a trivialized bundle, the curvature of A + it(v_σ + λ) is
//!
//! ```text
//! F(t, X) = −t² v_σ² − it f_λ(X) + μ(X) + it [A, v_σ] + A² + it dλ
//! ```
//!
//! with Chern form Ch = Str e^F and transgression η = −i Str((v_σ + λ) e^F),
//! so that d/dt Ch = −D η.  All quantities are evaluated at a chart point.

use crate::calculus::{
    equivariant_differential_of, exterior_derivative_from_partials, partial_derivatives, ChartedAction, FormField,
    InvariantOneForm, PointFn,
};
use crate::error::{Error, Result};
use crate::expm::super_exponential;
use crate::exterior::ExteriorElement;
use crate::graded::{operator_norm, GradedMatrixForm};
use crate::quadrature::{adaptive_gk, PanelRule};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::sync::Arc;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// A morphism σ(p): E⁺ → E⁻ together with Hermitian structures on E±.
#[derive(Clone)]
pub struct SymbolMorphism {
    p: usize,
    q: usize,
    eval: PointFn<DMatrix<Complex64>>,
    partials: Option<PointFn<Vec<DMatrix<Complex64>>>>,
    h_plus: DMatrix<Complex64>,
    h_minus: DMatrix<Complex64>,
}

impl SymbolMorphism {
    /// σ given as a q×p matrix-valued function, with standard inner products.
    pub fn new(p: usize, q: usize, eval: impl Fn(&[f64]) -> DMatrix<Complex64> + Send + Sync + 'static) -> Self {
        Self {
            p,
            q,
            eval: Arc::new(eval),
            partials: None,
            h_plus: DMatrix::identity(p, p),
            h_minus: DMatrix::identity(q, q),
        }
    }

    /// The zero symbol [0].
    pub fn zero(p: usize, q: usize) -> Self {
        Self::new(p, q, move |_| DMatrix::zeros(q, p)).with_partials(move |pt| vec![DMatrix::zeros(q, p); pt.len()])
    }

    /// A scalar symbol between line bundles.
    pub fn scalar(f: impl Fn(&[f64]) -> Complex64 + Send + Sync + 'static) -> Self {
        Self::new(1, 1, move |pt| DMatrix::from_element(1, 1, f(pt)))
    }

    /// Supplies ∂_i σ(p).
    pub fn with_partials(
        mut self,
        partials: impl Fn(&[f64]) -> Vec<DMatrix<Complex64>> + Send + Sync + 'static,
    ) -> Self {
        self.partials = Some(Arc::new(partials));
        self
    }

    /// Replaces the Hermitian structures, which must be positive definite.
    pub fn with_hermitian(mut self, h_plus: DMatrix<Complex64>, h_minus: DMatrix<Complex64>) -> Result<Self> {
        for (h, dim, name) in [(&h_plus, self.p, "E⁺"), (&h_minus, self.q, "E⁻")] {
            if h.nrows() != dim || h.ncols() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "Hermitian structure on {name} has wrong shape"
                )));
            }
            let dev = crate::hermitian::hermitian_deviation(h);
            if dev > crate::hermitian::HERMITIAN_TOL {
                return Err(Error::NotHermitian(dev));
            }
            if dim > 0 && h.clone().cholesky().is_none() {
                return Err(Error::AssumptionFailed(format!(
                    "Hermitian structure on {name} is not positive definite"
                )));
            }
        }
        self.h_plus = h_plus;
        self.h_minus = h_minus;
        Ok(self)
    }

    /// Rank of E⁺.
    pub fn dim_plus(&self) -> usize {
        self.p
    }

    /// Rank of E⁻.
    pub fn dim_minus(&self) -> usize {
        self.q
    }

    /// σ(p), checked to be q×p.
    pub fn value(&self, pt: &[f64]) -> Result<DMatrix<Complex64>> {
        let s = (self.eval)(pt);
        if s.nrows() != self.q || s.ncols() != self.p {
            return Err(Error::DimensionMismatch(format!(
                "symbol is {}x{}, expected {}x{}",
                s.nrows(),
                s.ncols(),
                self.q,
                self.p
            )));
        }
        Ok(s)
    }

    fn adjoint_of(&self, s: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let inv = self
            .h_plus
            .clone()
            .try_inverse()
            .unwrap_or_else(|| DMatrix::identity(self.p, self.p));
        inv * s.adjoint() * &self.h_minus
    }

    fn v_from(&self, s: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let d = self.p + self.q;
        let mut v = DMatrix::zeros(d, d);
        if self.p > 0 && self.q > 0 {
            v.view_mut((self.p, 0), (self.q, self.p)).copy_from(s);
            v.view_mut((0, self.p), (self.p, self.q)).copy_from(&self.adjoint_of(s));
        }
        v
    }

    /// v_σ(p) = [[0, σ*], [σ, 0]].
    pub fn v_matrix(&self, pt: &[f64]) -> Result<DMatrix<Complex64>> {
        Ok(self.v_from(&self.value(pt)?))
    }

    /// ∂_i v_σ(p), analytic when σ has partials.
    pub fn v_partials(&self, action: &ChartedAction, pt: &[f64]) -> Result<Vec<DMatrix<Complex64>>> {
        match &self.partials {
            Some(d) => Ok(d(pt).iter().map(|s| self.v_from(s)).collect()),
            None => partial_derivatives(&|q| self.v_matrix(q), pt, &|q| action.contains(q)),
        }
    }

    /// h_σ(p): the smallest eigenvalue of v_σ².
    pub fn support_indicator(&self, pt: &[f64]) -> Result<f64> {
        let s = self.value(pt)?;
        let mut h = f64::INFINITY;
        if self.p > 0 {
            let l = self
                .h_plus
                .clone()
                .cholesky()
                .map(|c| c.l())
                .unwrap_or_else(|| DMatrix::identity(self.p, self.p));
            let linv = l
                .clone()
                .try_inverse()
                .unwrap_or_else(|| DMatrix::identity(self.p, self.p));
            let m = &linv * s.adjoint() * &self.h_minus * &s * linv.adjoint();
            h = h.min(crate::hermitian::HermitianPart::new((&m + m.adjoint()).scale(0.5))?.m_r());
        }
        if self.q > 0 {
            let l = self
                .h_minus
                .clone()
                .cholesky()
                .map(|c| c.l())
                .unwrap_or_else(|| DMatrix::identity(self.q, self.q));
            let hinv = self
                .h_plus
                .clone()
                .try_inverse()
                .unwrap_or_else(|| DMatrix::identity(self.p, self.p));
            let m = l.adjoint() * &s * hinv * s.adjoint() * &l;
            h = h.min(crate::hermitian::HermitianPart::new((&m + m.adjoint()).scale(0.5))?.m_r());
        }
        Ok(if h.is_finite() { h.max(0.0) } else { 0.0 })
    }
}

/// v_σ at a point as an element of End(E)⊗Λ with `n` generators.
pub fn assemble_v_sigma(sigma: &SymbolMorphism, n: usize, pt: &[f64]) -> Result<GradedMatrixForm> {
    GradedMatrixForm::from_matrix(n, sigma.p, sigma.q, &sigma.v_matrix(pt)?)
}

/// Index bookkeeping for the graded tensor product E₁ ⊗ E₂.
///
/// The even part is ordered E₁⁺E₂⁺ then E₁⁻E₂⁻, the odd part E₁⁻E₂⁺ then E₁⁺E₂⁻.
#[derive(Clone, Debug)]
pub struct TensorLayout {
    p1: usize,
    q1: usize,
    p2: usize,
    q2: usize,
    order: Vec<(usize, usize)>,
}

impl TensorLayout {
    /// Layout for ranks (p₁, q₁) and (p₂, q₂).
    pub fn new(p1: usize, q1: usize, p2: usize, q2: usize) -> Self {
        let mut order = Vec::new();
        for a in 0..p1 {
            for b in 0..p2 {
                order.push((a, b));
            }
        }
        for a in p1..p1 + q1 {
            for b in p2..p2 + q2 {
                order.push((a, b));
            }
        }
        for a in p1..p1 + q1 {
            for b in 0..p2 {
                order.push((a, b));
            }
        }
        for a in 0..p1 {
            for b in p2..p2 + q2 {
                order.push((a, b));
            }
        }
        Self { p1, q1, p2, q2, order }
    }

    /// Rank of the even part.
    pub fn dim_plus(&self) -> usize {
        self.p1 * self.p2 + self.q1 * self.q2
    }

    /// Rank of the odd part.
    pub fn dim_minus(&self) -> usize {
        self.q1 * self.p2 + self.p1 * self.q2
    }

    /// Basis vector (a, b) of E₁⊗E₂ at each position.
    pub fn order(&self) -> &[(usize, usize)] {
        &self.order
    }

    /// A ⊗ 1.
    pub fn embed_first(&self, a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let d = self.order.len();
        DMatrix::from_fn(d, d, |r, c| {
            let (a1, b1) = self.order[r];
            let (a2, b2) = self.order[c];
            if b1 == b2 {
                a[(a1, a2)]
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    /// Γ₁^{|B|} ⊗ B, splitting B into its even and odd parts.
    pub fn embed_second(&self, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let d = self.order.len();
        let (p1, p2) = (self.p1, self.p2);
        DMatrix::from_fn(d, d, |r, c| {
            let (a1, b1) = self.order[r];
            let (a2, b2) = self.order[c];
            if a1 != a2 {
                return Complex64::new(0.0, 0.0);
            }
            let odd_entry = (b1 < p2) != (b2 < p2);
            if odd_entry && a1 >= p1 {
                -b[(b1, b2)]
            } else {
                b[(b1, b2)]
            }
        })
    }

    /// ι₁ on End(E₁)⊗Λ, blockwise.
    pub fn embed_first_form(&self, a: &GradedMatrixForm) -> GradedMatrixForm {
        self.embed_form(a, true)
    }

    /// ι₂ on End(E₂)⊗Λ, blockwise.
    pub fn embed_second_form(&self, b: &GradedMatrixForm) -> GradedMatrixForm {
        self.embed_form(b, false)
    }

    fn embed_form(&self, a: &GradedMatrixForm, first: bool) -> GradedMatrixForm {
        let n = a.n_generators();
        let mut out = GradedMatrixForm::zeros(n, self.dim_plus(), self.dim_minus());
        for m in 0..1usize << n {
            let blk = a.block(m);
            if blk.iter().all(|c| *c == Complex64::new(0.0, 0.0)) {
                continue;
            }
            let e = if first {
                self.embed_first(&blk)
            } else {
                self.embed_second(&blk)
            };
            out.set_block(m, &e).expect("layout dimensions");
        }
        out
    }

    /// The odd ← even block of a matrix in this layout.
    pub fn odd_even_block(&self, v: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let (p, q) = (self.dim_plus(), self.dim_minus());
        v.view((p, 0), (q, p)).into_owned()
    }

    /// Block-diagonal Hermitian structure H₁ ⊗ H₂ restricted to one parity.
    fn tensor_hermitian(&self, h1: &DMatrix<Complex64>, h2: &DMatrix<Complex64>, even: bool) -> DMatrix<Complex64> {
        let p = self.dim_plus();
        let range: Vec<usize> = if even {
            (0..p).collect()
        } else {
            (p..self.order.len()).collect()
        };
        DMatrix::from_fn(range.len(), range.len(), |r, c| {
            let (a1, b1) = self.order[range[r]];
            let (a2, b2) = self.order[range[c]];
            h1[(a1, a2)] * h2[(b1, b2)]
        })
    }
}

fn full_hermitian(s: &SymbolMorphism) -> DMatrix<Complex64> {
    let d = s.p + s.q;
    let mut h = DMatrix::zeros(d, d);
    h.view_mut((0, 0), (s.p, s.p)).copy_from(&s.h_plus);
    h.view_mut((s.p, s.p), (s.q, s.q)).copy_from(&s.h_minus);
    h
}

/// The product symbol σ₁ ⊙ σ₂ with v = v₁ ⊗ 1 + Γ₁ ⊗ v₂, so that
/// v² = v₁² ⊗ 1 + 1 ⊗ v₂².
pub fn odot_product(s1: &SymbolMorphism, s2: &SymbolMorphism) -> Result<SymbolMorphism> {
    let layout = TensorLayout::new(s1.p, s1.q, s2.p, s2.q);
    let (a, b) = (s1.clone(), s2.clone());
    let lay = layout.clone();
    let eval = move |pt: &[f64]| -> DMatrix<Complex64> {
        let v1 = a.v_matrix(pt).expect("first symbol shape");
        let v2 = b.v_matrix(pt).expect("second symbol shape");
        lay.odd_even_block(&(lay.embed_first(&v1) + lay.embed_second(&v2)))
    };
    let mut out = SymbolMorphism::new(layout.dim_plus(), layout.dim_minus(), eval);
    if let (Some(d1), Some(d2)) = (s1.partials.clone(), s2.partials.clone()) {
        let (a, b) = (s1.clone(), s2.clone());
        let lay = layout.clone();
        out = out.with_partials(move |pt| {
            d1(pt)
                .iter()
                .zip(d2(pt).iter())
                .map(|(x, y)| lay.odd_even_block(&(lay.embed_first(&a.v_from(x)) + lay.embed_second(&b.v_from(y)))))
                .collect()
        });
    }
    let h1 = full_hermitian(s1);
    let h2 = full_hermitian(s2);
    out.with_hermitian(
        layout.tensor_hermitian(&h1, &h2, true),
        layout.tensor_hermitian(&h1, &h2, false),
    )
}

/// Data determining the superconnection A + it(v_σ + λ) on a trivialized bundle.
#[derive(Clone)]
pub struct SuperconnectionSpec {
    action: ChartedAction,
    p: usize,
    q: usize,
    connection: Option<FormField<GradedMatrixForm>>,
    symbol: Option<SymbolMorphism>,
    one_form: Option<InvariantOneForm>,
    moment: Option<PointFn<Vec<GradedMatrixForm>>>,
}

impl SuperconnectionSpec {
    /// The trivial connection d on the trivial bundle of ranks (p, q).
    pub fn new(action: ChartedAction, p: usize, q: usize) -> Self {
        Self {
            action,
            p,
            q,
            connection: None,
            symbol: None,
            one_form: None,
            moment: None,
        }
    }

    /// Sets the symbol σ.
    pub fn with_symbol(mut self, sigma: SymbolMorphism) -> Result<Self> {
        if sigma.p != self.p || sigma.q != self.q {
            return Err(Error::DimensionMismatch(format!(
                "symbol between ranks ({}, {}) on a bundle of ranks ({}, {})",
                sigma.p, sigma.q, self.p, self.q
            )));
        }
        self.symbol = Some(sigma);
        Ok(self)
    }

    /// Sets the connection coefficients ω = A − d, which must have no
    /// exterior-degree-0 part.
    pub fn with_connection(mut self, omega: FormField<GradedMatrixForm>) -> Self {
        self.connection = Some(omega);
        self
    }

    /// Sets the invariant one-form λ.
    pub fn with_one_form(mut self, lambda: InvariantOneForm) -> Self {
        self.one_form = Some(lambda);
        self
    }

    /// Sets μ(X) = Σ_k X_k μ_k(p) from its values on the Lie algebra basis.
    pub fn with_moment(mut self, basis: impl Fn(&[f64]) -> Vec<GradedMatrixForm> + Send + Sync + 'static) -> Self {
        self.moment = Some(Arc::new(basis));
        self
    }

    /// Sets μ from constant infinitesimal fibre actions ρ_k, corrected by the
    /// connection: μ_k(p) = ρ_k − ι(V_k)ω(p).
    pub fn with_fibre_action(self, rho: Vec<DMatrix<Complex64>>) -> Self {
        let action = self.action.clone();
        let conn = self.connection.clone();
        let (p, q) = (self.p, self.q);
        self.with_moment(move |pt| {
            let n = action.chart_dim();
            let fields = action.generator_fields(pt);
            rho.iter()
                .zip(fields)
                .map(|(r, vk)| {
                    let mut m = GradedMatrixForm::from_matrix(n, p, q, r).expect("fibre action shape");
                    if let Some(c) = &conn {
                        m -= &c.eval(pt, &[]).interior(&vk).degree_part(0);
                    }
                    m
                })
                .collect()
        })
    }

    /// The charted action.
    pub fn action(&self) -> &ChartedAction {
        &self.action
    }

    /// Ranks (p, q).
    pub fn ranks(&self) -> (usize, usize) {
        (self.p, self.q)
    }

    /// The symbol, if any.
    pub fn symbol(&self) -> Option<&SymbolMorphism> {
        self.symbol.as_ref()
    }

    /// The one-form, if any.
    pub fn one_form(&self) -> Option<&InvariantOneForm> {
        self.one_form.as_ref()
    }

    /// Precomputes every t- and X-independent ingredient at `pt`.
    pub fn point_data(&self, pt: &[f64]) -> Result<PointData> {
        self.action.check_point(pt)?;
        let n = self.action.chart_dim();
        let (p, q) = (self.p, self.q);
        let zero = GradedMatrixForm::zeros(n, p, q);
        let (v, dv) = match &self.symbol {
            Some(s) => {
                let v = assemble_v_sigma(s, n, pt)?;
                let partials: Vec<GradedMatrixForm> = s
                    .v_partials(&self.action, pt)?
                    .iter()
                    .map(|m| GradedMatrixForm::from_matrix(n, p, q, m))
                    .collect::<Result<_>>()?;
                let dv = if n == 0 {
                    zero.clone()
                } else {
                    exterior_derivative_from_partials(&partials)?
                };
                (v, dv)
            }
            None => (zero.clone(), zero.clone()),
        };
        let (omega, domega) = match &self.connection {
            Some(c) => {
                let w = c.eval(pt, &[]);
                if !w.same_shape(&zero) {
                    return Err(Error::DimensionMismatch("connection form has the wrong shape".into()));
                }
                if w.degree_part(0).max_abs() > 0.0 {
                    return Err(Error::AssumptionFailed(
                        "connection coefficients have an exterior-degree-0 term".into(),
                    ));
                }
                let partials = c.partials(&self.action, pt, &[])?;
                (w, exterior_derivative_from_partials(&partials)?)
            }
            None => (zero.clone(), zero.clone()),
        };
        let mut c1 = dv.clone();
        c1 += &(&omega * &v);
        c1 += &(&v * &omega);
        let mut c0 = domega;
        c0 += &(&omega * &omega);
        let v_sq = &v * &v;
        let mu_basis = match &self.moment {
            Some(m) => {
                let b = m(pt);
                if b.len() != self.action.lie_dim() || b.iter().any(|x| !x.same_shape(&zero)) {
                    return Err(Error::DimensionMismatch("moment basis has the wrong shape".into()));
                }
                b
            }
            None => vec![zero.clone(); self.action.lie_dim()],
        };
        let (lambda, dlambda, f_basis) = match &self.one_form {
            Some(l) => {
                let f = crate::calculus::moment_of_one_form(&self.action, l, pt)?;
                (Some(l.form(pt)), l.d(&self.action, pt)?, f)
            }
            None => (None, ExteriorElement::zero(n), vec![0.0; self.action.lie_dim()]),
        };
        let h_sigma = match &self.symbol {
            Some(s) => s.support_indicator(pt)?,
            None => 0.0,
        };
        Ok(PointData {
            n,
            p,
            q,
            v,
            v_sq,
            c1,
            c0,
            mu_basis,
            lambda,
            dlambda,
            f_basis,
            h_sigma,
        })
    }

    /// Whether `pt` lies in C_{λ,σ}, to tolerance `tol`.
    pub fn is_critical(&self, pt: &[f64], tol: f64) -> Result<bool> {
        let d = self.point_data(pt)?;
        Ok(d.h_sigma <= tol && d.f_basis.iter().map(|f| f * f).sum::<f64>().sqrt() <= tol)
    }
}

/// The t- and X-independent parts of the curvature at one point.
#[derive(Clone, Debug)]
pub struct PointData {
    n: usize,
    p: usize,
    q: usize,
    v: GradedMatrixForm,
    v_sq: GradedMatrixForm,
    c1: GradedMatrixForm,
    c0: GradedMatrixForm,
    mu_basis: Vec<GradedMatrixForm>,
    lambda: Option<ExteriorElement>,
    dlambda: ExteriorElement,
    f_basis: Vec<f64>,
    h_sigma: f64,
}

impl PointData {
    fn check_x(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.mu_basis.len() {
            return Err(Error::DimensionMismatch(format!(
                "Lie algebra element has {} components, expected {}",
                x.len(),
                self.mu_basis.len()
            )));
        }
        Ok(())
    }

    /// ⟨f_λ, X⟩.
    pub fn moment_value(&self, x: &[f64]) -> f64 {
        self.f_basis.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Components of f_λ at the point.
    pub fn moment_components(&self) -> &[f64] {
        &self.f_basis
    }

    /// h_σ at the point.
    pub fn support_indicator(&self) -> f64 {
        self.h_sigma
    }

    /// v_σ.
    pub fn v(&self) -> &GradedMatrixForm {
        &self.v
    }

    /// μ(X).
    pub fn moment_term(&self, x: &[f64]) -> GradedMatrixForm {
        let mut m = GradedMatrixForm::zeros(self.n, self.p, self.q);
        for (xk, mk) in x.iter().zip(&self.mu_basis) {
            m.axpy(re(*xk), mk);
        }
        m
    }

    /// F(t, X).
    pub fn curvature(&self, t: f64, x: &[f64]) -> Result<GradedMatrixForm> {
        self.check_x(x)?;
        let mut f = self.c0.clone();
        f.axpy(re(-t * t), &self.v_sq);
        f.axpy(I * t, &self.c1);
        f += &self.moment_term(x);
        let mut scalar = self.dlambda.scale(I * t);
        *scalar.coeff_mut(0) -= I * (t * self.moment_value(x));
        f += &GradedMatrixForm::from_scalar_form(&scalar, self.p, self.q);
        Ok(f)
    }

    /// Ch(t, X) = Str e^{F(t, X)}.
    pub fn chern(&self, t: f64, x: &[f64]) -> Result<ExteriorElement> {
        Ok(super_exponential(&self.curvature(t, x)?)?.supertrace())
    }

    /// η(t, X) = −i Str((v_σ + λ) e^{F(t, X)}).
    pub fn eta(&self, t: f64, x: &[f64]) -> Result<ExteriorElement> {
        Ok(self.chern_and_eta(t, x)?.1)
    }

    /// Both Ch(t, X) and η(t, X), sharing one exponential.
    pub fn chern_and_eta(&self, t: f64, x: &[f64]) -> Result<(ExteriorElement, ExteriorElement)> {
        let e = super_exponential(&self.curvature(t, x)?)?;
        let mut a = self.v.clone();
        if let Some(l) = &self.lambda {
            a += &GradedMatrixForm::from_scalar_form(l, self.p, self.q);
        }
        let eta = (&a * &e).supertrace().scale(-I);
        Ok((e.supertrace(), eta))
    }

    /// Upper bound for ∫_T^∞ ‖η(t, X)‖ dt from the norm estimate
    /// ‖e^{−R+S+N}‖ ≤ e^{−m(R)} e^{‖S‖} 𝒫(‖N‖), or `None` when h_σ = 0.
    pub fn eta_tail_bound(&self, t_start: f64, x: &[f64]) -> Option<f64> {
        if self.h_sigma <= 1e-12 {
            return None;
        }
        let d = (self.p + self.q) as f64;
        let v_norm = self.v.graded_norm() + self.lambda.as_ref().map_or(0.0, |l| l.norm());
        let s_norm = operator_norm(&self.moment_term(x).degree_zero()) + operator_norm(&self.c0.degree_zero());
        let nil = {
            let mut m = self.moment_term(x).positive_degree_part();
            m += &self.c0.positive_degree_part();
            m.graded_norm()
        };
        let c1_norm = self.c1.graded_norm() + self.dlambda.norm();
        let q = self.n;
        let poly = |t: f64| -> f64 {
            let a = nil + t * c1_norm;
            let mut term = 1.0;
            let mut sum = 1.0;
            for k in 1..=q {
                term *= a / k as f64;
                sum += term;
            }
            sum
        };
        let h = self.h_sigma;
        let integrand = |t: f64| d * v_norm * s_norm.exp() * (-t * t * h).exp() * poly(t);
        let upper = t_start + 40.0 / h.sqrt() + 1.0;
        let r = adaptive_gk(integrand, t_start, upper, 8, 1e-14, 2000);
        Some(r.value)
    }
}

/// F(t, X) at `pt`.
pub fn assemble_curvature(spec: &SuperconnectionSpec, t: f64, x: &[f64], pt: &[f64]) -> Result<GradedMatrixForm> {
    if t < 0.0 {
        return Err(Error::AssumptionFailed("t must be nonnegative".into()));
    }
    spec.point_data(pt)?.curvature(t, x)
}

/// Ch(σ, λ, A, t)(X) at `pt`.
pub fn chern_form(spec: &SuperconnectionSpec, t: f64, x: &[f64], pt: &[f64]) -> Result<ExteriorElement> {
    spec.point_data(pt)?.chern(t, x)
}

/// η(σ, λ, A, t)(X) at `pt`.
pub fn transgression_form(spec: &SuperconnectionSpec, t: f64, x: &[f64], pt: &[f64]) -> Result<ExteriorElement> {
    spec.point_data(pt)?.eta(t, x)
}

/// ‖D Ch(t, X)‖ at `pt`.
pub fn closedness_residual(spec: &SuperconnectionSpec, t: f64, x: &[f64], pt: &[f64]) -> Result<f64> {
    let d = equivariant_differential_of(&|q| chern_form(spec, t, x, q), spec.action(), pt, x)?;
    Ok(d.max_abs())
}

/// ‖∂_t Ch(t) + D η(t)‖ at `pt`, with ∂_t by a five-point central difference of step `dt`.
pub fn transgression_identity_residual(
    spec: &SuperconnectionSpec,
    t: f64,
    x: &[f64],
    pt: &[f64],
    dt: f64,
) -> Result<f64> {
    let data = spec.point_data(pt)?;
    let mut lhs = data.chern(t + dt, x)?.scale_re(8.0);
    lhs -= &data.chern(t - dt, x)?.scale_re(8.0);
    lhs -= &data.chern(t + 2.0 * dt, x)?;
    lhs += &data.chern(t - 2.0 * dt, x)?;
    let mut r = lhs.scale_re(1.0 / (12.0 * dt));
    r += &equivariant_differential_of(&|q| transgression_form(spec, t, x, q), spec.action(), pt, x)?;
    Ok(r.max_abs())
}

/// A truncated t-integral of η with its error budget.
#[derive(Clone, Debug)]
pub struct BetaValue {
    /// ∫ η dt over the truncation interval.
    pub value: ExteriorElement,
    /// Sum of the per-panel quadrature error estimates.
    pub quadrature_error: f64,
    /// Bound for the omitted tail ∫_T^∞, when h_σ > 0 at the point.
    pub tail_bound: Option<f64>,
    /// The panels the adaptive rule settled on.
    pub panels: Vec<(f64, f64)>,
}

/// Panel tolerance of the adaptive t-quadrature.
pub const BETA_PANEL_TOL: f64 = 1e-10;

/// β_T(X) = ∫_0^T η(t, X) dt at `pt`, adaptively, with an a-posteriori tail bound.
pub fn beta_truncated(spec: &SuperconnectionSpec, t_max: f64, x: &[f64], pt: &[f64]) -> Result<BetaValue> {
    beta_between(spec, 0.0, t_max, x, pt)
}

/// ∫_{t0}^{t1} η(t, X) dt at `pt`.
pub fn beta_between(spec: &SuperconnectionSpec, t0: f64, t1: f64, x: &[f64], pt: &[f64]) -> Result<BetaValue> {
    if t0 < 0.0 || t1 < t0 {
        return Err(Error::AssumptionFailed(format!(
            "invalid truncation interval [{t0}, {t1}]"
        )));
    }
    let data = spec.point_data(pt)?;
    if data.h_sigma <= 1e-14 && data.f_basis.iter().all(|f| f.abs() <= 1e-14) {
        return Err(Error::CriticalPoint(format!("{pt:?} lies in C(λ, σ)")));
    }
    let n = data.n;
    if t1 == t0 {
        return Ok(BetaValue {
            value: ExteriorElement::zero(n),
            quadrature_error: 0.0,
            tail_bound: data.eta_tail_bound(t1, x),
            panels: Vec::new(),
        });
    }
    let failure = std::sync::Mutex::new(None);
    let initial = ((t1 - t0) / 2.0).ceil().max(1.0) as usize;
    let r = adaptive_gk(
        |t| match data.eta(t, x) {
            Ok(v) => v,
            Err(e) => {
                *failure.lock().expect("poisoned") = Some(e);
                ExteriorElement::zero(n)
            }
        },
        t0,
        t1,
        initial,
        BETA_PANEL_TOL,
        20_000,
    );
    if let Some(e) = failure.into_inner().expect("poisoned") {
        return Err(e);
    }
    if !r.converged {
        return Err(Error::QuadratureNonconvergence {
            achieved: r.error,
            requested: BETA_PANEL_TOL,
        });
    }
    Ok(BetaValue {
        value: r.value,
        quadrature_error: r.error,
        tail_bound: data.eta_tail_bound(t1, x),
        panels: r.panels,
    })
}

/// ∫ η(t, X) dt at `pt` with a frozen rule, smooth in `pt`.
pub fn beta_on_rule(spec: &SuperconnectionSpec, rule: &PanelRule, x: &[f64], pt: &[f64]) -> Result<ExteriorElement> {
    let data = spec.point_data(pt)?;
    let mut acc = ExteriorElement::zero(data.n);
    for (t, w) in rule.rule().nodes.iter().zip(&rule.rule().weights) {
        acc.axpy(re(*w), &data.eta(*t, x)?);
    }
    Ok(acc)
}

/// The product superconnection on E₁ ⊗ E₂ over a common chart: symbols
/// combine by ⊙, connections and moments by ι₁ + ι₂, one-forms add.
pub fn product_spec(s1: &SuperconnectionSpec, s2: &SuperconnectionSpec) -> Result<SuperconnectionSpec> {
    if s1.action.chart_dim() != s2.action.chart_dim() || s1.action.lie_dim() != s2.action.lie_dim() {
        return Err(Error::DimensionMismatch("factors live on different charts".into()));
    }
    let layout = TensorLayout::new(s1.p, s1.q, s2.p, s2.q);
    let sym1 = s1.symbol.clone().unwrap_or_else(|| SymbolMorphism::zero(s1.p, s1.q));
    let sym2 = s2.symbol.clone().unwrap_or_else(|| SymbolMorphism::zero(s2.p, s2.q));
    let mut out = SuperconnectionSpec::new(s1.action.clone(), layout.dim_plus(), layout.dim_minus())
        .with_symbol(odot_product(&sym1, &sym2)?)?;
    if s1.connection.is_some() || s2.connection.is_some() {
        let (a, b, lay) = (s1.clone(), s2.clone(), layout.clone());
        let n = s1.action.chart_dim();
        let conn = move |pt: &[f64]| -> GradedMatrixForm {
            let w1 = a
                .connection
                .as_ref()
                .map_or(GradedMatrixForm::zeros(n, a.p, a.q), |c| c.eval(pt, &[]));
            let w2 = b
                .connection
                .as_ref()
                .map_or(GradedMatrixForm::zeros(n, b.p, b.q), |c| c.eval(pt, &[]));
            &lay.embed_first_form(&w1) + &lay.embed_second_form(&w2)
        };
        out = out.with_connection(FormField::new(move |pt, _| conn(pt)));
    }
    let (a, b, lay) = (s1.clone(), s2.clone(), layout.clone());
    out = out.with_moment(move |pt| {
        let k = a.action.lie_dim();
        let n = a.action.chart_dim();
        let m1 = a
            .moment
            .as_ref()
            .map_or(vec![GradedMatrixForm::zeros(n, a.p, a.q); k], |m| m(pt));
        let m2 = b
            .moment
            .as_ref()
            .map_or(vec![GradedMatrixForm::zeros(n, b.p, b.q); k], |m| m(pt));
        m1.iter()
            .zip(&m2)
            .map(|(x, y)| &lay.embed_first_form(x) + &lay.embed_second_form(y))
            .collect()
    });
    match (&s1.one_form, &s2.one_form) {
        (None, None) => {}
        (l1, l2) => {
            let n = s1.action.chart_dim();
            let l1 = l1.clone().unwrap_or_else(|| InvariantOneForm::zero(n));
            let l2 = l2.clone().unwrap_or_else(|| InvariantOneForm::zero(n));
            out = out.with_one_form(l1.sum(&l2));
        }
    }
    Ok(out)
}

/// ρ(s) = e^{−1/s} for s > 0, else 0, with its derivative.
fn rho(s: f64) -> (f64, f64) {
    if s <= 0.0 {
        (0.0, 0.0)
    } else {
        let v = (-1.0 / s).exp();
        (v, v / (s * s))
    }
}

/// A smooth invariant partition (Φ₁, Φ₂) with Φ₁ = ρ(d₁)/(ρ(d₁)+ρ(d₂)),
/// built from distance-like functions d_k that are positive exactly on the
/// region where Φ_k may be nonzero.
#[derive(Clone)]
pub struct PartitionOfUnity {
    d1: PointFn<f64>,
    d2: PointFn<f64>,
    grad1: PointFn<Vec<f64>>,
    grad2: PointFn<Vec<f64>>,
}

impl PartitionOfUnity {
    /// The partition from d₁, d₂ and their gradients.
    pub fn new(
        d1: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad1: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        d2: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad2: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            d1: Arc::new(d1),
            d2: Arc::new(d2),
            grad1: Arc::new(grad1),
            grad2: Arc::new(grad2),
        }
    }

    /// The trivial partition Φ₁ ≡ 1, Φ₂ ≡ 0 (for U₂ = ∅).
    pub fn first_only(n: usize) -> Self {
        Self::new(|_| 1.0, move |_| vec![0.0; n], |_| -1.0, move |_| vec![0.0; n])
    }

    /// (Φ₁, Φ₂) at `p`; fails where neither function is active.
    pub fn values(&self, p: &[f64]) -> Result<(f64, f64)> {
        let (a, _) = rho((self.d1)(p));
        let (b, _) = rho((self.d2)(p));
        if a + b <= 0.0 {
            return Err(Error::InvalidPartition(format!("Φ₁ + Φ₂ undefined at {p:?}")));
        }
        Ok((a / (a + b), b / (a + b)))
    }

    /// dΦ₁ at `p` as a one-form.
    pub fn d_phi1(&self, p: &[f64]) -> Result<ExteriorElement> {
        let (a, da) = rho((self.d1)(p));
        let (b, db) = rho((self.d2)(p));
        let s = a + b;
        if s <= 0.0 {
            return Err(Error::InvalidPartition(format!("Φ₁ + Φ₂ undefined at {p:?}")));
        }
        let g1 = (self.grad1)(p);
        let g2 = (self.grad2)(p);
        let coeffs: Vec<f64> = g1
            .iter()
            .zip(&g2)
            .map(|(x, y)| (da * x * b - a * db * y) / (s * s))
            .collect();
        Ok(ExteriorElement::real_one_form(&coeffs))
    }

    /// Checks on samples that supp Φ_k ⊂ U_k and Φ₁ + Φ₂ = 1 on U₁ ∪ U₂.
    pub fn check_subordinate(
        &self,
        samples: &[Vec<f64>],
        in_u1: &dyn Fn(&[f64]) -> bool,
        in_u2: &dyn Fn(&[f64]) -> bool,
    ) -> Result<()> {
        for p in samples {
            let (u1, u2) = (in_u1(p), in_u2(p));
            if !(u1 || u2) {
                continue;
            }
            let (f1, f2) = self.values(p)?;
            if f1 > 0.0 && !u1 {
                return Err(Error::InvalidPartition(format!("Φ₁ ≠ 0 outside U₁ at {p:?}")));
            }
            if f2 > 0.0 && !u2 {
                return Err(Error::InvalidPartition(format!("Φ₂ ≠ 0 outside U₂ at {p:?}")));
            }
        }
        Ok(())
    }
}

/// A pair (α, β) representing a relative class, with the closed set F off
/// which β is defined.
#[derive(Clone)]
pub struct RelativeRep {
    /// The closed form α.
    pub alpha: FormField<ExteriorElement>,
    /// The primitive β of α off F.
    pub beta: FormField<ExteriorElement>,
    /// Indicator of F.
    pub support: PointFn<bool>,
    /// Parity of α.
    pub parity: usize,
    /// The truncation parameter used for β.
    pub truncation: f64,
}

impl RelativeRep {
    /// The unit class (1, 0) with F = ∅.
    pub fn unit(n: usize) -> Self {
        Self {
            alpha: FormField::new(move |_, _| ExteriorElement::one(n))
                .with_partials(move |_, _| vec![ExteriorElement::zero(n); n]),
            beta: FormField::new(move |_, _| ExteriorElement::zero(n))
                .with_partials(move |_, _| vec![ExteriorElement::zero(n); n]),
            support: Arc::new(|_| false),
            parity: 0,
            truncation: 0.0,
        }
    }

    /// ‖α − Dβ‖ at a point off F.
    pub fn residual(&self, action: &ChartedAction, p: &[f64], x: &[f64]) -> Result<f64> {
        if (self.support)(p) {
            return Err(Error::CriticalPoint(format!("{p:?} lies in the support set")));
        }
        let mut r = self.alpha.eval(p, x);
        r -= &self.beta.equivariant_differential(action, p, x)?;
        Ok(r.max_abs())
    }
}

/// The relative Chern representative (Ch(T₀), ∫_{T₀}^{T} η dt) from a spec,
/// with the t-integral on a frozen uniform rule of `panels_per_unit` panels per unit t.
pub fn retarded_rep(
    spec: &SuperconnectionSpec,
    t_start: f64,
    t_max: f64,
    panels_per_unit: usize,
) -> Result<RelativeRep> {
    if t_start < 0.0 || t_max < t_start {
        return Err(Error::AssumptionFailed(format!(
            "invalid truncation interval [{t_start}, {t_max}]"
        )));
    }
    let count = (((t_max - t_start) * panels_per_unit as f64).ceil() as usize).max(1);
    let rule = Arc::new(PanelRule::uniform(t_start, t_max, count));
    let s1 = spec.clone();
    let s2 = spec.clone();
    let s3 = spec.clone();
    let n = spec.action().chart_dim();
    Ok(RelativeRep {
        alpha: FormField::new(move |p, x| chern_form(&s1, t_start, x, p).unwrap_or_else(|_| nan_form(n))),
        beta: FormField::new(move |p, x| beta_on_rule(&s2, &rule, x, p).unwrap_or_else(|_| nan_form(n))),
        support: Arc::new(move |p| s3.is_critical(p, 1e-12).unwrap_or(true)),
        parity: 0,
        truncation: t_max,
    })
}

fn nan_form(n: usize) -> ExteriorElement {
    ExteriorElement::scalar(n, Complex64::new(f64::NAN, f64::NAN))
}

/// The ⋄_Φ product (α₁α₂, Φ₁β₁α₂ + (−1)^{|a₁|}Φ₂α₁β₂ − (−1)^{|a₁|}dΦ₁β₁β₂).
pub fn relative_product(a1: &RelativeRep, a2: &RelativeRep, phi: &PartitionOfUnity) -> Result<RelativeRep> {
    let sign = if a1.parity.is_multiple_of(2) { 1.0 } else { -1.0 };
    let (x1, x2) = (a1.clone(), a2.clone());
    let alpha = FormField::new(move |p, x| &x1.alpha.eval(p, x) * &x2.alpha.eval(p, x));
    let (x1, x2, ph) = (a1.clone(), a2.clone(), phi.clone());
    let beta = FormField::new(move |p, x| {
        let n = p.len();
        let (f1, f2) = match ph.values(p) {
            Ok(v) => v,
            Err(_) => return nan_form(n),
        };
        let mut out = ExteriorElement::zero(n);
        if f1 > 0.0 {
            out.axpy(re(f1), &(&x1.beta.eval(p, x) * &x2.alpha.eval(p, x)));
        }
        if f2 > 0.0 {
            out.axpy(re(sign * f2), &(&x1.alpha.eval(p, x) * &x2.beta.eval(p, x)));
        }
        let dphi = ph.d_phi1(p).unwrap_or_else(|_| nan_form(n));
        if dphi.max_abs() > 0.0 {
            let b12 = &x1.beta.eval(p, x) * &x2.beta.eval(p, x);
            out.axpy(re(-sign), &(&dphi * &b12));
        }
        out
    });
    let (s1, s2) = (a1.support.clone(), a2.support.clone());
    Ok(RelativeRep {
        alpha,
        beta,
        support: Arc::new(move |p| s1(p) && s2(p)),
        parity: (a1.parity + a2.parity) % 2,
        truncation: a1.truncation.min(a2.truncation),
    })
}

/// An invariant cutoff χ with its gradient.
#[derive(Clone)]
pub struct Cutoff {
    value: PointFn<f64>,
    gradient: PointFn<Vec<f64>>,
}

impl Cutoff {
    /// χ from its value and gradient.
    pub fn new(
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Arc::new(value),
            gradient: Arc::new(gradient),
        }
    }

    /// χ ≡ 1.
    pub fn one(n: usize) -> Self {
        Self::new(|_| 1.0, move |_| vec![0.0; n])
    }

    /// χ(p) = s(‖p‖²) for the smooth step s equal to 1 on [0, a] and 0 on [b, ∞).
    pub fn radial(a: f64, b: f64) -> Self {
        Self::new(
            move |p| smooth_step(p.iter().map(|v| v * v).sum(), a, b).0,
            move |p| {
                let d = smooth_step(p.iter().map(|v| v * v).sum(), a, b).1;
                p.iter().map(|v| 2.0 * v * d).collect()
            },
        )
    }

    /// χ(p).
    pub fn value(&self, p: &[f64]) -> f64 {
        (self.value)(p)
    }

    /// dχ(p).
    pub fn differential(&self, p: &[f64]) -> ExteriorElement {
        ExteriorElement::real_one_form(&(self.gradient)(p))
    }
}

/// The smooth step equal to 1 for s ≤ a and 0 for s ≥ b, and its derivative.
pub fn smooth_step(s: f64, a: f64, b: f64) -> (f64, f64) {
    if s <= a {
        return (1.0, 0.0);
    }
    if s >= b {
        return (0.0, 0.0);
    }
    let u = (s - a) / (b - a);
    let (f, df) = rho(1.0 - u);
    let (g, dg) = rho(u);
    let sum = f + g;
    let val = f / sum;
    let dval = (-df * g - f * dg) / (sum * sum) / (b - a);
    (val, dval)
}

/// p^χ(α, β) = χα + dχ β.
pub fn compact_support_rep(
    a: &RelativeRep,
    chi: &Cutoff,
    samples_near_support: &[Vec<f64>],
) -> Result<FormField<ExteriorElement>> {
    for p in samples_near_support {
        if (chi.value(p) - 1.0).abs() > 1e-14 {
            return Err(Error::InvalidCutoff(format!("χ ≠ 1 at {p:?} near the support set")));
        }
    }
    let (rep, chi) = (a.clone(), chi.clone());
    Ok(FormField::new(move |p, x| {
        let c = chi.value(p);
        let dchi = chi.differential(p);
        let mut out = ExteriorElement::zero(p.len());
        if c != 0.0 {
            out.axpy(re(c), &rep.alpha.eval(p, x));
        }
        if dchi.max_abs() > 0.0 {
            out += &(&dchi * &rep.beta.eval(p, x));
        }
        out
    }))
}
