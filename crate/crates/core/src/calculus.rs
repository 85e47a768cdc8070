//! Charted group actions and the equivariant differential D = d − ι(V_X).
//!
//! A compact Lie group acts on a chart of ℝⁿ through its fundamental vector
//! fields: `V(p, X) = Σ_k X_k V_k(p)` for X ∈ 𝔨 ≅ ℝᵏ.  Forms are evaluated
//! pointwise; exterior derivatives use analytic jacobians when supplied and
//! Richardson-extrapolated central differences otherwise.

use crate::error::{Error, Result};
use crate::exterior::{koszul_sign, ExteriorElement};
use crate::graded::GradedMatrixForm;
use crate::quadrature::QuadValue;
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::sync::Arc;

/// A function of a chart point.
pub type PointFn<T> = Arc<dyn Fn(&[f64]) -> T + Send + Sync>;
/// A function of a chart point and a Lie algebra element.
pub type PointLieFn<T> = Arc<dyn Fn(&[f64], &[f64]) -> T + Send + Sync>;

/// Forms that can be differentiated: exterior-algebra valued quantities with
/// an interior product and left multiplication by a generator dx_i.
pub trait FormValue: QuadValue {
    /// Number of exterior generators.
    fn generators(&self) -> usize;
    /// ι(v)·self.
    fn contract(&self, v: &[f64]) -> Self;
    /// dx_i ∧ self.
    fn wedge_generator(&self, i: usize) -> Self;
    /// The zero form of the same shape.
    fn zero_like(&self) -> Self;
}

impl FormValue for ExteriorElement {
    fn generators(&self) -> usize {
        self.n_generators()
    }
    fn contract(&self, v: &[f64]) -> Self {
        self.interior(v)
    }
    fn wedge_generator(&self, i: usize) -> Self {
        let n = self.n_generators();
        let bit = 1usize << i;
        let mut out = ExteriorElement::zero(n);
        for m in 0..1usize << n {
            if m & bit == 0 {
                let c = self.coeff(m);
                if c != Complex64::new(0.0, 0.0) {
                    *out.coeff_mut(m | bit) += c * koszul_sign(bit, m);
                }
            }
        }
        out
    }
    fn zero_like(&self) -> Self {
        ExteriorElement::zero(self.n_generators())
    }
}

impl FormValue for GradedMatrixForm {
    fn generators(&self) -> usize {
        self.n_generators()
    }
    fn contract(&self, v: &[f64]) -> Self {
        self.interior(v)
    }
    fn wedge_generator(&self, i: usize) -> Self {
        let n = self.n_generators();
        let d2 = self.dim() * self.dim();
        let bit = 1usize << i;
        let mut out = GradedMatrixForm::zeros(n, self.dim_plus(), self.dim_minus());
        let src = self.raw();
        let dst = out.raw_mut();
        for m in 0..1usize << n {
            if m & bit == 0 {
                let s = koszul_sign(bit, m);
                for k in 0..d2 {
                    dst[(m | bit) * d2 + k] += src[m * d2 + k] * s;
                }
            }
        }
        out
    }
    fn zero_like(&self) -> Self {
        GradedMatrixForm::zeros(self.n_generators(), self.dim_plus(), self.dim_minus())
    }
}

/// Infinitesimal action of a compact Lie group on a chart.
#[derive(Clone)]
pub struct ChartedAction {
    chart_dim: usize,
    lie_dim: usize,
    generators: PointFn<Vec<Vec<f64>>>,
    generator_jacobians: Option<PointFn<Vec<DMatrix<f64>>>>,
    domain: Option<PointFn<bool>>,
    metric: Option<PointFn<DMatrix<f64>>>,
    cotangent_base: Option<usize>,
}

impl ChartedAction {
    /// An action given by its fundamental vector fields V_1, ..., V_k.
    pub fn new(
        chart_dim: usize,
        lie_dim: usize,
        generators: impl Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        Self {
            chart_dim,
            lie_dim,
            generators: Arc::new(generators),
            generator_jacobians: None,
            domain: None,
            metric: None,
            cotangent_base: None,
        }
    }

    /// Action by a constant skew-symmetric matrix per generator: V_k(p) = A_k p.
    pub fn linear(matrices: Vec<DMatrix<f64>>) -> Self {
        let chart_dim = matrices.first().map_or(0, |m| m.nrows());
        let lie_dim = matrices.len();
        let mats = matrices.clone();
        Self::new(chart_dim, lie_dim, move |p| {
            mats.iter()
                .map(|a| {
                    (0..a.nrows())
                        .map(|i| (0..a.ncols()).map(|j| a[(i, j)] * p[j]).sum())
                        .collect()
                })
                .collect()
        })
        .with_jacobians(move |_| matrices.clone())
    }

    /// Supplies ∂V_k/∂p (row i: component i, column j: derivative in p_j).
    pub fn with_jacobians(mut self, j: impl Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync + 'static) -> Self {
        self.generator_jacobians = Some(Arc::new(j));
        self
    }

    /// Restricts the chart to the points accepted by `domain`.
    pub fn with_domain(mut self, domain: impl Fn(&[f64]) -> bool + Send + Sync + 'static) -> Self {
        self.domain = Some(Arc::new(domain));
        self
    }

    /// Supplies an invariant Riemannian metric.
    pub fn with_metric(mut self, metric: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.metric = Some(Arc::new(metric));
        self
    }

    /// Lifts the action to the cotangent chart (x, ξ) with coordinates
    /// ordered as base then fibre: V(x, ξ) = (V(x), −DV(x)ᵀ ξ).
    pub fn cotangent_lift(&self) -> Result<Self> {
        let jac = self
            .generator_jacobians
            .clone()
            .ok_or_else(|| Error::MissingData("generator jacobians for the cotangent lift".into()))?;
        let m = self.chart_dim;
        let gens = self.generators.clone();
        let base_domain = self.domain.clone();
        let mut lifted = Self::new(2 * m, self.lie_dim, move |p| {
            let (x, xi) = p.split_at(m);
            let v = gens(x);
            let js = jac(x);
            v.into_iter()
                .zip(js)
                .map(|(vk, jk)| {
                    let mut out = vk;
                    for j in 0..m {
                        out.push(-(0..m).map(|i| jk[(i, j)] * xi[i]).sum::<f64>());
                    }
                    out
                })
                .collect()
        });
        if let Some(d) = base_domain {
            lifted.domain = Some(Arc::new(move |p: &[f64]| d(&p[..m])));
        }
        lifted.cotangent_base = Some(m);
        Ok(lifted)
    }

    /// Chart dimension n.
    pub fn chart_dim(&self) -> usize {
        self.chart_dim
    }

    /// Lie algebra dimension k.
    pub fn lie_dim(&self) -> usize {
        self.lie_dim
    }

    /// Base dimension when the chart is a cotangent chart.
    pub fn cotangent_base(&self) -> Option<usize> {
        self.cotangent_base
    }

    /// Whether `p` lies in the chart domain.
    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.chart_dim && self.domain.as_ref().is_none_or(|d| d(p))
    }

    /// The fundamental vector fields V_k(p).
    pub fn generator_fields(&self, p: &[f64]) -> Vec<Vec<f64>> {
        (self.generators)(p)
    }

    /// ∂V_k/∂p when supplied.
    pub fn generator_jacobians(&self, p: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        self.generator_jacobians.as_ref().map(|j| j(p))
    }

    /// V(p, X) = Σ_k X_k V_k(p).
    pub fn vector_field(&self, p: &[f64], x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.chart_dim];
        for (xk, vk) in x.iter().zip(self.generator_fields(p)) {
            for (o, v) in out.iter_mut().zip(vk) {
                *o += xk * v;
            }
        }
        out
    }

    /// The metric at `p`, if one was supplied.
    pub fn metric(&self, p: &[f64]) -> Option<DMatrix<f64>> {
        self.metric.as_ref().map(|g| g(p))
    }

    /// Checks the dimension of `p` and that it lies in the chart domain.
    pub fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.chart_dim {
            return Err(Error::DimensionMismatch(format!(
                "point has {} coordinates, chart has {}",
                p.len(),
                self.chart_dim
            )));
        }
        if !self.contains(p) {
            return Err(Error::OutsideChart(p.to_vec()));
        }
        Ok(())
    }
}

/// Step used for central differences at `p`.
pub fn difference_step(p: &[f64]) -> f64 {
    1e-5 * (1.0 + p.iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// Partial derivatives ∂_i f(p) by central differences with one Richardson
/// level, (4 D_h − D_{2h}) / 3.  Every stencil point must satisfy `domain`.
pub fn partial_derivatives<V: QuadValue>(
    f: &dyn Fn(&[f64]) -> Result<V>,
    p: &[f64],
    domain: &dyn Fn(&[f64]) -> bool,
) -> Result<Vec<V>> {
    let h = difference_step(p);
    let mut out = Vec::with_capacity(p.len());
    let mut q = p.to_vec();
    for i in 0..p.len() {
        let mut eval = |delta: f64| -> Result<V> {
            q[i] = p[i] + delta;
            if !domain(&q) {
                return Err(Error::OutsideChart(q.clone()));
            }
            let v = f(&q);
            q[i] = p[i];
            v
        };
        let fp1 = eval(h)?;
        let fm1 = eval(-h)?;
        let fp2 = eval(2.0 * h)?;
        let fm2 = eval(-2.0 * h)?;
        let mut d = fp1.scaled(8.0);
        d.add_scaled(-8.0, &fm1);
        d.add_scaled(-1.0, &fp2);
        d.add_scaled(1.0, &fm2);
        out.push(d.scaled(1.0 / (12.0 * h)));
    }
    Ok(out)
}

/// d α = Σ_i dx_i ∧ ∂_i α from the partial derivatives of the coefficients.
pub fn exterior_derivative_from_partials<V: FormValue>(partials: &[V]) -> Result<V> {
    let first = partials
        .first()
        .ok_or_else(|| Error::DimensionMismatch("no partial derivatives".into()))?;
    if first.generators() != partials.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} partial derivatives for {} generators",
            partials.len(),
            first.generators()
        )));
    }
    let mut out = first.zero_like();
    for (i, d) in partials.iter().enumerate() {
        out.add_scaled(1.0, &d.wedge_generator(i));
    }
    Ok(out)
}

/// D α(X) at `p` for a form given at fixed X as a function of the point.
pub fn equivariant_differential_of<V: FormValue>(
    f: &dyn Fn(&[f64]) -> Result<V>,
    action: &ChartedAction,
    p: &[f64],
    x: &[f64],
) -> Result<V> {
    action.check_point(p)?;
    let partials = partial_derivatives(f, p, &|q| action.contains(q))?;
    let mut out = exterior_derivative_from_partials(&partials)?;
    let value = f(p)?;
    out.add_scaled(-1.0, &value.contract(&action.vector_field(p, x)));
    Ok(out)
}

/// A form field α(p, X), optionally with analytic partial derivatives in p.
#[derive(Clone)]
pub struct FormField<V> {
    eval: PointLieFn<V>,
    partials: Option<PointLieFn<Vec<V>>>,
}

impl<V: FormValue> FormField<V> {
    /// A field without analytic derivatives.
    pub fn new(eval: impl Fn(&[f64], &[f64]) -> V + Send + Sync + 'static) -> Self {
        Self {
            eval: Arc::new(eval),
            partials: None,
        }
    }

    /// Supplies ∂_i α(p, X) for i = 1..n.
    pub fn with_partials(mut self, partials: impl Fn(&[f64], &[f64]) -> Vec<V> + Send + Sync + 'static) -> Self {
        self.partials = Some(Arc::new(partials));
        self
    }

    /// α(p, X).
    pub fn eval(&self, p: &[f64], x: &[f64]) -> V {
        (self.eval)(p, x)
    }

    /// Whether analytic derivatives are available.
    pub fn has_partials(&self) -> bool {
        self.partials.is_some()
    }

    /// ∂_i α(p, X), analytic when available.
    pub fn partials(&self, action: &ChartedAction, p: &[f64], x: &[f64]) -> Result<Vec<V>> {
        match &self.partials {
            Some(d) => Ok(d(p, x)),
            None => partial_derivatives(&|q| Ok(self.eval(q, x)), p, &|q| action.contains(q)),
        }
    }

    /// (Dα)(X) at `p`.
    pub fn equivariant_differential(&self, action: &ChartedAction, p: &[f64], x: &[f64]) -> Result<V> {
        action.check_point(p)?;
        if x.len() != action.lie_dim() {
            return Err(Error::DimensionMismatch(format!(
                "Lie algebra element has {} components, expected {}",
                x.len(),
                action.lie_dim()
            )));
        }
        let value = self.eval(p, x);
        if value.generators() != action.chart_dim() {
            return Err(Error::DimensionMismatch(format!(
                "form has {} generators on a chart of dimension {}",
                value.generators(),
                action.chart_dim()
            )));
        }
        let mut out = exterior_derivative_from_partials(&self.partials(action, p, x)?)?;
        out.add_scaled(-1.0, &value.contract(&action.vector_field(p, x)));
        Ok(out)
    }
}

/// A real one-form λ = Σ_j λ_j(p) dx_j, optionally with its jacobian.
#[derive(Clone)]
pub struct InvariantOneForm {
    coeffs: PointFn<Vec<f64>>,
    jacobian: Option<PointFn<DMatrix<f64>>>,
}

impl InvariantOneForm {
    /// A one-form from its coefficient functions.
    pub fn new(coeffs: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self {
            coeffs: Arc::new(coeffs),
            jacobian: None,
        }
    }

    /// Supplies J with J[(j, i)] = ∂_i λ_j.
    pub fn with_jacobian(mut self, jac: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.jacobian = Some(Arc::new(jac));
        self
    }

    /// The zero one-form.
    pub fn zero(n: usize) -> Self {
        Self::new(move |_| vec![0.0; n]).with_jacobian(move |_| DMatrix::zeros(n, n))
    }

    /// λ + μ.
    pub fn sum(&self, other: &Self) -> Self {
        let (a, b) = (self.clone(), other.clone());
        let mut out = Self::new(move |p| {
            a.coefficients(p)
                .iter()
                .zip(b.coefficients(p))
                .map(|(x, y)| x + y)
                .collect()
        });
        if let (Some(ja), Some(jb)) = (self.jacobian.clone(), other.jacobian.clone()) {
            out = out.with_jacobian(move |p| ja(p) + jb(p));
        }
        out
    }

    /// λ_j(p).
    pub fn coefficients(&self, p: &[f64]) -> Vec<f64> {
        (self.coeffs)(p)
    }

    /// λ(p) as an exterior element.
    pub fn form(&self, p: &[f64]) -> ExteriorElement {
        ExteriorElement::real_one_form(&self.coefficients(p))
    }

    /// The jacobian J[(j, i)] = ∂_i λ_j, analytic when available.
    pub fn jacobian(&self, action: &ChartedAction, p: &[f64]) -> Result<DMatrix<f64>> {
        if let Some(j) = &self.jacobian {
            return Ok(j(p));
        }
        let n = p.len();
        let cols = partial_derivatives(&|q| Ok(self.coefficients(q)), p, &|q| action.contains(q))?;
        Ok(DMatrix::from_fn(n, n, |j, i| cols[i][j]))
    }

    /// dλ at `p`.
    pub fn d(&self, action: &ChartedAction, p: &[f64]) -> Result<ExteriorElement> {
        let j = self.jacobian(action, p)?;
        let n = p.len();
        let mut out = ExteriorElement::zero(n);
        for a in 0..n {
            for b in a + 1..n {
                let c = j[(b, a)] - j[(a, b)];
                if c != 0.0 {
                    *out.coeff_mut((1 << a) | (1 << b)) += Complex64::new(c, 0.0);
                }
            }
        }
        Ok(out)
    }

    /// Its moment f_λ(X) = λ(V_X) at `p`.
    pub fn moment(&self, action: &ChartedAction, p: &[f64], x: &[f64]) -> f64 {
        self.coefficients(p)
            .iter()
            .zip(action.vector_field(p, x))
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Dλ(X) = dλ − f_λ(X) at `p`.
    pub fn equivariant_differential(&self, action: &ChartedAction, p: &[f64], x: &[f64]) -> Result<ExteriorElement> {
        action.check_point(p)?;
        let mut out = self.d(action, p)?;
        *out.coeff_mut(0) -= Complex64::new(self.moment(action, p, x), 0.0);
        Ok(out)
    }

    /// ‖ℒ_{V_X} λ‖ at `p`, computed as d(λ(V_X)) + ι(V_X)dλ.
    pub fn invariance_defect(&self, action: &ChartedAction, p: &[f64], x: &[f64]) -> Result<f64> {
        action.check_point(p)?;
        let grad = partial_derivatives(&|q| Ok(self.moment(action, q, x)), p, &|q| action.contains(q))?;
        let mut l = ExteriorElement::real_one_form(&grad);
        l += &self.d(action, p)?.interior(&action.vector_field(p, x));
        Ok(l.max_abs())
    }
}

/// Components f_k(p) = λ(V_k(p)) of the moment of λ.
pub fn moment_of_one_form(action: &ChartedAction, lambda: &InvariantOneForm, p: &[f64]) -> Result<Vec<f64>> {
    action.check_point(p)?;
    let c = lambda.coefficients(p);
    Ok(action
        .generator_fields(p)
        .iter()
        .map(|v| v.iter().zip(&c).map(|(a, b)| a * b).sum())
        .collect())
}

/// The Liouville one-form λ = −Σ ξ_i dx_i of a cotangent chart, together with
/// its moment f(p, X) = −⟨ξ, V(x, X)⟩.
pub fn liouville_data(action: &ChartedAction) -> Result<(InvariantOneForm, PointLieFn<f64>)> {
    let m = action
        .cotangent_base()
        .ok_or_else(|| Error::MissingData("chart is not a cotangent chart".into()))?;
    let n = 2 * m;
    let lambda = InvariantOneForm::new(move |p| {
        let mut c = vec![0.0; n];
        for i in 0..m {
            c[i] = -p[m + i];
        }
        c
    })
    .with_jacobian(move |_| {
        let mut j = DMatrix::zeros(n, n);
        for i in 0..m {
            j[(i, m + i)] = -1.0;
        }
        j
    });
    let act = action.clone();
    let moment: PointLieFn<f64> = Arc::new(move |p, x| {
        let v = act.vector_field(p, x);
        -(0..m).map(|i| p[m + i] * v[i]).sum::<f64>()
    });
    Ok((lambda, moment))
}

/// The Kirwan vector 𝐤 = V(Φ) = Σ_k Φ_k V_k and one-form λ_𝐤 = g(𝐤, ·) at `p`.
pub fn kirwan_one_form(
    action: &ChartedAction,
    moment_map: &dyn Fn(&[f64]) -> Vec<f64>,
    p: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    action.check_point(p)?;
    let g = action
        .metric(p)
        .ok_or_else(|| Error::MissingData("invariant metric".into()))?;
    let phi = moment_map(p);
    if phi.len() != action.lie_dim() {
        return Err(Error::DimensionMismatch(format!(
            "moment map has {} components, expected {}",
            phi.len(),
            action.lie_dim()
        )));
    }
    let k = action.vector_field(p, &phi);
    let lam = (0..k.len())
        .map(|i| (0..k.len()).map(|j| g[(i, j)] * k[j]).sum())
        .collect();
    Ok((k, lam))
}

/// The Kirwan one-form as an [`InvariantOneForm`].
pub fn kirwan_invariant_one_form(action: &ChartedAction, moment_map: PointFn<Vec<f64>>) -> InvariantOneForm {
    let act = action.clone();
    InvariantOneForm::new(move |p| {
        kirwan_one_form(&act, moment_map.as_ref(), p)
            .map(|(_, l)| l)
            .unwrap_or_else(|_| vec![f64::NAN; p.len()])
    })
}
