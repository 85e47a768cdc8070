//! Generalized coefficients: pairing X-dependent forms with test densities.
//!
//! A form with generalized coefficients is only known through
//! ∫_𝔨 α(X) Q(X) dX for smooth compactly supported densities Q.  This module
//! provides the densities, tensor-product X-rules over their support, and
//! the paired identities built on top of the Chern engine.

use crate::calculus::{equivariant_differential_of, ChartedAction, InvariantOneForm};
use crate::chern::{beta_on_rule, PartitionOfUnity, SuperconnectionSpec};
use crate::error::{Error, Result};
use crate::exterior::ExteriorElement;
use crate::quadrature::{adaptive_gk, gauss_legendre, integration_matrix, PanelRule, QuadValue, Rule};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Truncated Taylor series Σ c_k h^k used to differentiate density profiles.
#[derive(Clone, Debug)]
struct Jet(Vec<f64>);

impl Jet {
    fn constant(c: f64, order: usize) -> Self {
        let mut v = vec![0.0; order + 1];
        v[0] = c;
        Jet(v)
    }

    fn variable(x: f64, order: usize) -> Self {
        let mut v = Self::constant(x, order);
        if order > 0 {
            v.0[1] = 1.0;
        }
        v
    }

    fn affine(&self, a: f64, b: f64) -> Self {
        let mut v: Vec<f64> = self.0.iter().map(|c| a * c).collect();
        v[0] += b;
        Jet(v)
    }

    fn mul(&self, o: &Self) -> Self {
        let n = self.0.len();
        let mut v = vec![0.0; n];
        for i in 0..n {
            for j in 0..n - i {
                v[i + j] += self.0[i] * o.0[j];
            }
        }
        Jet(v)
    }

    fn add(&self, o: &Self) -> Self {
        Jet(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }

    fn exp(&self) -> Self {
        let n = self.0.len();
        let mut f = vec![0.0; n];
        f[0] = self.0[0].exp();
        for k in 1..n {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += j as f64 * self.0[j] * f[k - j];
            }
            f[k] = acc / k as f64;
        }
        Jet(f)
    }

    fn recip(&self) -> Self {
        let n = self.0.len();
        let mut f = vec![0.0; n];
        f[0] = 1.0 / self.0[0];
        for k in 1..n {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += self.0[j] * f[k - j];
            }
            f[k] = -acc / self.0[0];
        }
        Jet(f)
    }

    /// Derivatives f^{(k)} = k! c_k.
    fn derivatives(&self) -> Vec<f64> {
        let mut fact = 1.0;
        self.0
            .iter()
            .enumerate()
            .map(|(k, c)| {
                if k > 0 {
                    fact *= k as f64;
                }
                c * fact
            })
            .collect()
    }
}

/// e^{−1/s} for s > 0 as a jet, zero otherwise.
fn jet_rho(s: &Jet) -> Jet {
    if s.0[0] <= 0.0 {
        Jet::constant(0.0, s.0.len() - 1)
    } else {
        s.recip().affine(-1.0, 0.0).exp()
    }
}

/// Start of the smooth cutoff of the truncated Gaussian, in units of its width.
pub const GAUSSIAN_PLATEAU: f64 = 7.5;
/// End of the support of the truncated Gaussian, in units of its width.
pub const GAUSSIAN_SUPPORT: f64 = 10.0;

/// A one-dimensional smooth compactly supported profile.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Profile {
    /// exp(−1/(1 − u²)) for |u| < 1 with u = (X − center)/radius.
    Bump { center: f64, radius: f64 },
    /// Normalized Gaussian of width `width`, multiplied by a smooth cutoff
    /// equal to 1 for |u| ≤ 7.5 and vanishing for |u| ≥ 10.
    TruncatedGaussian { center: f64, width: f64 },
}

impl Profile {
    /// Closed support interval.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Profile::Bump { center, radius } => (center - radius, center + radius),
            Profile::TruncatedGaussian { center, width } => {
                (center - GAUSSIAN_SUPPORT * width, center + GAUSSIAN_SUPPORT * width)
            }
        }
    }

    /// The profile and its first `order` derivatives at `x`.
    fn jet(&self, x: f64, order: usize) -> Jet {
        let h = Jet::variable(x, order);
        match *self {
            Profile::Bump { center, radius } => {
                let u = h.affine(1.0 / radius, -center / radius);
                if u.0[0].abs() >= 1.0 {
                    return Jet::constant(0.0, order);
                }
                let g = u.mul(&u).affine(-1.0, 1.0);
                g.recip().affine(-1.0, 0.0).exp()
            }
            Profile::TruncatedGaussian { center, width } => {
                let u = h.affine(1.0 / width, -center / width);
                let a = u.0[0].abs();
                if a >= GAUSSIAN_SUPPORT {
                    return Jet::constant(0.0, order);
                }
                let gauss = u
                    .mul(&u)
                    .affine(-0.5, 0.0)
                    .exp()
                    .affine(1.0 / (width * (2.0 * PI).sqrt()), 0.0);
                if a <= GAUSSIAN_PLATEAU {
                    return gauss;
                }
                let abs_u = if u.0[0] >= 0.0 { u } else { u.affine(-1.0, 0.0) };
                let span = GAUSSIAN_SUPPORT - GAUSSIAN_PLATEAU;
                let w = abs_u.affine(1.0 / span, -GAUSSIAN_PLATEAU / span);
                let f = jet_rho(&w.affine(-1.0, 1.0));
                let g = jet_rho(&w);
                let kappa = f.mul(&f.add(&g).recip());
                gauss.mul(&kappa)
            }
        }
    }

    /// Value at `x`.
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Profile::Bump { center, radius } => {
                let u = (x - center) / radius;
                if u.abs() >= 1.0 {
                    0.0
                } else {
                    (-1.0 / (1.0 - u * u)).exp()
                }
            }
            Profile::TruncatedGaussian { width, center } => {
                let u = ((x - center) / width).abs();
                if u >= GAUSSIAN_PLATEAU {
                    self.jet(x, 0).0[0]
                } else {
                    (-0.5 * u * u).exp() / (width * (2.0 * PI).sqrt())
                }
            }
        }
    }

    /// Derivatives of orders 0..=order at `x`.
    pub fn derivatives(&self, x: f64, order: usize) -> Vec<f64> {
        self.jet(x, order).derivatives()
    }

    /// Q̂(ξ) = ∫ e^{−iξX} Q(X) dX in closed form when available.
    pub fn analytic_fourier(&self, xi: f64) -> Option<Complex64> {
        match *self {
            Profile::TruncatedGaussian { center, width } => {
                Some((-I * xi * center).exp() * (-0.5 * width * width * xi * xi).exp())
            }
            Profile::Bump { .. } => None,
        }
    }

    /// Q̂(ξ) by composite Gauss–Legendre quadrature over the support.
    pub fn numeric_fourier(&self, xi: f64) -> Complex64 {
        let (lo, hi) = self.support();
        let panels = 16 + ((hi - lo) * xi.abs() / 2.0).ceil() as usize;
        let rule = Rule::composite(lo, hi, panels, 16);
        rule.integrate(|x| (-I * xi * x).exp() * self.value(x))
    }

    /// sup over [a, b] of |Q^{(j)}| for each j ≤ r, from a sampled grid with a
    /// first-order Lipschitz correction.
    pub fn derivative_bounds(&self, a: f64, b: f64, r: usize) -> Vec<f64> {
        let (lo, hi) = self.support();
        let (a, b) = (a.max(lo), b.min(hi));
        if a >= b {
            return vec![0.0; r + 1];
        }
        let samples = 4000;
        let h = (b - a) / samples as f64;
        let mut maxima = vec![0.0f64; r + 2];
        for i in 0..=samples {
            let d = self.derivatives(a + i as f64 * h, r + 1);
            for (m, v) in maxima.iter_mut().zip(d) {
                *m = m.max(v.abs());
            }
        }
        (0..=r).map(|j| maxima[j] + 0.5 * h * maxima[j + 1] * 1.5).collect()
    }
}

/// A test density: a finite linear combination of tensor products of profiles.
#[derive(Clone, Debug, PartialEq)]
pub struct TestDensity {
    terms: Vec<(f64, Vec<Profile>)>,
}

impl TestDensity {
    /// A product density Q(X) = Π_i Q_i(X_i).
    pub fn product(factors: Vec<Profile>) -> Self {
        Self {
            terms: vec![(1.0, factors)],
        }
    }

    /// A one-dimensional density.
    pub fn single(profile: Profile) -> Self {
        Self::product(vec![profile])
    }

    /// A one-dimensional bump.
    pub fn bump(center: f64, radius: f64) -> Self {
        Self::single(Profile::Bump { center, radius })
    }

    /// A one-dimensional truncated Gaussian.
    pub fn gaussian(center: f64, width: f64) -> Self {
        Self::single(Profile::TruncatedGaussian { center, width })
    }

    /// a·self + b·other.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch("densities on different Lie algebras".into()));
        }
        let mut terms: Vec<(f64, Vec<Profile>)> = self.terms.iter().map(|(c, f)| (a * c, f.clone())).collect();
        terms.extend(other.terms.iter().map(|(c, f)| (b * c, f.clone())));
        Ok(Self { terms })
    }

    /// The terms (coefficient, factors).
    pub fn terms(&self) -> &[(f64, Vec<Profile>)] {
        &self.terms
    }

    /// Dimension of 𝔨.
    pub fn dim(&self) -> usize {
        self.terms.first().map_or(0, |t| t.1.len())
    }

    /// Q(X).
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, f)| c * f.iter().zip(x).map(|(p, xi)| p.value(*xi)).product::<f64>())
            .sum()
    }

    /// Bounding box of the support.
    pub fn support_box(&self) -> Vec<(f64, f64)> {
        let mut b = vec![(f64::INFINITY, f64::NEG_INFINITY); self.dim()];
        for (_, f) in &self.terms {
            for (bi, p) in b.iter_mut().zip(f) {
                let (lo, hi) = p.support();
                bi.0 = bi.0.min(lo);
                bi.1 = bi.1.max(hi);
            }
        }
        b
    }

    /// Centre and radius of a ball containing the support.
    pub fn support_ball(&self) -> (Vec<f64>, f64) {
        let b = self.support_box();
        let c: Vec<f64> = b.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
        let r = b.iter().map(|(lo, hi)| (0.5 * (hi - lo)).powi(2)).sum::<f64>().sqrt();
        (c, r)
    }

    /// Q̂(ξ) = ∫ e^{−i⟨ξ, X⟩} Q(X) dX, closed form where available.
    pub fn fourier(&self, xi: &[f64]) -> Complex64 {
        self.terms
            .iter()
            .map(|(c, f)| {
                f.iter()
                    .zip(xi)
                    .map(|(p, x)| p.analytic_fourier(*x).unwrap_or_else(|| p.numeric_fourier(*x)))
                    .product::<Complex64>()
                    * *c
            })
            .sum()
    }

    /// Whether every factor has a closed-form Fourier transform.
    pub fn has_analytic_fourier(&self) -> bool {
        self.terms
            .iter()
            .all(|(_, f)| f.iter().all(|p| p.analytic_fourier(0.0).is_some()))
    }

    /// Upper bound for ‖Q‖_{K,r} = sup_{X ∈ K, |α| ≤ r} |∂^α Q(X)| with K a box.
    pub fn seminorm(&self, k: &[(f64, f64)], r: usize) -> Result<f64> {
        if k.len() != self.dim() {
            return Err(Error::DimensionMismatch("compact set has the wrong dimension".into()));
        }
        let mut total = 0.0;
        for (c, f) in &self.terms {
            let bounds: Vec<Vec<f64>> = f
                .iter()
                .zip(k)
                .map(|(p, (a, b))| p.derivative_bounds(*a, *b, r))
                .collect();
            let mut best = 0.0f64;
            let mut idx = vec![0usize; f.len()];
            loop {
                if idx.iter().sum::<usize>() <= r {
                    best = best.max(idx.iter().zip(&bounds).map(|(j, b)| b[*j]).product());
                }
                let mut pos = 0;
                while pos < idx.len() {
                    idx[pos] += 1;
                    if idx[pos] <= r {
                        break;
                    }
                    idx[pos] = 0;
                    pos += 1;
                }
                if pos == idx.len() {
                    break;
                }
            }
            total += c.abs() * best;
        }
        Ok(total)
    }

    /// Tensor-product composite Gauss–Legendre rule over the support box with
    /// `per_dim` nodes per dimension (a multiple of 16), weights multiplied by Q.
    pub fn rule(&self, per_dim: usize) -> XRule {
        let panels = (per_dim / 16).max(1);
        let one_d: Vec<Rule> = self
            .support_box()
            .iter()
            .map(|(lo, hi)| Rule::composite(*lo, *hi, panels, 16))
            .collect();
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut idx = vec![0usize; one_d.len()];
        let len = one_d.first().map_or(0, |r| r.nodes.len());
        if one_d.is_empty() {
            return XRule {
                nodes: vec![Vec::new()],
                weights: vec![self.eval(&[])],
                per_dim: 0,
                stabilization: 0.0,
            };
        }
        loop {
            let x: Vec<f64> = idx.iter().zip(&one_d).map(|(i, r)| r.nodes[*i]).collect();
            let w: f64 = idx.iter().zip(&one_d).map(|(i, r)| r.weights[*i]).product();
            let q = self.eval(&x);
            if q != 0.0 {
                nodes.push(x);
                weights.push(w * q);
            }
            let mut pos = 0;
            while pos < idx.len() {
                idx[pos] += 1;
                if idx[pos] < len {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
            if pos == idx.len() {
                break;
            }
        }
        XRule {
            nodes,
            weights,
            per_dim: panels * 16,
            stabilization: f64::INFINITY,
        }
    }
}

/// Nodes X_a and weights w_a·Q(X_a) of a quadrature over the support of Q.
#[derive(Clone, Debug)]
pub struct XRule {
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub per_dim: usize,
    /// Relative change of the probe pairings at the last doubling.
    pub stabilization: f64,
}

impl XRule {
    /// Σ_a w_a Q(X_a) f(X_a), evaluated in parallel and summed in node order.
    pub fn pair<V: QuadValue + Send>(&self, f: impl Fn(&[f64]) -> Result<V> + Sync) -> Result<V> {
        let values: Vec<Result<V>> = self.nodes.par_iter().map(|x| f(x)).collect();
        let mut acc: Option<V> = None;
        for (v, w) in values.into_iter().zip(&self.weights) {
            let v = v?;
            match &mut acc {
                None => acc = Some(v.scaled(*w)),
                Some(a) => a.add_scaled(*w, &v),
            }
        }
        acc.ok_or_else(|| Error::MissingData("empty quadrature rule".into()))
    }
}

/// Default number of X-nodes per dimension.
pub const DEFAULT_X_NODES: usize = 64;
/// Cap on X-nodes per dimension.
pub const MAX_X_NODES: usize = 512;
/// Relative stabilisation tolerance of the X-rule.
pub const X_RULE_TOL: f64 = 1e-9;

/// A form-valued function of X paired by an [`XRule`].
pub type FormProbe<'a> = &'a (dyn Fn(&[f64]) -> Result<ExteriorElement> + Sync);

/// Chooses the X-rule by doubling the node count from 64 until the paired
/// values of the probes change by at most 1e−9 (relative), stopping at the cap
/// of 512 nodes per dimension.  The last observed change is kept in
/// [`XRule::stabilization`].
pub fn choose_x_rule(q: &TestDensity, probes: &[FormProbe<'_>]) -> Result<XRule> {
    let mut per_dim = DEFAULT_X_NODES;
    let mut rule = q.rule(per_dim);
    let mut values: Vec<ExteriorElement> = probes.iter().map(|p| rule.pair(p)).collect::<Result<_>>()?;
    while per_dim < MAX_X_NODES {
        per_dim *= 2;
        let mut next = q.rule(per_dim);
        let next_values: Vec<ExteriorElement> = probes.iter().map(|p| next.pair(p)).collect::<Result<_>>()?;
        next.stabilization = values
            .iter()
            .zip(&next_values)
            .map(|(a, b)| (a - b).max_abs() / b.max_abs().max(1.0))
            .fold(0.0, f64::max);
        rule = next;
        values = next_values;
        if rule.stabilization <= X_RULE_TOL {
            break;
        }
    }
    Ok(rule)
}

/// The form ∫ β_T(X) Q(X) dX at a point, with its truncation and tail estimate.
#[derive(Clone, Debug)]
pub struct PairedValue {
    pub value: ExteriorElement,
    pub truncation: f64,
    pub tail_estimate: Option<f64>,
}

/// ∫_0^T (∫ η(t, X) Q(X) dX) dt by an X-rule chosen with probes at t = T and
/// T/2 and an adaptive outer t-quadrature.  The tail estimate is ∫_T^{2T} of
/// the paired integrand norm.
pub fn pair_family_with_density(
    eta: &(dyn Fn(f64, &[f64]) -> Result<ExteriorElement> + Sync),
    q: &TestDensity,
    t_max: f64,
) -> Result<PairedValue> {
    let p1 = |x: &[f64]| eta(t_max, x);
    let p2 = |x: &[f64]| eta(0.5 * t_max, x);
    let rule = choose_x_rule(q, &[&p1, &p2])?;
    let failure = std::sync::Mutex::new(None);
    let paired = |t: f64| -> ExteriorElement {
        match rule.pair(|x| eta(t, x)) {
            Ok(v) => v,
            Err(e) => {
                let mut f = failure.lock().expect("poisoned");
                if f.is_none() {
                    *f = Some(e);
                }
                ExteriorElement::zero(0)
            }
        }
    };
    let initial = (t_max.ceil() as usize).max(1);
    let main = adaptive_gk(paired, 0.0, t_max, initial, 1e-11, 50_000);
    let tail = adaptive_gk(
        |t| paired(t).norm(),
        t_max,
        2.0 * t_max.max(1.0),
        initial,
        1e-11,
        50_000,
    );
    if let Some(e) = failure.into_inner().expect("poisoned") {
        return Err(e);
    }
    if !main.converged {
        return Err(Error::QuadratureNonconvergence {
            achieved: main.error,
            requested: 1e-11,
        });
    }
    Ok(PairedValue {
        value: main.value,
        truncation: t_max,
        tail_estimate: if tail.converged { Some(tail.value) } else { None },
    })
}

/// Sign of the boundary value 1/(X ± i0).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundarySign {
    Plus,
    Minus,
}

/// ⟨1/(X ± i0), Q⟩ by the principal value: PV ∫ Q/X ∓ iπ Q(0).
pub fn boundary_value_pv(q: &TestDensity, sign: BoundarySign) -> Result<Complex64> {
    if q.dim() != 1 {
        return Err(Error::DimensionMismatch(
            "boundary values need a one-dimensional Lie algebra".into(),
        ));
    }
    let (lo, hi) = q.support_box()[0];
    let a = lo.abs().max(hi.abs());
    let r = adaptive_gk(
        |x: f64| {
            if x == 0.0 {
                0.0
            } else {
                (q.eval(&[x]) - q.eval(&[-x])) / x
            }
        },
        0.0,
        a,
        16,
        1e-15,
        20_000,
    );
    let pv = r.value;
    let delta = PI * q.eval(&[0.0]);
    Ok(match sign {
        BoundarySign::Plus => Complex64::new(pv, -delta),
        BoundarySign::Minus => Complex64::new(pv, delta),
    })
}

/// Frequency beyond which |Q̂| stays below 1e−14·(1 + |Q̂(0)|).
fn fourier_cutoff(q: &TestDensity) -> f64 {
    let (_, radius) = q.support_ball();
    let scale = 1.0 + q.fourier(&[0.0]).norm();
    let mut t = 10.0 / radius.max(1e-3);
    loop {
        let probe = (0..=16)
            .map(|k| t * (0.5 + k as f64 / 32.0))
            .map(|s| q.fourier(&[s]).norm().max(q.fourier(&[-s]).norm()))
            .fold(0.0, f64::max);
        if probe < 1e-14 * scale || t > 1e5 {
            return t;
        }
        t *= 1.5;
    }
}

/// ⟨1/(X ± i0), Q⟩ = ∓i ∫_0^∞ Q̂(∓t) dt.
pub fn boundary_value_fourier(q: &TestDensity, sign: BoundarySign) -> Result<Complex64> {
    if q.dim() != 1 {
        return Err(Error::DimensionMismatch(
            "boundary values need a one-dimensional Lie algebra".into(),
        ));
    }
    let s = match sign {
        BoundarySign::Plus => 1.0,
        BoundarySign::Minus => -1.0,
    };
    let t_max = fourier_cutoff(q);
    let (lo, hi) = q.support_box()[0];
    let panels = (t_max * (1.0 + lo.abs().max(hi.abs())) / 2.0).ceil() as usize;
    let rule = Rule::composite(0.0, t_max, panels.max(8), 16);
    let values: Vec<Complex64> = rule.nodes.par_iter().map(|t| q.fourier(&[-s * t])).collect();
    let value = rule.integrate_values(&values);
    Ok(-I * s * value)
}

/// ⟨1/(X ± i0), Q⟩ by the principal-value route.
pub fn boundary_value_pairing(q: &TestDensity, sign: BoundarySign) -> Result<Complex64> {
    boundary_value_pv(q, sign)
}

/// Frozen uniform t-rule on [0, T] fine enough for the oscillation e^{−it f(X)}
/// over the support of Q.
pub fn t_rule_for(t_max: f64, frequency: f64) -> PanelRule {
    let per_unit = (4.0f64).max(frequency);
    PanelRule::uniform(0.0, t_max, ((t_max * per_unit).ceil() as usize).max(1))
}

fn max_frequency(spec: &SuperconnectionSpec, q: &TestDensity, pt: &[f64]) -> Result<f64> {
    let data = spec.point_data(pt)?;
    let fx: f64 = data
        .moment_components()
        .iter()
        .zip(q.support_box())
        .map(|(f, (lo, hi))| f.abs() * lo.abs().max(hi.abs()))
        .sum();
    Ok(fx + data.support_indicator().sqrt())
}

/// ‖∫ (D β_T(X) − 1) Q(X) dX‖ at a point off C_λ for the trivial line bundle
/// with one-form λ.
pub fn localization_residual(
    action: &ChartedAction,
    lambda: &InvariantOneForm,
    q: &TestDensity,
    t_max: f64,
    pt: &[f64],
) -> Result<f64> {
    let spec = SuperconnectionSpec::new(action.clone(), 1, 0).with_one_form(lambda.clone());
    let f = crate::calculus::moment_of_one_form(action, lambda, pt)?;
    if f.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-6 {
        return Err(Error::CriticalPoint(format!("{pt:?} is too close to C(λ)")));
    }
    let rule_t = t_rule_for(t_max, max_frequency(&spec, q, pt)?);
    let data = spec.point_data(pt)?;
    let p1 = |x: &[f64]| data.eta(t_max, x);
    let p2 = |x: &[f64]| data.eta(0.5 * t_max, x);
    let p3 = |x: &[f64]| data.chern(t_max, x);
    let xr = choose_x_rule(q, &[&p1, &p2, &p3])?;
    let paired = xr.pair(|x| {
        let mut d = equivariant_differential_of(&|p| beta_on_rule(&spec, &rule_t, x, p), action, pt, x)?;
        *d.coeff_mut(0) -= re(1.0);
        Ok(d)
    })?;
    Ok(paired.max_abs())
}

/// Residuals of the two one-form-sum identities at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct OneFormSumResidual {
    /// ‖paired[D I₁ − β(λ+μ) + β(λ)]‖ when the point lies in U₁.
    pub u1: Option<f64>,
    /// ‖paired[D I₂ + β(λ+μ) − β(μ)]‖ when the point lies in U₂.
    pub u2: Option<f64>,
}

struct FactorSeries {
    eta: Vec<ExteriorElement>,
    ch: Vec<ExteriorElement>,
    eta_moment: Vec<Vec<ExteriorElement>>,
}

fn factor_series(
    spec: &SuperconnectionSpec,
    nodes: &[f64],
    xr: &XRule,
    embed: &dyn Fn(&[f64]) -> Vec<f64>,
    pt: &[f64],
) -> Result<FactorSeries> {
    let data = spec.point_data(pt)?;
    let n = spec.action().chart_dim();
    let k = xr.nodes.first().map_or(0, |x| x.len());
    let mut eta = Vec::with_capacity(nodes.len());
    let mut ch = Vec::with_capacity(nodes.len());
    let mut eta_moment = vec![Vec::with_capacity(nodes.len()); k];
    for &s in nodes {
        let per_x: Vec<(ExteriorElement, ExteriorElement)> = xr
            .nodes
            .iter()
            .map(|x| data.chern_and_eta(s, &embed(x)))
            .collect::<Result<_>>()?;
        let mut e = ExteriorElement::zero(n);
        let mut c = ExteriorElement::zero(n);
        let mut m = vec![ExteriorElement::zero(n); k];
        for ((x, w), (cv, ev)) in xr.nodes.iter().zip(&xr.weights).zip(&per_x) {
            e.axpy(re(*w), ev);
            c.axpy(re(*w), cv);
            for (j, mj) in m.iter_mut().enumerate() {
                mj.axpy(re(*w * x[j]), ev);
            }
        }
        eta.push(e);
        ch.push(c);
        for (j, mj) in m.into_iter().enumerate() {
            eta_moment[j].push(mj);
        }
    }
    Ok(FactorSeries { eta, ch, eta_moment })
}

/// Gauss–Legendre panels on [0, S] with cumulative-integration matrices.
struct CumulativeRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    panel_width: f64,
    order: usize,
    smat: Vec<f64>,
}

impl CumulativeRule {
    fn new(s_max: f64, panels: usize, order: usize) -> Self {
        let (x, w, smat) = integration_matrix(order);
        let h = s_max / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            for j in 0..order {
                nodes.push((p as f64 + x[j]) * h);
                weights.push(w[j] * h);
            }
        }
        Self {
            nodes,
            weights,
            panel_width: h,
            order,
            smat,
        }
    }

    /// ∫_0^{s_i} f at every node s_i.
    fn cumulative(&self, f: &[ExteriorElement]) -> Vec<ExteriorElement> {
        let m = self.order;
        let n = f.first().map_or(0, |e| e.n_generators());
        let mut out = Vec::with_capacity(f.len());
        let mut carry = ExteriorElement::zero(n);
        for panel in f.chunks(m) {
            for i in 0..m {
                let mut v = carry.clone();
                for j in 0..m {
                    v.axpy(re(self.smat[i * m + j] * self.panel_width), &panel[j]);
                }
                out.push(v);
            }
            for j in 0..m {
                carry.axpy(re(self.weights[out.len() - m + j]), &panel[j]);
            }
        }
        out
    }

    fn integrate(&self, f: &[ExteriorElement]) -> ExteriorElement {
        let n = f.first().map_or(0, |e| e.n_generators());
        let mut acc = ExteriorElement::zero(n);
        for (w, v) in self.weights.iter().zip(f) {
            acc.axpy(re(*w), v);
        }
        acc
    }
}

fn wedge_series(a: &[ExteriorElement], b: &[ExteriorElement]) -> Vec<ExteriorElement> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

/// Residuals of D(I₁) = β(λ+μ) − β(λ) on U₁ and D(I₂) = −β(λ+μ) + β(μ) on
/// U₂, at truncation S, paired with Q₁ ⊗ Q₂ on 𝔨₁ × 𝔨₂.
///
/// The chart carries an action of K₁ × K₂ whose Lie algebra coordinates are
/// ordered (X, Y) with dim 𝔨₁ = `k1`.  λ must have moment in 𝔨₁* and μ in 𝔨₂*
/// near the point, so that η(λ) depends on X only and η(μ) on Y only.
#[allow(clippy::too_many_arguments)]
pub fn one_form_sum_identity_residual(
    action: &ChartedAction,
    lambda: &InvariantOneForm,
    mu: &InvariantOneForm,
    k1: usize,
    q1: &TestDensity,
    q2: &TestDensity,
    s_max: f64,
    pt: &[f64],
) -> Result<OneFormSumResidual> {
    let k = action.lie_dim();
    if q1.dim() != k1 || q2.dim() + k1 != k {
        return Err(Error::DimensionMismatch("densities do not match 𝔨₁ × 𝔨₂".into()));
    }
    let fl = crate::calculus::moment_of_one_form(action, lambda, pt)?;
    let fm = crate::calculus::moment_of_one_form(action, mu, pt)?;
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm(&fl[k1..]) > 1e-12 || norm(&fm[..k1]) > 1e-12 {
        return Err(Error::AssumptionFailed(
            "λ must pair only with 𝔨₁ and μ only with 𝔨₂".into(),
        ));
    }
    let in_u1 = norm(&fm[..k1]) < norm(&fl[..k1]);
    let in_u2 = norm(&fl[k1..]) < norm(&fm[k1..]);
    if !in_u1 && !in_u2 {
        return Err(Error::CriticalPoint(format!("{pt:?} lies in neither U₁ nor U₂")));
    }
    let spec1 = SuperconnectionSpec::new(action.clone(), 1, 0).with_one_form(lambda.clone());
    let spec2 = SuperconnectionSpec::new(action.clone(), 1, 0).with_one_form(mu.clone());
    let k2 = k - k1;
    let embed1 = move |x: &[f64]| {
        let mut v = x.to_vec();
        v.resize(k, 0.0);
        v
    };
    let embed2 = move |y: &[f64]| {
        let mut v = vec![0.0; k1];
        v.extend_from_slice(y);
        v
    };
    let d1 = spec1.point_data(pt)?;
    let d2 = spec2.point_data(pt)?;
    let p1a = |x: &[f64]| d1.eta(s_max, &embed1(x));
    let p1b = |x: &[f64]| d1.eta(0.5 * s_max, &embed1(x));
    let p2a = |y: &[f64]| d2.eta(s_max, &embed2(y));
    let p2b = |y: &[f64]| d2.eta(0.5 * s_max, &embed2(y));
    let xr1 = choose_x_rule(q1, &[&p1a, &p1b])?;
    let xr2 = choose_x_rule(q2, &[&p2a, &p2b])?;
    let freq = max_frequency(&spec1, q1, pt)?.max(max_frequency(&spec2, q2, pt)?) * 1.5;
    let panels = ((s_max * (4.0f64).max(freq) / 4.0).ceil() as usize).max(1);
    let cr = CumulativeRule::new(s_max, panels, 16);
    let mass1 = xr1.weights.iter().sum::<f64>();
    let mass2 = xr2.weights.iter().sum::<f64>();

    // Paired I₁ and I₂ against Q and against X_j Q, as functions of the point.
    let paired_integrals = |p: &[f64]| -> Result<Vec<(ExteriorElement, ExteriorElement)>> {
        let a = factor_series(&spec1, &cr.nodes, &xr1, &embed1, p)?;
        let b = factor_series(&spec2, &cr.nodes, &xr2, &embed2, p)?;
        let cum_a = cr.cumulative(&a.eta);
        let cum_b = cr.cumulative(&b.eta);
        let i1 = cr.integrate(&wedge_series(&a.eta, &cum_b));
        let i2 = cr.integrate(&wedge_series(&cum_a, &b.eta));
        let mut out = vec![(i1, i2)];
        for j in 0..k1 {
            let cum_am = cr.cumulative(&a.eta_moment[j]);
            out.push((
                cr.integrate(&wedge_series(&a.eta_moment[j], &cum_b)),
                cr.integrate(&wedge_series(&cum_am, &b.eta)),
            ));
        }
        for j in 0..k2 {
            let cum_bm = cr.cumulative(&b.eta_moment[j]);
            out.push((
                cr.integrate(&wedge_series(&a.eta, &cum_bm)),
                cr.integrate(&wedge_series(&cum_a, &b.eta_moment[j])),
            ));
        }
        Ok(out)
    };
    let flatten = |p: &[f64]| -> Result<Vec<ExteriorElement>> {
        Ok(paired_integrals(p)?.into_iter().flat_map(|(a, b)| [a, b]).collect())
    };
    let center = flatten(pt)?;
    let partials = crate::calculus::partial_derivatives(&flatten, pt, &|p| action.contains(p))?;
    let fields = action.generator_fields(pt);
    let d_of = |which: usize| -> Result<ExteriorElement> {
        let parts: Vec<ExteriorElement> = partials.iter().map(|v| v[which].clone()).collect();
        let mut d = crate::calculus::exterior_derivative_from_partials(&parts)?;
        for (j, vj) in fields.iter().enumerate() {
            d -= &center[2 * (j + 1) + which].interior(vj);
        }
        Ok(d)
    };
    let d_i1 = d_of(0)?;
    let d_i2 = d_of(1)?;

    let a = factor_series(&spec1, &cr.nodes, &xr1, &embed1, pt)?;
    let b = factor_series(&spec2, &cr.nodes, &xr2, &embed2, pt)?;
    let mut beta_sum = cr.integrate(&wedge_series(&a.eta, &b.ch));
    beta_sum += &cr.integrate(&wedge_series(&a.ch, &b.eta));
    let beta_l = cr.integrate(&a.eta).scale_re(mass2);
    let beta_m = cr.integrate(&b.eta).scale_re(mass1);
    let u1 = if in_u1 {
        let mut r = d_i1.clone();
        r -= &beta_sum;
        r += &beta_l;
        Some(r.max_abs())
    } else {
        None
    };
    let u2 = if in_u2 {
        let mut r = d_i2.clone();
        r += &beta_sum;
        r -= &beta_m;
        Some(r.max_abs())
    } else {
        None
    };
    Ok(OneFormSumResidual { u1, u2 })
}

/// Pointwise pieces of the multiplicativity identity at one X.
fn product_terms(
    spec1: &SuperconnectionSpec,
    spec2: &SuperconnectionSpec,
    cr: &CumulativeRule,
    x: &[f64],
    p: &[f64],
) -> Result<[ExteriorElement; 7]> {
    let d1 = spec1.point_data(p)?;
    let d2 = spec2.point_data(p)?;
    let mut e1 = Vec::with_capacity(cr.nodes.len());
    let mut e2 = Vec::with_capacity(cr.nodes.len());
    let mut c1 = Vec::with_capacity(cr.nodes.len());
    let mut c2 = Vec::with_capacity(cr.nodes.len());
    for &t in &cr.nodes {
        let (a, b) = d1.chern_and_eta(t, x)?;
        let (c, d) = d2.chern_and_eta(t, x)?;
        c1.push(a);
        e1.push(b);
        c2.push(c);
        e2.push(d);
    }
    let b1 = cr.cumulative(&e1);
    let b2 = cr.cumulative(&e2);
    let i1 = cr.integrate(&wedge_series(&e1, &b2));
    let i2 = cr.integrate(&wedge_series(&b1, &e2));
    let mut beta12 = cr.integrate(&wedge_series(&e1, &c2));
    beta12 += &cr.integrate(&wedge_series(&c1, &e2));
    let beta1 = cr.integrate(&e1);
    let beta2 = cr.integrate(&e2);
    Ok([i1, i2, beta12, beta1, beta2, d1.chern(0.0, x)?, d2.chern(0.0, x)?])
}

/// ‖paired[−D(I_Φ) − (Φ₁β₁c₂(0) + c₁(0)Φ₂β₂ − dΦ₁β₁β₂ − β₁₂)]‖ at truncation T,
/// with I_Φ = Φ₁I₁ − Φ₂I₂ and everything computed from the two factors.
pub fn multiplicativity_residual(
    spec1: &SuperconnectionSpec,
    spec2: &SuperconnectionSpec,
    phi: &PartitionOfUnity,
    q: &TestDensity,
    t_max: f64,
    pt: &[f64],
) -> Result<f64> {
    let action = spec1.action();
    if action.lie_dim() != q.dim() || spec2.action().lie_dim() != q.dim() {
        return Err(Error::DimensionMismatch(
            "density does not match the Lie algebra".into(),
        ));
    }
    let freq = max_frequency(spec1, q, pt)?.max(max_frequency(spec2, q, pt)?) * 1.5;
    let panels = ((t_max * (4.0f64).max(freq) / 4.0).ceil() as usize).max(1);
    let cr = CumulativeRule::new(t_max, panels, 16);
    let d1 = spec1.point_data(pt)?;
    let d2 = spec2.point_data(pt)?;
    let probe = |x: &[f64]| -> Result<ExteriorElement> {
        let mut v = d1.eta(t_max, x)?;
        v += &d2.eta(t_max, x)?;
        v += &d1.chern(t_max, x)?;
        v += &d2.chern(t_max, x)?;
        Ok(v)
    };
    let probe_half = |x: &[f64]| -> Result<ExteriorElement> {
        let mut v = d1.eta(0.5 * t_max, x)?;
        v += &d2.eta(0.5 * t_max, x)?;
        Ok(v)
    };
    let xr = choose_x_rule(q, &[&probe, &probe_half])?;
    let (f1, f2) = phi.values(pt)?;
    let dphi = phi.d_phi1(pt)?;
    let paired = xr.pair(|x| {
        let i_phi = |p: &[f64]| -> Result<ExteriorElement> {
            let (g1, g2) = phi.values(p)?;
            let t = product_terms(spec1, spec2, &cr, x, p)?;
            let mut v = t[0].scale_re(g1);
            v.axpy(re(-g2), &t[1]);
            Ok(v)
        };
        let d_i = equivariant_differential_of(&i_phi, action, pt, x)?;
        let [_, _, beta12, beta1, beta2, c10, c20] = product_terms(spec1, spec2, &cr, x, pt)?;
        let mut r = d_i.scale_re(-1.0);
        r -= &(&beta1 * &c20).scale_re(f1);
        r -= &(&c10 * &beta2).scale_re(f2);
        r += &(&dphi * &(&beta1 * &beta2));
        r += &beta12;
        Ok(r)
    })?;
    Ok(paired.max_abs())
}

/// The two routes of ⟨Θ, Q⟩ for V = ℂ with a weight-w circle action.
#[derive(Clone, Debug)]
pub struct ThetaPairing {
    /// ε-regularized Cartesian route with Richardson extrapolation in ε.
    pub regularized: Complex64,
    /// Homogeneity route through ∫_V χ e^{iT Dω(X)} at large T.
    pub homogeneity: Complex64,
}

impl ThetaPairing {
    /// |regularized − homogeneity|.
    pub fn agreement(&self) -> f64 {
        (self.regularized - self.homogeneity).norm()
    }
}

/// Checks Φ⁻¹(0) = {0} for Φ(v) = ½ Σ_j |v_j|² w_j by finding X with
/// ⟨w_j, X⟩ > 0 for every j (perceptron iteration).
pub fn check_proper(weights: &[Vec<f64>]) -> Result<Vec<f64>> {
    let k = weights.first().map_or(0, |w| w.len());
    if weights.iter().any(|w| w.len() != k) || k == 0 {
        return Err(Error::DimensionMismatch("inconsistent weight vectors".into()));
    }
    if weights.iter().any(|w| w.iter().all(|x| *x == 0.0)) {
        return Err(Error::NotProper("a weight vanishes".into()));
    }
    let mut x = vec![0.0; k];
    for _ in 0..10_000 {
        let mut updated = false;
        for w in weights {
            let dot: f64 = w.iter().zip(&x).map(|(a, b)| a * b).sum();
            if dot <= 0.0 {
                for (xi, wi) in x.iter_mut().zip(w) {
                    *xi += wi;
                }
                updated = true;
            }
        }
        if !updated {
            return Ok(x);
        }
    }
    Err(Error::NotProper("no X with ⟨w_j, X⟩ > 0 for all weights".into()))
}

/// ε-regularization schedule for the Cartesian route.
pub const THETA_EPSILONS: [f64; 4] = [1e-2, 5e-3, 2.5e-3, 1.25e-3];
/// Truncation used by the homogeneity route.
pub const THETA_T: f64 = 200.0;

/// ∫_ℝ e^{(−ε + i a) x²} dx by composite Gauss–Legendre quadrature.
fn gaussian_line_integral(eps: f64, a: f64) -> Complex64 {
    let l = (40.0 / eps).sqrt();
    let phase = a.abs() * l * l;
    let panels = 16 + (phase / 6.0).ceil() as usize;
    let rule = Rule::composite(0.0, l, panels, 16);
    let c = Complex64::new(-eps, a);
    rule.integrate(|x| (c * x * x).exp()) * 2.0
}

/// ⟨Θ, Q⟩ for V = ℂ with weight w, Θ(X) = i ∫_V e^{i⟨Φ(v), X⟩} dv and
/// Φ(v) = ½ w |v|², by the two routes.
pub fn symplectic_theta_pairing(weight: f64, q: &TestDensity) -> Result<ThetaPairing> {
    check_proper(&[vec![weight]])?;
    if q.dim() != 1 {
        return Err(Error::DimensionMismatch(
            "Θ pairing is implemented for a circle action".into(),
        ));
    }
    let (lo, hi) = q.support_box()[0];

    // Cartesian route: the v-integral factorizes over the real coordinates.
    let regularized_at = |eps: f64| -> Complex64 {
        let f = |x: f64| -> Complex64 {
            let qx = q.eval(&[x]);
            if qx == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let g = gaussian_line_integral(eps, 0.5 * weight * x);
            I * g * g * qx
        };
        let mut breaks = vec![lo, hi];
        if lo < 0.0 && hi > 0.0 {
            breaks = vec![lo, 0.0, hi];
        }
        let mut total = Complex64::new(0.0, 0.0);
        for w in breaks.windows(2) {
            total += adaptive_gk(f, w[0], w[1], 32, 1e-12, 20_000).value;
        }
        total
    };
    let v: Vec<Complex64> = THETA_EPSILONS.iter().map(|e| regularized_at(*e)).collect();
    // Richardson extrapolation removing the ε, ε² and ε³ terms.
    let r2 = |a: Complex64, b: Complex64, c: Complex64| (c * 8.0 - b * 6.0 + a) / 3.0;
    let regularized = (r2(v[1], v[2], v[3]) * 8.0 - r2(v[0], v[1], v[2])) / 7.0;

    // Homogeneity route: ∫ χ(u/√T) top(e^{iDω(X)}(u)) du with the Dω of
    // ω = ½ w (x dy − y dx) for the action V X = X w (y, −x).
    let action = ChartedAction::linear(vec![nalgebra::DMatrix::from_row_slice(
        2,
        2,
        &[0.0, weight, -weight, 0.0],
    )]);
    let omega = InvariantOneForm::new(|p: &[f64]| vec![-0.5 * p[1], 0.5 * p[0]])
        .with_jacobian(|_| nalgebra::DMatrix::from_row_slice(2, 2, &[0.0, -0.5, 0.5, 0.0]));
    let t = THETA_T;
    let r_max = 2.0 * t.sqrt();
    let x_extent = lo.abs().max(hi.abs());
    let top_paired = |r: f64| -> Result<Complex64> {
        let u = [r, 0.0];
        let phase = 0.5 * weight.abs() * r * r * (hi - lo);
        let panels = 8 + (phase / 4.0).ceil() as usize;
        let xr = Rule::composite(lo, hi, panels, 16);
        let mut acc = Complex64::new(0.0, 0.0);
        for (x, w) in xr.nodes.iter().zip(&xr.weights) {
            let qx = q.eval(&[*x]);
            if qx == 0.0 {
                continue;
            }
            let d = omega.equivariant_differential(&action, &u, &[*x])?;
            acc += d.scale(I).exp().top_coeff() * (w * qx);
        }
        Ok(acc)
    };
    let chi = |r: f64| crate::chern::smooth_step(r / t.sqrt(), 1.0, 2.0).0;
    let radial_panels = 64 + (0.5 * weight.abs() * r_max * r_max * x_extent / 8.0).ceil() as usize;
    let (gx, gw) = gauss_legendre(16);
    let h = r_max / radial_panels as f64;
    let mut homogeneity = Complex64::new(0.0, 0.0);
    let mut failure = None;
    for p in 0..radial_panels {
        for (x, w) in gx.iter().zip(&gw) {
            let r = h * (p as f64 + 0.5 * (x + 1.0));
            let c = chi(r);
            if c == 0.0 {
                continue;
            }
            match top_paired(r) {
                Ok(v) => homogeneity += v * (c * r * 2.0 * PI * 0.5 * w * h),
                Err(e) => failure = Some(e),
            }
        }
    }
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(ThetaPairing {
        regularized,
        homogeneity,
    })
}

/// The radial closed form 2πi ∫_0^∞ Q̂(−w u) du / w = −(2π/w)⟨1/(X + i0), Q⟩ for w > 0.
pub fn theta_radial_oracle(weight: f64, q: &TestDensity) -> Result<Complex64> {
    let sign = if weight > 0.0 {
        BoundarySign::Plus
    } else {
        BoundarySign::Minus
    };
    Ok(boundary_value_pv(q, sign)? * (-2.0 * PI / weight))
}
