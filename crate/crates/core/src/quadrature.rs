//! Gauss–Legendre rules, composite rules and adaptive Gauss–Kronrod panels.
//!
//! Integrands may be vector-valued: any type implementing [`QuadValue`] can be
//! integrated.  An adaptive run returns the panel partition it settled on so
//! that the same frozen rule can be reused at neighbouring points, which keeps
//! finite differences of the integral smooth.

use crate::error::{Error, Result};
use crate::exterior::ExteriorElement;
use num_complex::Complex64;

/// Values that can be accumulated by a quadrature rule.
pub trait QuadValue: Clone {
    /// `self += a * other`.
    fn add_scaled(&mut self, a: f64, other: &Self);
    /// `a * self`.
    fn scaled(&self, a: f64) -> Self;
    /// Size used for error control.
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn add_scaled(&mut self, a: f64, other: &Self) {
        *self += a * other;
    }
    fn scaled(&self, a: f64) -> Self {
        a * self
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn add_scaled(&mut self, a: f64, other: &Self) {
        *self += other * a;
    }
    fn scaled(&self, a: f64) -> Self {
        self * a
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

impl QuadValue for ExteriorElement {
    fn add_scaled(&mut self, a: f64, other: &Self) {
        self.axpy(Complex64::new(a, 0.0), other);
    }
    fn scaled(&self, a: f64) -> Self {
        self.scale_re(a)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

impl<T: QuadValue> QuadValue for Vec<T> {
    fn add_scaled(&mut self, a: f64, other: &Self) {
        for (x, y) in self.iter_mut().zip(other) {
            x.add_scaled(a, y);
        }
    }
    fn scaled(&self, a: f64) -> Self {
        self.iter().map(|x| x.scaled(a)).collect()
    }
    fn magnitude(&self) -> f64 {
        self.iter().map(QuadValue::magnitude).sum()
    }
}

/// Nodes and weights of the m-point Gauss–Legendre rule on [−1, 1].
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1, "rule needs at least one node");
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    let half = m.div_ceil(2);
    for i in 0..half {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for k in 0..m {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * k + 1) as f64 * z * p1 - k as f64 * p2) / (k + 1) as f64;
            }
            dp = m as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[m - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[m - 1 - i] = w[i];
    }
    (x, w)
}

/// A quadrature rule given by explicit nodes and weights.
#[derive(Clone, Debug)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    /// Composite Gauss–Legendre rule with `panels` equal panels of `order` nodes on [a, b].
    pub fn composite(a: f64, b: f64, panels: usize, order: usize) -> Self {
        let (x, w) = gauss_legendre(order);
        let h = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let lo = a + p as f64 * h;
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(lo + 0.5 * h * (xi + 1.0));
                weights.push(0.5 * h * wi);
            }
        }
        Self { nodes, weights }
    }

    /// Rule made of `order`-point Gauss–Legendre rules on each of the given panels.
    pub fn on_panels(panels: &[(f64, f64)], order: usize) -> Self {
        let (x, w) = gauss_legendre(order);
        let mut nodes = Vec::with_capacity(panels.len() * order);
        let mut weights = Vec::with_capacity(panels.len() * order);
        for &(lo, hi) in panels {
            let h = hi - lo;
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(lo + 0.5 * h * (xi + 1.0));
                weights.push(0.5 * h * wi);
            }
        }
        Self { nodes, weights }
    }

    /// Applies the rule to `f`.
    pub fn integrate<T: QuadValue>(&self, f: impl Fn(f64) -> T) -> T {
        let mut acc: Option<T> = None;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let v = f(*x);
            match acc.as_mut() {
                Some(a) => a.add_scaled(*w, &v),
                None => acc = Some(v.scaled(*w)),
            }
        }
        acc.expect("rule has at least one node")
    }

    /// Applies the rule to precomputed values at the nodes.
    pub fn integrate_values<T: QuadValue>(&self, values: &[T]) -> T {
        let mut acc = values[0].scaled(self.weights[0]);
        for (v, w) in values.iter().zip(&self.weights).skip(1) {
            acc.add_scaled(*w, v);
        }
        acc
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// The 15 Kronrod nodes mapped to [a, b], with Kronrod and embedded Gauss weights.
fn kronrod_nodes(a: f64, b: f64) -> [(f64, f64, f64); 15] {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut out = [(0.0, 0.0, 0.0); 15];
    let mut k = 0;
    for j in 0..7 {
        let g = if j % 2 == 1 { WG[j / 2] } else { 0.0 };
        out[k] = (c - h * XGK[j], h * WGK[j], h * g);
        out[k + 1] = (c + h * XGK[j], h * WGK[j], h * g);
        k += 2;
    }
    out[14] = (c, h * WGK[7], h * WG[3]);
    out
}

fn gk_panel<T: QuadValue>(f: &impl Fn(f64) -> T, a: f64, b: f64) -> (T, f64) {
    let nodes = kronrod_nodes(a, b);
    let first = f(nodes[0].0);
    let mut kron = first.scaled(nodes[0].1);
    let mut gauss = first.scaled(nodes[0].2);
    for &(x, wk, wg) in nodes.iter().skip(1) {
        let v = f(x);
        kron.add_scaled(wk, &v);
        if wg != 0.0 {
            gauss.add_scaled(wg, &v);
        }
    }
    let mut diff = kron.clone();
    diff.add_scaled(-1.0, &gauss);
    (kron, diff.magnitude())
}

/// Outcome of an adaptive integration.
#[derive(Clone, Debug)]
pub struct Adaptive<T> {
    pub value: T,
    pub error: f64,
    pub panels: Vec<(f64, f64)>,
    pub converged: bool,
}

/// Adaptive Gauss–Kronrod (7/15) integration on [a, b].
///
/// The interval is first cut into `initial` equal panels; any panel whose
/// Kronrod–Gauss difference exceeds `panel_tol` is bisected, up to
/// `max_panels` panels in total.
pub fn adaptive_gk<T: QuadValue>(
    f: impl Fn(f64) -> T,
    a: f64,
    b: f64,
    initial: usize,
    panel_tol: f64,
    max_panels: usize,
) -> Adaptive<T> {
    let initial = initial.max(1);
    let h = (b - a) / initial as f64;
    let mut work: Vec<(f64, f64, T, f64)> = (0..initial)
        .map(|i| {
            let lo = a + i as f64 * h;
            let hi = if i + 1 == initial { b } else { lo + h };
            let (v, e) = gk_panel(&f, lo, hi);
            (lo, hi, v, e)
        })
        .collect();
    loop {
        if work.len() >= max_panels {
            break;
        }
        let worst = work
            .iter()
            .enumerate()
            .filter(|(_, w)| w.3 > panel_tol && (w.1 - w.0) > 1e-12 * (b - a).abs().max(1.0))
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i);
        let Some(i) = worst else { break };
        let (lo, hi, _, _) = work.swap_remove(i);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk_panel(&f, lo, mid);
        let (v2, e2) = gk_panel(&f, mid, hi);
        work.push((lo, mid, v1, e1));
        work.push((mid, hi, v2, e2));
    }
    work.sort_by(|x, y| x.0.total_cmp(&y.0));
    let converged = work.iter().all(|w| w.3 <= panel_tol);
    let error = work.iter().map(|w| w.3).sum();
    let mut value = work[0].2.clone();
    for w in work.iter().skip(1) {
        value.add_scaled(1.0, &w.2);
    }
    Adaptive {
        value,
        error,
        panels: work.iter().map(|w| (w.0, w.1)).collect(),
        converged,
    }
}

/// A frozen panel partition evaluated with the 15-point Kronrod rule on each panel.
#[derive(Clone, Debug)]
pub struct PanelRule {
    rule: Rule,
    panels: Vec<(f64, f64)>,
}

impl PanelRule {
    /// Freezes the given partition.
    pub fn new(panels: Vec<(f64, f64)>) -> Self {
        let mut nodes = Vec::with_capacity(panels.len() * 15);
        let mut weights = Vec::with_capacity(panels.len() * 15);
        for &(lo, hi) in &panels {
            for (x, wk, _) in kronrod_nodes(lo, hi) {
                nodes.push(x);
                weights.push(wk);
            }
        }
        Self {
            rule: Rule { nodes, weights },
            panels,
        }
    }

    /// Uniform partition of [a, b] into `count` panels.
    pub fn uniform(a: f64, b: f64, count: usize) -> Self {
        let h = (b - a) / count as f64;
        Self::new(
            (0..count)
                .map(|i| {
                    (
                        a + i as f64 * h,
                        if i + 1 == count { b } else { a + (i + 1) as f64 * h },
                    )
                })
                .collect(),
        )
    }

    /// The panels of the partition.
    pub fn panels(&self) -> &[(f64, f64)] {
        &self.panels
    }

    /// The underlying node/weight rule.
    pub fn rule(&self) -> &Rule {
        &self.rule
    }

    /// Applies the frozen rule.
    pub fn integrate<T: QuadValue>(&self, f: impl Fn(f64) -> T) -> T {
        self.rule.integrate(f)
    }
}

/// Spectral integration matrix for the m-point Gauss–Legendre nodes on [0, 1]:
/// entry (i, j) is ∫_0^{x_i} ℓ_j(s) ds for the Lagrange basis ℓ_j of the nodes.
pub fn integration_matrix(m: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(m);
    let nodes: Vec<f64> = x.iter().map(|v| 0.5 * (v + 1.0)).collect();
    let weights: Vec<f64> = w.iter().map(|v| 0.5 * v).collect();
    let lagrange = |j: usize, s: f64| -> f64 {
        let mut v = 1.0;
        for (k, xk) in nodes.iter().enumerate() {
            if k != j {
                v *= (s - xk) / (nodes[j] - xk);
            }
        }
        v
    };
    let mut s = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            let mut acc = 0.0;
            for k in 0..m {
                acc += weights[k] * lagrange(j, nodes[i] * nodes[k]);
            }
            s[i * m + j] = nodes[i] * acc;
        }
    }
    (nodes, weights, s)
}

/// Ensures an adaptive result converged, turning failure into an error.
pub fn require_converged<T>(r: Adaptive<T>, tol: f64) -> Result<Adaptive<T>> {
    if r.converged {
        Ok(r)
    } else {
        Err(Error::QuadratureNonconvergence {
            achieved: r.error,
            requested: tol,
        })
    }
}

impl QuadValue for crate::graded::GradedMatrixForm {
    fn add_scaled(&mut self, a: f64, other: &Self) {
        self.axpy(Complex64::new(a, 0.0), other);
    }
    fn scaled(&self, a: f64) -> Self {
        self.scale(Complex64::new(a, 0.0))
    }
    fn magnitude(&self) -> f64 {
        self.raw().iter().map(|c| c.norm()).sum()
    }
}

impl QuadValue for nalgebra::DMatrix<Complex64> {
    fn add_scaled(&mut self, a: f64, other: &Self) {
        *self += other * Complex64::new(a, 0.0);
    }
    fn scaled(&self, a: f64) -> Self {
        self * Complex64::new(a, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.iter().map(|c| c.norm()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_integrates_oscillatory_function() {
        let r = adaptive_gk(|t: f64| (10.0 * t).cos(), 0.0, 3.0, 4, 1e-13, 200);
        assert!(r.converged);
        assert!((r.value - (30.0f64).sin() / 10.0).abs() < 1e-12);
    }

    #[test]
    fn integration_matrix_is_exact_for_cubics() {
        let m = 6;
        let (nodes, _, s) = integration_matrix(m);
        for i in 0..m {
            let approx: f64 = (0..m).map(|j| s[i * m + j] * nodes[j].powi(3)).sum();
            assert!((approx - nodes[i].powi(4) / 4.0).abs() < 1e-14);
        }
    }
}
