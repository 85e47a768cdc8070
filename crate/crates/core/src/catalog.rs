//! Worked examples with closed-form oracles.
//!
//! Each case packages a chart, an action, an invariant one-form and a
//! superconnection.  The oracle functions below are written out by hand in
//! coordinates and never call the engine.

use crate::calculus::{liouville_data, ChartedAction, InvariantOneForm};
use crate::chern::{PartitionOfUnity, SuperconnectionSpec, SymbolMorphism};
use crate::error::{Error, Result};
use crate::exterior::ExteriorElement;
use crate::generalized::{Profile, TestDensity};
use crate::graded::GradedMatrixForm;
use crate::quadrature::adaptive_gk;
use nalgebra::DMatrix;
use num_complex::Complex64;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// A worked example: chart, action, one-form, superconnection and sample grid.
#[derive(Clone)]
pub struct ExampleCase {
    pub name: &'static str,
    pub action: ChartedAction,
    pub one_form: Option<InvariantOneForm>,
    pub spec: SuperconnectionSpec,
    /// Canonical chart points, all inside the chart domain.
    pub sample_points: Vec<Vec<f64>>,
    /// Canonical Lie algebra elements.
    pub sample_x: Vec<Vec<f64>>,
    /// Sample values of the superconnection parameter t.
    pub sample_t: Vec<f64>,
    /// Tolerance for engine-versus-oracle comparisons.
    pub tolerance: f64,
}

/// Names of the catalog entries, in listing order.
pub const CASE_NAMES: [&str; 5] = [
    "plane_rotation",
    "cotangent_circle",
    "atiyah",
    "exact_symplectic",
    "torus",
];

/// Looks up a catalog entry by name.
pub fn case_by_name(name: &str) -> Result<ExampleCase> {
    match name {
        "plane_rotation" => Ok(plane_rotation_case()),
        "cotangent_circle" => cotangent_circle_case(),
        "atiyah" => Ok(atiyah_case(ATIYAH_FIBRE_SIGN)),
        "exact_symplectic" => Ok(exact_symplectic_case()),
        "torus" => Ok(torus_case().as_example()),
        other => Err(Error::UnknownSelector(other.to_string())),
    }
}

fn rotation_matrix() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])
}

/// U(1) acting on ℝ² by rotations, V X = X(y∂ₓ − x∂_y).
pub fn plane_rotation_action() -> ChartedAction {
    ChartedAction::linear(vec![rotation_matrix()])
}

/// λ = x dy − y dx.
pub fn plane_rotation_one_form() -> InvariantOneForm {
    InvariantOneForm::new(|p| vec![-p[1], p[0]])
        .with_jacobian(|_| DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]))
}

/// Trivial line bundle on ℝ² ∖ {0} with the rotation action and λ = x dy − y dx.
pub fn plane_rotation_case() -> ExampleCase {
    let action = plane_rotation_action().with_domain(|p| p[0] * p[0] + p[1] * p[1] > 0.0);
    let lambda = plane_rotation_one_form();
    let spec = SuperconnectionSpec::new(action.clone(), 1, 0).with_one_form(lambda.clone());
    let mut sample_points = Vec::new();
    for &r in &[0.5, 1.0, 1.7] {
        for k in 0..3 {
            let a = 0.4 + 2.1 * k as f64;
            sample_points.push(vec![r * a.cos(), r * a.sin()]);
        }
    }
    ExampleCase {
        name: "plane_rotation",
        action,
        one_form: Some(lambda),
        spec,
        sample_points,
        sample_x: vec![vec![-1.3], vec![0.7], vec![2.0]],
        sample_t: vec![0.25, 0.5, 1.5],
        tolerance: 1e-6,
    }
}

/// Dλ(X) = 2 dx∧dy + X(x² + y²) for the plane rotation.
pub fn plane_rotation_d_lambda(p: &[f64], x: f64) -> ExteriorElement {
    let mut e = ExteriorElement::zero(2);
    *e.coeff_mut(0) = c(x * (p[0] * p[0] + p[1] * p[1]));
    *e.coeff_mut(0b11) = c(2.0);
    e
}

/// Coefficients (a, b) of (x dy − y dx)/(x² + y²) = a dx + b dy, the form
/// multiplying 1/(X + i0) in β(λ).
pub fn plane_rotation_beta_form(p: &[f64]) -> [f64; 2] {
    let r2 = p[0] * p[0] + p[1] * p[1];
    [-p[1] / r2, p[0] / r2]
}

/// The circle acting on itself by V_θ X = −X.
pub fn circle_action() -> ChartedAction {
    ChartedAction::new(1, 1, |_| vec![vec![-1.0]]).with_jacobians(|_| vec![DMatrix::zeros(1, 1)])
}

/// T*S¹ with chart (θ, ξ), the lifted action and the Liouville form λ = −ξ dθ.
pub fn cotangent_circle_case() -> Result<ExampleCase> {
    let action = circle_action().cotangent_lift()?;
    let (lambda, _) = liouville_data(&action)?;
    let action = action.with_domain(|p| p[1] != 0.0);
    let spec = SuperconnectionSpec::new(action.clone(), 1, 0).with_one_form(lambda.clone());
    let mut sample_points = Vec::new();
    for &xi in &[-1.5, 0.5, 2.0] {
        for &th in &[0.0, 1.1, 4.0] {
            sample_points.push(vec![th, xi]);
        }
    }
    Ok(ExampleCase {
        name: "cotangent_circle",
        action,
        one_form: Some(lambda),
        spec,
        sample_points,
        sample_x: vec![vec![-0.8], vec![1.0], vec![2.5]],
        sample_t: vec![0.25, 0.5, 1.5],
        tolerance: 1e-6,
    })
}

/// Dλ(X) = dθ∧dξ − Xξ on T*S¹.
pub fn cotangent_circle_d_lambda(p: &[f64], x: f64) -> ExteriorElement {
    let mut e = ExteriorElement::zero(2);
    *e.coeff_mut(0) = c(-x * p[1]);
    *e.coeff_mut(0b11) = c(1.0);
    e
}

/// Sign s of the fibre action ρ(θ) = diag(0, s·iθ) on ℂ_[0] ⊕ ℂ_[1].
pub const ATIYAH_FIBRE_SIGN: f64 = 1.0;

/// Coordinates (a₁, b₁, a₂, b₂) with ξ_k = a_k + i b_k; the circle acts with
/// weight 1 on both factors, V θ = θ(b₁, −a₁, b₂, −a₂).
pub fn atiyah_action() -> ChartedAction {
    let m = DMatrix::from_row_slice(
        4,
        4,
        &[
            0.0, 1.0, 0.0, 0.0, //
            -1.0, 0.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, 1.0, //
            0.0, 0.0, -1.0, 0.0,
        ],
    );
    ChartedAction::linear(vec![m])
}

/// λ = Re(ξ₂ dξ̄₁) = a₂ da₁ + b₂ db₁.
pub fn atiyah_one_form() -> InvariantOneForm {
    InvariantOneForm::new(|p| vec![p[2], p[3], 0.0, 0.0]).with_jacobian(|_| {
        let mut j = DMatrix::zeros(4, 4);
        j[(0, 2)] = 1.0;
        j[(1, 3)] = 1.0;
        j
    })
}

/// The Atiyah symbol σ(ξ) = ξ₂ − iξ₁ = z₁ from ℂ_[0] to ℂ_[1].
pub fn atiyah_symbol() -> SymbolMorphism {
    SymbolMorphism::scalar(|p| atiyah_z(p).0).with_partials(|_| {
        [-I, c(1.0), c(1.0), I]
            .iter()
            .map(|v| DMatrix::from_element(1, 1, *v))
            .collect()
    })
}

/// (z₁, z₂) = (ξ₂ − iξ₁, ξ₂ + iξ₁).
pub fn atiyah_z(p: &[f64]) -> (Complex64, Complex64) {
    let xi1 = Complex64::new(p[0], p[1]);
    let xi2 = Complex64::new(p[2], p[3]);
    (xi2 - I * xi1, xi2 + I * xi1)
}

/// Chart point with the given (z₁, z₂).
pub fn atiyah_point_from_z(z1: Complex64, z2: Complex64) -> Vec<f64> {
    let xi2 = (z1 + z2) * 0.5;
    let xi1 = (z1 - z2) * (I * 0.5);
    vec![xi1.re, xi1.im, xi2.re, xi2.im]
}

/// Superconnection of the Atiyah symbol with connection d, with or without λ.
pub fn atiyah_spec(with_lambda: bool, fibre_sign: f64) -> SuperconnectionSpec {
    let rho = DMatrix::from_row_slice(2, 2, &[c(0.0), c(0.0), c(0.0), I * fibre_sign]);
    let spec = SuperconnectionSpec::new(atiyah_action(), 1, 1)
        .with_symbol(atiyah_symbol())
        .expect("rank-one symbol on a rank (1, 1) bundle")
        .with_fibre_action(vec![rho]);
    if with_lambda {
        spec.with_one_form(atiyah_one_form())
    } else {
        spec
    }
}

/// The Atiyah symbol on T*ℂ with the Liouville form Re(ξ₂ dξ̄₁).
pub fn atiyah_case(fibre_sign: f64) -> ExampleCase {
    let action = atiyah_action();
    let spec = atiyah_spec(true, fibre_sign);
    let sample_points = vec![
        atiyah_point_from_z(Complex64::new(0.5, 0.2), Complex64::new(-0.3, 0.4)),
        atiyah_point_from_z(Complex64::new(-0.4, 0.7), Complex64::new(0.9, 0.1)),
        atiyah_point_from_z(Complex64::new(1.1, -0.6), Complex64::new(0.2, -0.8)),
    ];
    ExampleCase {
        name: "atiyah",
        action,
        one_form: Some(atiyah_one_form()),
        spec,
        sample_points,
        sample_x: vec![vec![-0.5], vec![0.3], vec![1.2]],
        sample_t: vec![0.3, 0.7, 1.0],
        tolerance: 1e-10,
    }
}

/// dz₁ in the basis (da₁, db₁, da₂, db₂).
pub const ATIYAH_DZ1: [Complex64; 4] = [
    Complex64 { re: 0.0, im: -1.0 },
    Complex64 { re: 1.0, im: 0.0 },
    Complex64 { re: 1.0, im: 0.0 },
    Complex64 { re: 0.0, im: 1.0 },
];

/// dz̄₁ in the basis (da₁, db₁, da₂, db₂).
pub const ATIYAH_DZ1_BAR: [Complex64; 4] = [
    Complex64 { re: 0.0, im: 1.0 },
    Complex64 { re: 1.0, im: 0.0 },
    Complex64 { re: 1.0, im: 0.0 },
    Complex64 { re: 0.0, im: -1.0 },
];

/// g(z) = (e^z − 1)/z, with g(0) = 1.
pub fn atiyah_g(z: Complex64) -> Complex64 {
    if z.norm() < 1e-4 {
        let mut sum = c(0.0);
        let mut term = c(1.0);
        for k in 1..12 {
            sum += term;
            term = term * z / c((k + 1) as f64);
        }
        sum
    } else {
        (z.exp() - 1.0) / z
    }
}

/// g′(z) = (z e^z − e^z + 1)/z², with g′(0) = 1/2.
pub fn atiyah_g_prime(z: Complex64) -> Complex64 {
    if z.norm() < 1e-3 {
        let mut sum = c(0.0);
        let mut fact = 1.0;
        let mut zk = c(1.0);
        for k in 0..14 {
            fact *= (k + 2) as f64;
            sum += zk * ((k + 1) as f64 / fact);
            zk *= z;
        }
        sum
    } else {
        (z * z.exp() - z.exp() + 1.0) / (z * z)
    }
}

fn one_form4(v: &[Complex64; 4]) -> ExteriorElement {
    let mut e = ExteriorElement::zero(4);
    for (i, x) in v.iter().enumerate() {
        *e.coeff_mut(1 << i) = *x;
    }
    e
}

/// dz₁∧dz̄₁ expanded by hand over pairs of generators.
fn dz_dzbar() -> ExteriorElement {
    let mut e = ExteriorElement::zero(4);
    for i in 0..4 {
        for j in 0..4 {
            if i == j {
                continue;
            }
            let mask = (1 << i) | (1 << j);
            let sign = if i < j { 1.0 } else { -1.0 };
            *e.coeff_mut(mask) += ATIYAH_DZ1[i] * ATIYAH_DZ1_BAR[j] * sign;
        }
    }
    e
}

/// Closed form of e^{F_t(iθ)} at the point with first coordinate z₁:
///
/// ```text
/// e^{−t²|z₁|²} [ 1 + (g′ − g) t² dz₁dz̄₁    it g dz̄₁
///                it g dz₁                 e^{iθ} + g′ t² dz₁dz̄₁ ]
/// ```
///
/// with g, g′ evaluated at iθ.  Returned as a 2×2 matrix of forms.
pub fn atiyah_exp_curvature(t: f64, theta: f64, z1: Complex64) -> [[ExteriorElement; 2]; 2] {
    let z = I * theta;
    let (g, gp) = (atiyah_g(z), atiyah_g_prime(z));
    let pre = c((-t * t * z1.norm_sqr()).exp());
    let w = dz_dzbar();
    let mut e11 = ExteriorElement::one(4);
    e11.axpy((gp - g) * t * t, &w);
    let e12 = one_form4(&ATIYAH_DZ1_BAR).scale(I * t * g);
    let e21 = one_form4(&ATIYAH_DZ1).scale(I * t * g);
    let mut e22 = ExteriorElement::scalar(4, z.exp());
    e22.axpy(gp * t * t, &w);
    [[e11.scale(pre), e12.scale(pre)], [e21.scale(pre), e22.scale(pre)]]
}

/// Largest entrywise deviation between an engine value and the closed form.
pub fn atiyah_exp_deviation(engine: &GradedMatrixForm, t: f64, theta: f64, z1: Complex64) -> f64 {
    let oracle = atiyah_exp_curvature(t, theta, z1);
    let mut dev = 0.0f64;
    for (i, row) in oracle.iter().enumerate() {
        for (j, o) in row.iter().enumerate() {
            for mask in 0..16 {
                dev = dev.max((engine.get(mask, i, j) - o.coeff(mask)).norm());
            }
        }
    }
    dev
}

/// The moment ⟨λ, Vθ⟩ per unit θ, a₂b₁ − a₁b₂ = −Im(ξ₂ ξ̄₁).
pub fn atiyah_moment(p: &[f64]) -> f64 {
    p[2] * p[1] - p[0] * p[3]
}

/// Closed form of Ch(σ, λ, d, 1)(θ) = e^{iDλ(θ)} Str e^{F₁(iθ)} with
/// Str e^{F₁} = e^{−|z₁|²}(1 − e^{iθ} − g(iθ) dz₁dz̄₁).
pub fn atiyah_chern_closed_form(theta: f64, p: &[f64]) -> ExteriorElement {
    let (z1, _) = atiyah_z(p);
    let z = I * theta;
    let mut str_part = ExteriorElement::scalar(4, c(1.0) - z.exp());
    str_part.axpy(-atiyah_g(z), &dz_dzbar());
    let str_part = str_part.scale_re((-z1.norm_sqr()).exp());
    // e^{i dλ} = 1 + i dλ − dλ²/2 with dλ = da₂∧da₁ + db₂∧db₁ and
    // dλ∧dλ = −2 da₁∧db₁∧da₂∧db₂.
    let mut dl = ExteriorElement::zero(4);
    *dl.coeff_mut(0b0101) = c(-1.0);
    *dl.coeff_mut(0b1010) = c(-1.0);
    let mut e = ExteriorElement::one(4);
    e.axpy(I, &dl);
    *e.coeff_mut(0b1111) += c(1.0);
    let phase = (-I * theta * atiyah_moment(p)).exp();
    (&e * &str_part).scale(phase)
}

/// h_σ + ‖f_λ‖² − ½‖ξ‖² computed from the coordinate expressions.
pub fn atiyah_inequality_margin(p: &[f64]) -> f64 {
    let norm2: f64 = p.iter().map(|v| v * v).sum();
    let im = p[0] * p[3] - p[2] * p[1];
    norm2 - 2.0 * im + im * im - 0.5 * norm2
}

/// V = ℂ with the weight-1 circle action, ω = ½(x dy − y dx) and the Kirwan
/// one-form of Φ = ½(x² + y²) for the standard metric.
pub fn exact_symplectic_case() -> ExampleCase {
    let action = plane_rotation_action().with_metric(|_| DMatrix::identity(2, 2));
    let omega = exact_symplectic_primitive();
    let spec = SuperconnectionSpec::new(action.clone(), 1, 0).with_one_form(omega.clone());
    ExampleCase {
        name: "exact_symplectic",
        action,
        one_form: Some(omega),
        spec,
        sample_points: vec![vec![1.0, 0.0], vec![0.3, -0.8], vec![-1.2, 0.5]],
        sample_x: vec![vec![-0.6], vec![0.9], vec![1.5]],
        sample_t: vec![0.25, 0.5, 1.5],
        tolerance: 1e-6,
    }
}

/// ω = ½(x dy − y dx), so dω = dx∧dy.
pub fn exact_symplectic_primitive() -> InvariantOneForm {
    InvariantOneForm::new(|p| vec![-0.5 * p[1], 0.5 * p[0]])
        .with_jacobian(|_| DMatrix::from_row_slice(2, 2, &[0.0, -0.5, 0.5, 0.0]))
}

/// Φ(v) = ½|v|², the moment map of Ω = dx∧dy for the weight-1 action.
pub fn exact_symplectic_moment_map(p: &[f64]) -> Vec<f64> {
    vec![0.5 * (p[0] * p[0] + p[1] * p[1])]
}

/// Φ(v) evaluated as Ω(V v, v)/2 with Ω(a, b) = a₁b₂ − a₂b₁ and V v = (y, −x).
pub fn exact_symplectic_moment_oracle(p: &[f64]) -> f64 {
    let vv = [p[1], -p[0]];
    -0.5 * (vv[0] * p[1] - vv[1] * p[0])
}

/// ‖𝐤‖² = |v|⁶/4 for 𝐤 = Φ(v) V v.
pub fn exact_symplectic_kirwan_norm2(p: &[f64]) -> f64 {
    (p[0] * p[0] + p[1] * p[1]).powi(3) / 4.0
}

/// The U(1)² action on T*T² with chart (θ₁, θ₂, ξ₁, ξ₂) and the one-forms
/// λ = −ξ₁ dθ₁, μ = −ξ₂ dθ₂.
#[derive(Clone)]
pub struct TorusCase {
    pub action: ChartedAction,
    pub lambda: InvariantOneForm,
    pub mu: InvariantOneForm,
    /// Point lying in both U₁ and U₂.
    pub point: Vec<f64>,
}

impl TorusCase {
    fn as_example(&self) -> ExampleCase {
        let sum = self.lambda.sum(&self.mu);
        ExampleCase {
            name: "torus",
            action: self.action.clone(),
            one_form: Some(sum.clone()),
            spec: SuperconnectionSpec::new(self.action.clone(), 1, 0).with_one_form(sum),
            sample_points: vec![self.point.clone(), vec![0.5, 2.0, -0.7, 1.1]],
            sample_x: vec![vec![0.4, -0.9], vec![1.3, 0.6]],
            sample_t: vec![0.25, 0.5, 1.5],
            tolerance: 1e-6,
        }
    }
}

/// The torus case used by the one-form-sum identity.
pub fn torus_case() -> TorusCase {
    let action = ChartedAction::new(4, 2, |_| vec![vec![-1.0, 0.0, 0.0, 0.0], vec![0.0, -1.0, 0.0, 0.0]])
        .with_jacobians(|_| vec![DMatrix::zeros(4, 4); 2]);
    let lambda = InvariantOneForm::new(|p| vec![-p[2], 0.0, 0.0, 0.0]).with_jacobian(|_| {
        let mut j = DMatrix::zeros(4, 4);
        j[(0, 2)] = -1.0;
        j
    });
    let mu = InvariantOneForm::new(|p| vec![0.0, -p[3], 0.0, 0.0]).with_jacobian(|_| {
        let mut j = DMatrix::zeros(4, 4);
        j[(1, 3)] = -1.0;
        j
    });
    TorusCase {
        action,
        lambda,
        mu,
        point: vec![0.3, 1.2, 1.0, 0.3],
    }
}

/// Two rank-(1, 1) bundles on ℝ² with symbols σ₁ = z (with λ = x dy − y dx)
/// and σ₂ = (|z|² − 1) z, fibre weights (0, 1), and the shipped partition of
/// unity d₁ = |z|² − 0.09, d₂ = (1 − |z|²)² − 0.25.
#[derive(Clone)]
pub struct ProductCase {
    pub first: SuperconnectionSpec,
    pub second: SuperconnectionSpec,
    pub partition: PartitionOfUnity,
    pub point: Vec<f64>,
    pub density: TestDensity,
}

/// The multiplicativity test case.
pub fn product_case() -> Result<ProductCase> {
    let action = plane_rotation_action();
    let rho = vec![DMatrix::from_row_slice(2, 2, &[c(0.0), c(0.0), c(0.0), I])];
    let s1 = SymbolMorphism::scalar(|p| Complex64::new(p[0], p[1]))
        .with_partials(|_| vec![DMatrix::from_element(1, 1, c(1.0)), DMatrix::from_element(1, 1, I)]);
    let s2 = SymbolMorphism::scalar(|p| {
        let r2 = p[0] * p[0] + p[1] * p[1];
        Complex64::new(p[0], p[1]) * (r2 - 1.0)
    })
    .with_partials(|p| {
        let (x, y) = (p[0], p[1]);
        let r2 = x * x + y * y;
        let z = Complex64::new(x, y);
        vec![
            DMatrix::from_element(1, 1, z * (2.0 * x) + (r2 - 1.0)),
            DMatrix::from_element(1, 1, z * (2.0 * y) + I * (r2 - 1.0)),
        ]
    });
    let first = SuperconnectionSpec::new(action.clone(), 1, 1)
        .with_symbol(s1)?
        .with_fibre_action(rho.clone())
        .with_one_form(plane_rotation_one_form());
    let second = SuperconnectionSpec::new(action, 1, 1)
        .with_symbol(s2)?
        .with_fibre_action(rho);
    let partition = PartitionOfUnity::new(
        |p| p[0] * p[0] + p[1] * p[1] - 0.09,
        |p| vec![2.0 * p[0], 2.0 * p[1]],
        |p| {
            let u = 1.0 - p[0] * p[0] - p[1] * p[1];
            u * u - 0.25
        },
        |p| {
            let u = 1.0 - p[0] * p[0] - p[1] * p[1];
            vec![-4.0 * u * p[0], -4.0 * u * p[1]]
        },
    );
    Ok(ProductCase {
        first,
        second,
        partition,
        point: vec![0.5, 0.3],
        density: TestDensity::gaussian(1.0, 0.25),
    })
}

/// One row of a decay table.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayRow {
    pub t_or_radius: f64,
    pub norm: f64,
    /// Whether the row lies in the window used for the fit.
    pub fitted_window: bool,
}

/// Absolute tolerance of the θ-quadrature in decay profiles.
pub const DECAY_QUAD_TOL: f64 = 1e-17;

/// ‖∫ Ch(σ, λ, A, 1)(θ) Q(θ) dθ‖ at `p` by adaptive quadrature in θ.
pub fn paired_chern_norm(spec: &SuperconnectionSpec, q: &TestDensity, p: &[f64]) -> Result<f64> {
    if q.dim() != 1 {
        return Err(Error::DimensionMismatch("decay profiles use a circle action".into()));
    }
    let data = spec.point_data(p)?;
    let (lo, hi) = q.support_box()[0];
    let fail = std::sync::Mutex::new(None);
    let f = |th: f64| -> ExteriorElement {
        let w = q.eval(&[th]);
        if w == 0.0 {
            return ExteriorElement::zero(p.len());
        }
        match data.chern(1.0, &[th]) {
            Ok(v) => v.scale_re(w),
            Err(e) => {
                *fail.lock().expect("poisoned") = Some(e);
                ExteriorElement::zero(p.len())
            }
        }
    };
    let freq = data.moment_components()[0].abs() * (hi - lo);
    let initial = 8 + (freq / 2.0).ceil() as usize;
    let r = adaptive_gk(f, lo, hi, initial, DECAY_QUAD_TOL, 200_000);
    if let Some(e) = fail.into_inner().expect("poisoned") {
        return Err(e);
    }
    if !r.converged {
        return Err(Error::QuadratureNonconvergence {
            achieved: r.error,
            requested: DECAY_QUAD_TOL,
        });
    }
    Ok(r.value.norm())
}

/// The radius √2 beyond which h_σ + ‖f_λ‖² ≥ ½‖ξ‖² holds for the Atiyah case.
pub const ATIYAH_DECAY_RADIUS: f64 = std::f64::consts::SQRT_2;

/// Point at distance r along the z₂-axis (z₁ = 0), where |z₂| = √2 r.
pub fn atiyah_z2_axis_point(r: f64) -> Vec<f64> {
    atiyah_point_from_z(c(0.0), c(std::f64::consts::SQRT_2 * r))
}

/// Test density used for the Atiyah mean-decay profile.
pub fn atiyah_decay_density() -> TestDensity {
    TestDensity::single(Profile::Bump {
        center: 0.5,
        radius: 2.0,
    })
}

/// The norm of ∫ Ch(σ, λ, A, 1)(θ) Q(θ) dθ at the points `ray(r)` for each
/// radius.  Rows with r below the assumption radius R are flagged out of the
/// fit window; the decay assumption h_σ + ‖f_λ‖² ≥ c‖ξ‖² is checked on the
/// remaining rows with c = ½.
pub fn mean_decay_profile(
    case: &ExampleCase,
    q: &TestDensity,
    radii: &[f64],
    ray: &(dyn Fn(f64) -> Vec<f64> + Sync),
    assumption_radius: f64,
) -> Result<Vec<DecayRow>> {
    use rayon::prelude::*;
    let rows: Vec<Result<DecayRow>> = radii
        .par_iter()
        .map(|&r| {
            let p = ray(r);
            let fitted = r >= assumption_radius;
            if fitted {
                let data = case.spec.point_data(&p)?;
                let f2: f64 = data.moment_components().iter().map(|f| f * f).sum();
                let norm2: f64 = p.iter().map(|v| v * v).sum();
                if data.support_indicator() + f2 < 0.5 * norm2 - 1e-12 * norm2 {
                    return Err(Error::AssumptionFailed(format!("h_σ + ‖f_λ‖² < ½‖ξ‖² at {p:?}")));
                }
            }
            Ok(DecayRow {
                t_or_radius: r,
                norm: paired_chern_norm(&case.spec, q, &p)?,
                fitted_window: fitted,
            })
        })
        .collect();
    rows.into_iter().collect()
}

/// Rows (|z₁|², norm) along |z₂|² − |z₁|² = `offset`, for the Gaussian factor.
pub fn atiyah_gaussian_profile(
    case: &ExampleCase,
    q: &TestDensity,
    z1_squared: &[f64],
    offset: f64,
) -> Result<Vec<DecayRow>> {
    use rayon::prelude::*;
    let rows: Vec<Result<DecayRow>> = z1_squared
        .par_iter()
        .map(|&u| {
            let p = atiyah_point_from_z(c(u.sqrt()), c((u + offset).sqrt()));
            Ok(DecayRow {
                t_or_radius: u,
                norm: paired_chern_norm(&case.spec, q, &p)?,
                fitted_window: true,
            })
        })
        .collect();
    rows.into_iter().collect()
}

/// The torus case with the roles of λ and μ exchanged, together with the
/// order of the generators.
pub fn torus_case_swapped() -> TorusCase {
    let t = torus_case();
    TorusCase {
        action: ChartedAction::new(4, 2, |_| vec![vec![0.0, -1.0, 0.0, 0.0], vec![-1.0, 0.0, 0.0, 0.0]])
            .with_jacobians(|_| vec![DMatrix::zeros(4, 4); 2]),
        lambda: t.mu,
        mu: t.lambda,
        point: t.point,
    }
}
