//! Named verification checks, run configuration and reports.
//!
//! A run executes the selected checks in name order and collects one record per
//! check.  Each record holds a list of metrics; a metric with a bound passes when
//! its value does not exceed the bound, and a check passes when all of its
//! bounded metrics pass.  Reports are plain key-value text with floats printed
//! to 17 significant digits, so a fixed configuration yields identical bytes.

use crate::catalog::{self, DecayRow};
use crate::chern::{assemble_curvature, chern_form, transgression_identity_residual};
use crate::error::{Error, Result};
use crate::expm::super_exponential;
use crate::generalized::{
    localization_residual, multiplicativity_residual, one_form_sum_identity_residual, symplectic_theta_pairing,
    theta_radial_oracle, TestDensity,
};
use crate::graded::{operator_norm, GradedMatrixForm};
use crate::hermitian::{smallest_eigenvalue, HermitianPart};
use crate::reference::{brute_force_product, dense_exponential};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::path::PathBuf;

/// A named check with a short statement of the identity it verifies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheckInfo {
    pub name: &'static str,
    pub identity: &'static str,
    /// Catalog entries the check uses; empty when it needs none.
    pub examples: &'static [&'static str],
}

/// Every available check, sorted by name.
pub const CHECKS: [CheckInfo; 11] = [
    CheckInfo {
        name: "algebra_suite",
        identity: "unit, associativity, Koszul signs, Str(ab) = (-1)^{|a||b|} Str(ba), ||ab|| <= ||a|| ||b||",
        examples: &[],
    },
    CheckInfo {
        name: "atiyah_inequality",
        identity: "h_sigma + ||f_lambda||^2 >= ||xi||^2 / 2 for ||xi||^2 >= 2",
        examples: &["atiyah"],
    },
    CheckInfo {
        name: "closed_forms",
        identity: "D(lambda) closed forms; e^{F_t(i theta)} via g(z) = (e^z - 1)/z",
        examples: &["plane_rotation", "cotangent_circle", "atiyah"],
    },
    CheckInfo {
        name: "localization",
        identity: "1 = D(beta(lambda)) off C_lambda, paired with a test density",
        examples: &["plane_rotation", "cotangent_circle"],
    },
    CheckInfo {
        name: "mean_decay",
        identity: "int Ch(sigma, lambda, A, 1) Q decays faster than any power of ||xi||",
        examples: &["atiyah"],
    },
    CheckInfo {
        name: "multiplicativity",
        identity: "-D(I_Phi) = Phi1 b1 c2 + c1 Phi2 b2 - dPhi1 b1 b2 - b12 up to terms decaying in T",
        examples: &[],
    },
    CheckInfo {
        name: "one_form_sum",
        identity: "D(I1) = beta(lambda + mu) - beta(lambda) on U1; D(I2) = beta(mu) - beta(lambda + mu) on U2",
        examples: &["torus"],
    },
    CheckInfo {
        name: "suffit_bound",
        identity: "||e^{-R+S+T}|| <= e^{-m(R)} e^{||S||} sum_{k<=q} ||T||^k / k!",
        examples: &[],
    },
    CheckInfo {
        name: "theta_pairing",
        identity: "<Theta, Q> by epsilon-regularization equals the large-T limit of int chi e^{iT D omega}",
        examples: &["exact_symplectic"],
    },
    CheckInfo {
        name: "transgression",
        identity: "d/dt Ch(t) = -D eta(t)",
        examples: &[
            "plane_rotation",
            "cotangent_circle",
            "atiyah",
            "exact_symplectic",
            "torus",
        ],
    },
    CheckInfo {
        name: "volterra_oracle",
        identity: "Volterra exponential equals exp of the left-multiplication operator",
        examples: &[],
    },
];

/// Looks up a check by name.
pub fn check_info(name: &str) -> Result<&'static CheckInfo> {
    CHECKS
        .iter()
        .find(|c| c.name == name)
        .ok_or_else(|| Error::UnknownSelector(name.to_string()))
}

/// Configuration of a verification run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// A catalog name or "all".
    pub example: String,
    /// Selected check names, sorted and deduplicated.
    pub checks: Vec<String>,
    /// Truncation T for β-integrals.
    pub t: f64,
    /// Truncation S for the one-form-sum identity.
    pub s: f64,
    /// Points per axis for grid-based checks.
    pub grid: usize,
    /// Override for every residual bound.
    pub tol: Option<f64>,
    pub seed: u64,
    /// Worker threads (0 for the rayon default).
    pub threads: usize,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            example: "all".into(),
            checks: Vec::new(),
            t: 40.0,
            s: 50.0,
            grid: 100,
            tol: None,
            seed: 0,
            threads: 0,
            out: None,
        }
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?} as a number")))
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?} as a nonnegative integer")))
}

/// Parses a flat `key = value` file; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl RunConfig {
    /// Applies one setting.  `check` adds comma-separated selectors; `all`
    /// selects every check.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "example" => self.example = value.trim().to_string(),
            "check" | "checks" => {
                for sel in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    if sel == "all" {
                        self.checks.extend(CHECKS.iter().map(|c| c.name.to_string()));
                    } else {
                        self.checks.push(check_info(sel)?.name.to_string());
                    }
                }
                self.checks.sort();
                self.checks.dedup();
            }
            "T" => self.t = parse_f64(key, value)?,
            "S" => self.s = parse_f64(key, value)?,
            "grid" => self.grid = parse_usize(key, value)?,
            "tol" => self.tol = Some(parse_f64(key, value)?),
            "seed" => {
                self.seed = value
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("seed: cannot parse {value:?}")))?
            }
            "threads" => self.threads = parse_usize(key, value)?,
            "out" => self.out = Some(PathBuf::from(value.trim())),
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Defaults, then the file settings, then the command-line settings.
    pub fn from_sources(file: &[(String, String)], cli: &[(String, String)]) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, v) in file.iter().chain(cli) {
            cfg.apply(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Rejects non-positive tolerances and truncations, and unknown examples.
    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("tol must be positive and finite, got {t}")));
            }
        }
        for (name, v) in [("T", self.t), ("S", self.s)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.grid < 2 {
            return Err(Error::Config("grid must be at least 2".into()));
        }
        if self.example != "all" && !catalog::CASE_NAMES.contains(&self.example.as_str()) {
            return Err(Error::UnknownSelector(self.example.clone()));
        }
        Ok(())
    }

    /// The settings as printed in the report.
    pub fn echo(&self) -> Vec<(String, String)> {
        vec![
            ("example".into(), self.example.clone()),
            ("checks".into(), self.checks.join(",")),
            ("T".into(), fmt_f64(self.t)),
            ("S".into(), fmt_f64(self.s)),
            ("grid".into(), self.grid.to_string()),
            ("tol".into(), self.tol.map_or("default".into(), fmt_f64)),
            ("seed".into(), self.seed.to_string()),
        ]
    }

    fn residual_bound(&self, default: f64) -> Option<f64> {
        Some(self.tol.unwrap_or(default))
    }

    fn uses(&self, example: &str) -> bool {
        self.example == "all" || self.example == example
    }
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// A measured quantity with an optional upper bound.
#[derive(Clone, Debug, PartialEq)]
pub struct Metric {
    pub label: String,
    pub value: f64,
    pub bound: Option<f64>,
}

impl Metric {
    fn bounded(label: impl Into<String>, value: f64, bound: Option<f64>) -> Self {
        Self {
            label: label.into(),
            value,
            bound,
        }
    }

    fn info(label: impl Into<String>, value: f64) -> Self {
        Self::bounded(label, value, None)
    }

    /// Whether the value respects the bound (NaN never does).
    pub fn passes(&self) -> bool {
        match self.bound {
            Some(b) => self.value <= b,
            None => true,
        }
    }
}

/// Outcome of a check.
#[derive(Clone, Debug, PartialEq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
    Error(String),
}

impl Status {
    fn label(&self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
            Status::Error(_) => "ERROR",
        }
    }
}

/// The record of one check.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckRecord {
    pub name: String,
    pub identity: String,
    pub examples: Vec<String>,
    pub metrics: Vec<Metric>,
    pub status: Status,
}

/// A verification report.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub environment: String,
    pub config: Vec<(String, String)>,
    pub records: Vec<CheckRecord>,
}

/// Environment stamp: crate version, OS and architecture.
pub fn environment_stamp() -> String {
    format!(
        "equichern {} {}-{}",
        env!("CARGO_PKG_VERSION"),
        std::env::consts::OS,
        std::env::consts::ARCH
    )
}

impl Report {
    /// Whether no record failed or errored.
    pub fn passed(&self) -> bool {
        self.records
            .iter()
            .all(|r| matches!(r.status, Status::Pass | Status::Skip))
    }

    /// Structured text rendering with fixed field order.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# equichern verification report");
        let _ = writeln!(s, "environment = {}", self.environment);
        let _ = writeln!(s, "[config]");
        for (k, v) in &self.config {
            let _ = writeln!(s, "{k} = {v}");
        }
        for r in &self.records {
            let _ = writeln!(s, "[check {}]", r.name);
            let _ = writeln!(s, "identity = {}", r.identity);
            let _ = writeln!(s, "examples = {}", r.examples.join(","));
            for m in &r.metrics {
                match m.bound {
                    Some(b) => {
                        let _ = writeln!(s, "metric {} = {} <= {}", m.label, fmt_f64(m.value), fmt_f64(b));
                    }
                    None => {
                        let _ = writeln!(s, "metric {} = {}", m.label, fmt_f64(m.value));
                    }
                }
            }
            if let Status::Error(e) = &r.status {
                let _ = writeln!(s, "error = {}", e.replace('\n', " "));
            }
            let _ = writeln!(s, "status = {}", r.status.label());
        }
        let count = |f: &dyn Fn(&Status) -> bool| self.records.iter().filter(|r| f(&r.status)).count();
        let _ = writeln!(s, "[summary]");
        let _ = writeln!(s, "checks = {}", self.records.len());
        let _ = writeln!(s, "passed = {}", count(&|st| *st == Status::Pass));
        let _ = writeln!(
            s,
            "failed = {}",
            count(&|st| matches!(st, Status::Fail | Status::Error(_)))
        );
        let _ = writeln!(s, "skipped = {}", count(&|st| *st == Status::Skip));
        let _ = writeln!(s, "status = {}", if self.passed() { "PASS" } else { "FAIL" });
        s
    }

    /// Parses a rendered report.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: &str| Error::Config(format!("malformed report line {line:?}"));
        let mut environment = String::new();
        let mut config = Vec::new();
        let mut records: Vec<CheckRecord> = Vec::new();
        let mut section = "";
        let mut pending_error = None;
        for line in text.lines() {
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            if line == "[config]" || line == "[summary]" {
                section = if line == "[config]" { "config" } else { "summary" };
                continue;
            }
            if let Some(name) = line.strip_prefix("[check ").and_then(|l| l.strip_suffix(']')) {
                section = "check";
                records.push(CheckRecord {
                    name: name.to_string(),
                    identity: String::new(),
                    examples: Vec::new(),
                    metrics: Vec::new(),
                    status: Status::Skip,
                });
                continue;
            }
            let (k, v) = line.split_once(" = ").ok_or_else(|| bad(line))?;
            match section {
                "" if k == "environment" => environment = v.to_string(),
                "config" => config.push((k.to_string(), v.to_string())),
                "summary" => {}
                "check" => {
                    let rec = records.last_mut().ok_or_else(|| bad(line))?;
                    if let Some(label) = k.strip_prefix("metric ") {
                        let (value, bound) = match v.split_once(" <= ") {
                            Some((a, b)) => (a, Some(parse_f64(label, b)?)),
                            None => (v, None),
                        };
                        rec.metrics
                            .push(Metric::bounded(label, parse_f64(label, value)?, bound));
                    } else {
                        match k {
                            "identity" => rec.identity = v.to_string(),
                            "examples" => {
                                rec.examples = v.split(',').filter(|s| !s.is_empty()).map(String::from).collect()
                            }
                            "error" => pending_error = Some(v.to_string()),
                            "status" => {
                                rec.status = match v {
                                    "PASS" => Status::Pass,
                                    "FAIL" => Status::Fail,
                                    "SKIP" => Status::Skip,
                                    "ERROR" => Status::Error(pending_error.take().unwrap_or_default()),
                                    _ => return Err(bad(line)),
                                }
                            }
                            _ => return Err(bad(line)),
                        }
                    }
                }
                _ => return Err(bad(line)),
            }
        }
        Ok(Self {
            environment,
            config,
            records,
        })
    }
}

/// Least-squares fit of log(norm) against log(t).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub exponent: f64,
    /// Standard error of the fitted exponent.
    pub std_error: f64,
    pub points: usize,
}

/// Minimum number of points in a fitting window.
pub const MIN_FIT_POINTS: usize = 10;

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let resid: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum();
    let se = if xs.len() > 2 {
        (resid / (n - 2.0) / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    (slope, se)
}

/// Fits the exponent of norm ≈ C·t^p over the rows with t in [lo, hi].
pub fn fit_decay_exponent(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    let rows: Vec<&(f64, f64)> = series
        .iter()
        .filter(|(t, _)| *t >= window.0 && *t <= window.1)
        .collect();
    if rows.len() < MIN_FIT_POINTS {
        return Err(Error::DegenerateWindow(format!(
            "{} points in [{}, {}], need at least {MIN_FIT_POINTS}",
            rows.len(),
            window.0,
            window.1
        )));
    }
    if rows
        .iter()
        .any(|(t, v)| v.is_nan() || *v <= 0.0 || t.is_nan() || *t <= 0.0)
    {
        return Err(Error::DegenerateWindow("nonpositive value in the window".into()));
    }
    let xs: Vec<f64> = rows.iter().map(|(t, _)| t.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|(_, v)| v.ln()).collect();
    if xs.iter().all(|x| *x == xs[0]) {
        return Err(Error::DegenerateWindow("all abscissae coincide".into()));
    }
    let (exponent, std_error) = least_squares(&xs, &ys);
    Ok(DecayFit {
        exponent,
        std_error,
        points: rows.len(),
    })
}

/// CSV with columns t_or_radius, norm, fitted_window_flag.
pub fn decay_csv(rows: &[DecayRow]) -> String {
    let mut s = String::from("t_or_radius,norm,fitted_window_flag\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{}",
            fmt_f64(r.t_or_radius),
            fmt_f64(r.norm),
            u8::from(r.fitted_window)
        );
    }
    s
}

/// Radii of the Atiyah decay table: two rows below the assumption radius and
/// `count` log-spaced rows over [2, 20].
pub fn atiyah_decay_radii(count: usize) -> Vec<f64> {
    let mut r = vec![1.0, 1.2];
    r.extend((0..count).map(|k| 2.0 * 10f64.powf(k as f64 / (count - 1) as f64)));
    r
}

/// The Atiyah decay table along the z₂-axis.
pub fn atiyah_decay_table(count: usize) -> Result<Vec<DecayRow>> {
    let case = catalog::atiyah_case(catalog::ATIYAH_FIBRE_SIGN);
    catalog::mean_decay_profile(
        &case,
        &catalog::atiyah_decay_density(),
        &atiyah_decay_radii(count),
        &catalog::atiyah_z2_axis_point,
        catalog::ATIYAH_DECAY_RADIUS,
    )
}

/// The Atiyah table along |z₂|² = |z₁|² for |z₁|² = 1, ..., 10.
pub fn atiyah_gaussian_table() -> Result<Vec<DecayRow>> {
    let case = catalog::atiyah_case(catalog::ATIYAH_FIBRE_SIGN);
    let u: Vec<f64> = (1..=10).map(f64::from).collect();
    catalog::atiyah_gaussian_profile(&case, &catalog::atiyah_decay_density(), &u, 0.0)
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// A form with independent uniform entries in the unit square times `scale`.
pub fn random_form(rng: &mut ChaCha8Rng, n: usize, p: usize, q: usize, scale: f64) -> GradedMatrixForm {
    let mut a = GradedMatrixForm::zeros(n, p, q);
    for v in a.raw_mut() {
        *v = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale;
    }
    a
}

/// A random form of total parity `parity` (exterior degree plus block parity).
pub fn random_homogeneous(rng: &mut ChaCha8Rng, n: usize, p: usize, q: usize, parity: usize) -> GradedMatrixForm {
    let mut a = random_form(rng, n, p, q, 1.0);
    for mask in 0..1usize << n {
        for i in 0..p + q {
            for j in 0..p + q {
                let block = usize::from((i < p) != (j < p));
                if (mask.count_ones() as usize + block) % 2 != parity {
                    a.set(mask, i, j, c(0.0, 0.0));
                }
            }
        }
    }
    a
}

fn random_hermitian(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> DMatrix<Complex64> {
    let g = DMatrix::from_fn(d, d, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    (&g + g.adjoint()) * c(0.5 * scale, 0.0)
}

fn with_degree_zero(mut a: GradedMatrixForm, m: &DMatrix<Complex64>) -> GradedMatrixForm {
    a.set_block(0, m).expect("degree-zero block has the form's shape");
    a
}

fn rel(diff: f64, scale: f64) -> f64 {
    diff / scale.max(1.0)
}

fn algebra_suite(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Metric>> {
    let (mut unit, mut assoc, mut koszul, mut cyclic, mut submult, mut nilpotent) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let n = rng.gen_range(0..=3);
        let p = rng.gen_range(1..=2);
        let q = rng.gen_range(0..=2);
        let a = random_form(rng, n, p, q, 1.0);
        let b = random_form(rng, n, p, q, 1.0);
        let cc = random_form(rng, n, p, q, 1.0);
        let one = GradedMatrixForm::identity(n, p, q);
        let (na, nb, nc) = (a.graded_norm(), b.graded_norm(), cc.graded_norm());
        unit = unit
            .max((&(&a * &one) - &a).max_abs())
            .max((&(&one * &a) - &a).max_abs());
        let ab = &a * &b;
        let lhs = &ab * &cc;
        let rhs = &a * &(&b * &cc);
        assoc = assoc.max(rel((&lhs - &rhs).max_abs(), na * nb * nc));
        koszul = koszul.max(rel((&ab - &brute_force_product(&a, &b)).max_abs(), na * nb));
        submult = submult.max((ab.graded_norm() - na * nb) / (na * nb).max(1e-300));
        let (pa, pb) = (rng.gen_range(0..2usize), rng.gen_range(0..2usize));
        let ha = random_homogeneous(rng, n, p, q, pa);
        let hb = random_homogeneous(rng, n, p, q, pb);
        let sign = if pa * pb == 1 { -1.0 } else { 1.0 };
        let st1 = (&ha * &hb).supertrace();
        let st2 = (&hb * &ha).supertrace().scale_re(sign);
        cyclic = cyclic.max(rel((&st1 - &st2).max_abs(), ha.graded_norm() * hb.graded_norm()));
        let mut w = random_form(rng, n, p, q, 1.0);
        w.set_block(0, &DMatrix::zeros(p + q, p + q))?;
        let mut power = GradedMatrixForm::identity(n, p, q);
        for _ in 0..=n {
            power = &power * &w;
        }
        nilpotent = nilpotent.max(power.max_abs());
    }
    let tol = cfg.residual_bound(1e-12);
    Ok(vec![
        Metric::bounded("unit", unit, tol),
        Metric::bounded("associativity", assoc, tol),
        Metric::bounded("koszul_vs_monomial_expansion", koszul, tol),
        Metric::bounded("supertrace_cyclicity", cyclic, tol),
        Metric::bounded("submultiplicativity_excess", submult.max(0.0), tol),
        Metric::bounded("nilpotency", nilpotent, Some(0.0)),
    ])
}

fn random_degree_zero(rng: &mut ChaCha8Rng, kind: usize, d: usize) -> DMatrix<Complex64> {
    match kind % 4 {
        0 => DMatrix::from_fn(d, d, |_, _| c(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5))),
        1 => random_hermitian(rng, d, 2.0),
        2 => {
            let v = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let mut m = DMatrix::from_diagonal_element(d, d, v);
            m[(0, 0)] += c(rng.gen_range(-1.0..1.0), 0.0);
            m
        }
        _ => {
            let v = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let mut m = DMatrix::from_diagonal_element(d, d, v);
            for i in 0..d.saturating_sub(1) {
                m[(i, i + 1)] = c(1.0, 0.0);
            }
            m
        }
    }
}

fn volterra_oracle(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Metric>> {
    let mut worst = 0.0f64;
    for k in 0..200 {
        let n = rng.gen_range(1..=4);
        let d = rng.gen_range(1..=3);
        let p = rng.gen_range(1..=d);
        let m = random_degree_zero(rng, k, d);
        let a = with_degree_zero(random_form(rng, n, p, d - p, 1.0), &m);
        let engine = super_exponential(&a)?;
        let oracle = dense_exponential(&a);
        worst = worst.max((&engine - &oracle).max_abs() / oracle.max_abs());
    }
    Ok(vec![Metric::bounded(
        "max_relative_error",
        worst,
        cfg.residual_bound(1e-9),
    )])
}

fn suffit_bound(_cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Metric>> {
    let mut violations = 0usize;
    let mut min_margin = f64::INFINITY;
    for _ in 0..1000 {
        let n = rng.gen_range(0..=4);
        let d = rng.gen_range(1..=3);
        let p = rng.gen_range(1..=d);
        let r = random_hermitian(rng, d, 2.0);
        let s = DMatrix::from_fn(d, d, |_, _| c(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)));
        let mut t = random_form(rng, n, p, d - p, 1.0);
        t.set_block(0, &DMatrix::zeros(d, d))?;
        let m_r = smallest_eigenvalue(&HermitianPart::new(r.clone())?);
        let a = with_degree_zero(t.clone(), &(&s - &r));
        let lhs = super_exponential(&a)?.graded_norm();
        let nt = t.graded_norm();
        let mut poly = 0.0;
        let mut term = 1.0;
        for k in 0..=n {
            poly += term;
            term *= nt / (k + 1) as f64;
        }
        let rhs = (-m_r).exp() * operator_norm(&s).exp() * poly;
        let margin = (rhs - lhs) / rhs;
        min_margin = min_margin.min(margin);
        if margin < -1e-12 {
            violations += 1;
        }
    }
    Ok(vec![
        Metric::bounded("violations", violations as f64, Some(0.0)),
        Metric::info("min_relative_margin", min_margin),
    ])
}

fn closed_forms(cfg: &RunConfig, _rng: &mut ChaCha8Rng) -> Result<Vec<Metric>> {
    let mut out = Vec::new();
    let tol = cfg.residual_bound(1e-10);
    if cfg.uses("plane_rotation") {
        let case = catalog::plane_rotation_case();
        let lambda = case.one_form.as_ref().expect("plane rotation has a one-form");
        let mut worst = 0.0f64;
        for i in 0..cfg.grid.min(20) {
            for j in 0..cfg.grid.min(20) {
                let p = [-2.0 + 4.0 * i as f64 / 19.0 + 0.01, -2.0 + 4.0 * j as f64 / 19.0];
                for x in [-1.3, 0.4, 2.0] {
                    let e = lambda.equivariant_differential(&case.action, &p, &[x])?;
                    worst = worst.max((&e - &catalog::plane_rotation_d_lambda(&p, x)).max_abs());
                }
            }
        }
        out.push(Metric::bounded("plane_rotation.d_lambda", worst, tol));
    }
    if cfg.uses("cotangent_circle") {
        let case = catalog::cotangent_circle_case()?;
        let lambda = case.one_form.as_ref().expect("cotangent circle has a one-form");
        let mut worst = 0.0f64;
        for i in 0..cfg.grid.min(20) {
            for j in 0..cfg.grid.min(20) {
                let p = [6.0 * i as f64 / 19.0, -2.0 + 4.0 * j as f64 / 19.0 + 0.01];
                for x in [-0.8, 1.0, 2.5] {
                    let e = lambda.equivariant_differential(&case.action, &p, &[x])?;
                    worst = worst.max((&e - &catalog::cotangent_circle_d_lambda(&p, x)).max_abs());
                }
            }
        }
        out.push(Metric::bounded("cotangent_circle.d_lambda", worst, tol));
    }
    if cfg.uses("atiyah") {
        let bare = catalog::atiyah_spec(false, catalog::ATIYAH_FIBRE_SIGN);
        let full = catalog::atiyah_spec(true, catalog::ATIYAH_FIBRE_SIGN);
        let zs = [c(0.5, 0.2), c(-0.9, 0.4), c(0.1, -1.3)];
        let (mut worst_exp, mut worst_ch) = (0.0f64, 0.0f64);
        for z1 in zs {
            let p = catalog::atiyah_point_from_z(z1, c(0.3, -0.6));
            for t in [0.5, 1.0, 2.0] {
                for th in [-0.7, 0.3, 1.5] {
                    let e = super_exponential(&assemble_curvature(&bare, t, &[th], &p)?)?;
                    worst_exp = worst_exp.max(catalog::atiyah_exp_deviation(&e, t, th, z1));
                    if t == 1.0 {
                        let ch = chern_form(&full, 1.0, &[th], &p)?;
                        worst_ch = worst_ch.max((&ch - &catalog::atiyah_chern_closed_form(th, &p)).max_abs());
                    }
                }
            }
        }
        out.push(Metric::bounded("atiyah.exp_curvature", worst_exp, tol));
        out.push(Metric::bounded("atiyah.chern_at_t1", worst_ch, tol));
    }
    Ok(out)
}

fn transgression(cfg: &RunConfig, _rng: &mut ChaCha8Rng) -> Result<Vec<Metric>> {
    let mut out = Vec::new();
    for name in catalog::CASE_NAMES {
        if !cfg.uses(name) {
            continue;
        }
        let case = catalog::case_by_name(name)?;
        let mut worst = 0.0f64;
        for p in &case.sample_points {
            for x in &case.sample_x {
                for &t in &case.sample_t {
                    worst = worst.max(transgression_identity_residual(&case.spec, t, x, p, 1e-4)?);
                }
            }
        }
        out.push(Metric::bounded(
            format!("{name}.max_residual"),
            worst,
            cfg.residual_bound(1e-6),
        ));
    }
    Ok(out)
}

/// Test density shared by the localization check and its tests.
pub fn localization_density() -> TestDensity {
    TestDensity::gaussian(1.0, 0.25)
}

fn localization(cfg: &RunConfig, _rng: &mut ChaCha8Rng) -> Result<Vec<Metric>> {
    let q = localization_density();
    let mut out = Vec::new();
    let cases = [
        (catalog::plane_rotation_case(), vec![1.0, 0.0]),
        (catalog::cotangent_circle_case()?, vec![0.4, 1.0]),
    ];
    for (case, pt) in cases {
        if !cfg.uses(case.name) {
            continue;
        }
        let lambda = case.one_form.as_ref().expect("localization cases carry a one-form");
        let ts = [0.25 * cfg.t, 0.5 * cfg.t, cfg.t];
        let mut res = Vec::new();
        for &t in &ts {
            res.push(localization_residual(&case.action, lambda, &q, t, &pt)?);
        }
        for (t, r) in ts.iter().zip(&res).take(2) {
            out.push(Metric::info(format!("{}.residual_T={}", case.name, fmt_f64(*t)), *r));
        }
        out.push(Metric::bounded(
            format!("{}.residual_T={}", case.name, fmt_f64(cfg.t)),
            res[2],
            cfg.residual_bound(1e-4),
        ));
        let ratio = (res[1] / res[0]).max(res[2] / res[1]);
        out.push(Metric::bounded(
            format!("{}.max_successive_ratio", case.name),
            ratio,
            Some(1.0),
        ));
    }
    Ok(out)
}

fn multiplicativity(cfg: &RunConfig, _rng: &mut ChaCha8Rng) -> Result<Vec<Metric>> {
    let pc = catalog::product_case()?;
    let r = multiplicativity_residual(&pc.first, &pc.second, &pc.partition, &pc.density, cfg.t, &pc.point)?;
    Ok(vec![Metric::bounded("residual", r, cfg.residual_bound(1e-3))])
}

fn atiyah_inequality(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Metric>> {
    let spec = catalog::atiyah_spec(true, catalog::ATIYAH_FIBRE_SIGN);
    let mut violations = 0usize;
    let mut min_margin = f64::INFINITY;
    let mut oracle_gap = 0.0f64;
    for i in 0..cfg.grid {
        let norm2 = 2.0 + 98.0 * i as f64 / (cfg.grid - 1) as f64;
        for _ in 0..cfg.grid {
            let dir: Vec<f64> = loop {
                let v: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let len2: f64 = v.iter().map(|x| x * x).sum();
                if len2 > 1e-6 && len2 <= 1.0 {
                    break v.iter().map(|x| x / len2.sqrt()).collect();
                }
            };
            let p: Vec<f64> = dir.iter().map(|x| x * norm2.sqrt()).collect();
            let data = spec.point_data(&p)?;
            let f2: f64 = data.moment_components().iter().map(|f| f * f).sum();
            let margin = data.support_indicator() + f2 - 0.5 * norm2;
            oracle_gap = oracle_gap.max((margin - catalog::atiyah_inequality_margin(&p)).abs() / (1.0 + norm2 * norm2));
            min_margin = min_margin.min(margin);
            if margin < -1e-12 * norm2 {
                violations += 1;
            }
        }
    }
    Ok(vec![
        Metric::bounded("violations", violations as f64, Some(0.0)),
        Metric::info("min_margin", min_margin),
        Metric::bounded("engine_vs_coordinate_formula", oracle_gap, cfg.residual_bound(1e-12)),
    ])
}

fn mean_decay(_cfg: &RunConfig, _rng: &mut ChaCha8Rng) -> Result<Vec<Metric>> {
    let rows = atiyah_decay_table(16)?;
    let series: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.fitted_window)
        .map(|r| (r.t_or_radius, r.norm))
        .collect();
    let fit = fit_decay_exponent(&series, (2.0, 20.0))?;
    let g = atiyah_gaussian_table()?;
    let xs: Vec<f64> = g.iter().map(|r| r.t_or_radius).collect();
    let ys: Vec<f64> = g.iter().map(|r| r.norm.ln()).collect();
    let (gslope, _) = least_squares(&xs, &ys);
    Ok(vec![
        Metric::bounded("z2_axis.fitted_exponent", fit.exponent, Some(-6.0)),
        Metric::info("z2_axis.std_error", fit.std_error),
        Metric::info("gaussian.slope_in_abs_z1_squared", gslope),
        Metric::bounded(
            "gaussian.slope_deviation_from_minus_one",
            (gslope + 1.0).abs(),
            Some(0.05),
        ),
    ])
}

/// The densities used by the Θ check: (center, width) of truncated Gaussians.
pub const THETA_DENSITIES: [(f64, f64); 3] = [(1.0, 0.25), (0.5, 0.2), (-0.7, 0.3)];

fn theta_pairing(cfg: &RunConfig, _rng: &mut ChaCha8Rng) -> Result<Vec<Metric>> {
    let mut out = Vec::new();
    for (k, (center, width)) in THETA_DENSITIES.iter().enumerate() {
        let q = TestDensity::gaussian(*center, *width);
        let th = symplectic_theta_pairing(1.0, &q)?;
        out.push(Metric::bounded(
            format!("density{k}.route_agreement"),
            th.agreement(),
            cfg.residual_bound(1e-4),
        ));
    }
    let away = TestDensity::gaussian(2.0, 0.2);
    let th = symplectic_theta_pairing(1.0, &away)?;
    let oracle = theta_radial_oracle(1.0, &away)?;
    out.push(Metric::bounded(
        "away_from_zero.radial_oracle_gap",
        (th.homogeneity - oracle).norm().max((th.regularized - oracle).norm()),
        cfg.residual_bound(1e-4),
    ));
    Ok(out)
}

fn one_form_sum(cfg: &RunConfig, _rng: &mut ChaCha8Rng) -> Result<Vec<Metric>> {
    let tc = catalog::torus_case();
    let q = TestDensity::gaussian(1.0, 0.5);
    let tol = cfg.residual_bound(1e-3);
    let r = one_form_sum_identity_residual(&tc.action, &tc.lambda, &tc.mu, 1, &q, &q, cfg.s, &tc.point)?;
    let sw = catalog::torus_case_swapped();
    let m = one_form_sum_identity_residual(&sw.action, &sw.lambda, &sw.mu, 1, &q, &q, cfg.s, &sw.point)?;
    let v = |x: Option<f64>| x.unwrap_or(f64::NAN);
    Ok(vec![
        Metric::bounded("U1.residual", v(r.u1), tol),
        Metric::bounded("U2.residual", v(r.u2), tol),
        Metric::bounded("swapped.U1.residual", v(m.u1), tol),
        Metric::bounded("swapped.U2.residual", v(m.u2), tol),
    ])
}

/// Runs one check; the random stream depends only on the seed and the name.
pub fn run_check(info: &CheckInfo, cfg: &RunConfig) -> CheckRecord {
    let examples: Vec<String> = info
        .examples
        .iter()
        .filter(|e| cfg.uses(e))
        .map(|e| e.to_string())
        .collect();
    let mut record = CheckRecord {
        name: info.name.to_string(),
        identity: info.identity.to_string(),
        examples: examples.clone(),
        metrics: Vec::new(),
        status: Status::Skip,
    };
    if !info.examples.is_empty() && examples.is_empty() {
        return record;
    }
    let salt = info
        .name
        .bytes()
        .fold(0u64, |h, b| h.wrapping_mul(31).wrapping_add(u64::from(b)));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ salt);
    let result = match info.name {
        "algebra_suite" => algebra_suite(cfg, &mut rng),
        "volterra_oracle" => volterra_oracle(cfg, &mut rng),
        "suffit_bound" => suffit_bound(cfg, &mut rng),
        "closed_forms" => closed_forms(cfg, &mut rng),
        "transgression" => transgression(cfg, &mut rng),
        "localization" => localization(cfg, &mut rng),
        "multiplicativity" => multiplicativity(cfg, &mut rng),
        "atiyah_inequality" => atiyah_inequality(cfg, &mut rng),
        "mean_decay" => mean_decay(cfg, &mut rng),
        "theta_pairing" => theta_pairing(cfg, &mut rng),
        "one_form_sum" => one_form_sum(cfg, &mut rng),
        other => Err(Error::UnknownSelector(other.to_string())),
    };
    match result {
        Ok(metrics) => {
            record.status = if metrics.iter().all(Metric::passes) {
                Status::Pass
            } else {
                Status::Fail
            };
            record.metrics = metrics;
        }
        Err(e) => record.status = Status::Error(e.to_string()),
    }
    record
}

/// Runs the selected checks in name order.
pub fn run(cfg: &RunConfig) -> Result<Report> {
    cfg.validate()?;
    let mut records = Vec::new();
    for name in &cfg.checks {
        records.push(run_check(check_info(name)?, cfg));
    }
    Ok(Report {
        environment: environment_stamp(),
        config: cfg.echo(),
        records,
    })
}
