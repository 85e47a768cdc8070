//! Runs every acceptance criterion at its stated tolerance and runtime budget
//! and prints one PASS/FAIL line per criterion.

use equichern::verify::{check_info, run_check, CheckRecord, RunConfig, Status};
use std::process::Command;
use std::time::{Duration, Instant};

struct Criterion {
    number: usize,
    title: &'static str,
    checks: &'static [&'static str],
    budget: Duration,
}

const CRITERIA: [Criterion; 10] = [
    Criterion {
        number: 1,
        title: "graded-algebra suite",
        checks: &["algebra_suite"],
        budget: Duration::from_secs(10),
    },
    Criterion {
        number: 2,
        title: "Volterra oracle and exponential bound",
        checks: &["volterra_oracle", "suffit_bound"],
        budget: Duration::from_secs(60),
    },
    Criterion {
        number: 3,
        title: "closed-form reproduction",
        checks: &["closed_forms"],
        budget: Duration::from_secs(30),
    },
    Criterion {
        number: 4,
        title: "transgression identity",
        checks: &["transgression"],
        budget: Duration::from_secs(120),
    },
    Criterion {
        number: 5,
        title: "non-abelian localization",
        checks: &["localization"],
        budget: Duration::from_secs(300),
    },
    Criterion {
        number: 6,
        title: "multiplicativity",
        checks: &["multiplicativity"],
        budget: Duration::from_secs(600),
    },
    Criterion {
        number: 7,
        title: "Atiyah transversal ellipticity",
        checks: &["atiyah_inequality"],
        budget: Duration::from_secs(5),
    },
    Criterion {
        number: 8,
        title: "mean-rapid decay",
        checks: &["mean_decay"],
        budget: Duration::from_secs(300),
    },
    Criterion {
        number: 9,
        title: "Theta pairing",
        checks: &["theta_pairing"],
        budget: Duration::from_secs(300),
    },
    Criterion {
        number: 10,
        title: "sum of one-forms",
        checks: &["one_form_sum"],
        budget: Duration::from_secs(600),
    },
];

fn summarize(records: &[CheckRecord]) -> String {
    let mut parts = Vec::new();
    for r in records {
        for m in &r.metrics {
            if let Some(b) = m.bound {
                parts.push(format!("{}.{}={:.3e}<={:.1e}", r.name, m.label, m.value, b));
            }
        }
        if let Status::Error(e) = &r.status {
            parts.push(format!("{}: error {e}", r.name));
        }
    }
    parts.join(" ")
}

fn determinism() -> (bool, String) {
    let args = [
        "run",
        "--check",
        "algebra_suite",
        "--check",
        "atiyah_inequality",
        "--check",
        "closed_forms",
        "--seed",
        "11",
    ];
    let a = Command::new(env!("CARGO_BIN_EXE_equichern"))
        .args(args)
        .output()
        .unwrap();
    let b = Command::new(env!("CARGO_BIN_EXE_equichern"))
        .args(args)
        .output()
        .unwrap();
    let same = a.status.success() && b.status.success() && a.stdout == b.stdout && !a.stdout.is_empty();
    (same, format!("{} bytes per report", a.stdout.len()))
}

fn main() {
    let cfg = RunConfig::default();
    let mut failures = Vec::new();
    for c in &CRITERIA {
        let start = Instant::now();
        let records: Vec<CheckRecord> = c
            .checks
            .iter()
            .map(|n| run_check(check_info(n).unwrap(), &cfg))
            .collect();
        let elapsed = start.elapsed();
        let ok = records.iter().all(|r| r.status == Status::Pass) && elapsed < c.budget;
        println!(
            "criterion {:>2} {}: {} ({:.1} s, budget {} s) {}",
            c.number,
            c.title,
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            c.budget.as_secs(),
            summarize(&records)
        );
        if !ok {
            failures.push(c.number);
        }
    }
    let (same, detail) = determinism();
    println!(
        "criterion 11 determinism: {} ({detail})",
        if same { "PASS" } else { "FAIL" }
    );
    if !same {
        failures.push(11);
    }
    if !failures.is_empty() {
        eprintln!("failed criteria: {failures:?}");
        std::process::exit(1);
    }
}
