use equichern::verify::{check_info, parse_config_text, run, CheckInfo, Report, RunConfig, Status, CHECKS};
use equichern::Error;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_equichern"))
}

fn kv(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

#[test]
fn checks_are_sorted_and_unique() {
    let names: Vec<&str> = CHECKS.iter().map(|c| c.name).collect();
    let mut sorted = names.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(names, sorted);
    assert!(matches!(check_info("nope"), Err(Error::UnknownSelector(_))));
}

#[test]
fn command_line_overrides_file_settings() {
    let file = parse_config_text("# comment\nT = 20\nseed = 7\ncheck = algebra_suite\n\n").unwrap();
    let cfg = RunConfig::from_sources(&file, &kv(&[("T", "30"), ("grid", "10")])).unwrap();
    assert_eq!(cfg.t, 30.0);
    assert_eq!(cfg.seed, 7);
    assert_eq!(cfg.grid, 10);
    assert_eq!(cfg.checks, vec!["algebra_suite".to_string()]);
    assert_eq!(cfg.s, RunConfig::default().s);
}

#[test]
fn invalid_settings_are_rejected() {
    for (k, v) in [
        ("tol", "0"),
        ("tol", "-1e-3"),
        ("tol", "inf"),
        ("T", "nan"),
        ("grid", "1"),
    ] {
        let r = RunConfig::from_sources(&[], &kv(&[(k, v)]));
        assert!(matches!(r, Err(Error::Config(_))), "{k} = {v}");
    }
    assert!(RunConfig::from_sources(&[], &kv(&[("example", "klein_bottle")])).is_err());
    assert!(RunConfig::from_sources(&[], &kv(&[("colour", "blue")])).is_err());
    assert!(parse_config_text("just words").is_err());
}

#[test]
fn checks_outside_the_selected_example_are_skipped() {
    let cfg = RunConfig::from_sources(
        &[],
        &kv(&[
            ("example", "plane_rotation"),
            ("check", "atiyah_inequality,algebra_suite"),
        ]),
    )
    .unwrap();
    let report = run(&cfg).unwrap();
    assert_eq!(report.records[0].name, "algebra_suite");
    assert_eq!(report.records[0].status, Status::Pass);
    assert_eq!(report.records[1].status, Status::Skip);
    assert!(report.passed());
}

#[test]
fn tolerance_override_tightens_residual_bounds() {
    let cfg = RunConfig::from_sources(&[], &kv(&[("check", "closed_forms"), ("tol", "1e-300")])).unwrap();
    let report = run(&cfg).unwrap();
    assert_eq!(report.records[0].status, Status::Fail);
    assert!(!report.passed());
}

#[test]
fn report_parse_round_trips() {
    let cfg = RunConfig::from_sources(&[], &kv(&[("check", "volterra_oracle,suffit_bound"), ("seed", "3")])).unwrap();
    let report = run(&cfg).unwrap();
    let text = report.render();
    let parsed = Report::parse(&text).unwrap();
    assert_eq!(parsed, report);
    assert_eq!(parsed.render(), text);
}

#[test]
fn report_keeps_error_messages() {
    let report = Report {
        environment: "test".into(),
        config: vec![],
        records: vec![equichern::verify::CheckRecord {
            name: "x".into(),
            identity: "y".into(),
            examples: vec![],
            metrics: vec![],
            status: Status::Error("quadrature failed".into()),
        }],
    };
    let parsed = Report::parse(&report.render()).unwrap();
    assert_eq!(parsed, report);
    assert!(!parsed.passed());
}

#[test]
fn cli_lists_every_check() {
    let out = bin().arg("list").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for CheckInfo { name, .. } in CHECKS {
        assert!(text.contains(name));
    }
}

#[test]
fn cli_exit_codes() {
    let bad = bin()
        .args(["run", "--check", "algebra_suite", "--tol", "0"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
    let unknown = bin().args(["run", "--check", "no_such_check"]).output().unwrap();
    assert_eq!(unknown.status.code(), Some(2));
    let failing = bin()
        .args(["run", "--check", "closed_forms", "--tol", "1e-300"])
        .output()
        .unwrap();
    assert_eq!(failing.status.code(), Some(1));
    let ok = bin().args(["run", "--check", "algebra_suite"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
}

#[test]
fn cli_report_rerenders_saved_output() {
    let dir = std::env::temp_dir().join(format!("equichern-report-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("report.txt");
    let cfg_path = dir.join("run.cfg");
    std::fs::write(&cfg_path, "check = atiyah_inequality\ngrid = 20\n").unwrap();
    let run = bin()
        .args(["run", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&path)
        .output()
        .unwrap();
    assert!(run.status.success());
    let saved = std::fs::read_to_string(&path).unwrap();
    assert!(saved.contains("grid = 20"));
    let shown = bin().arg("report").arg(&path).output().unwrap();
    assert_eq!(String::from_utf8(shown.stdout).unwrap(), saved);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn cli_gaussian_decay_table_has_unit_slope_rows() {
    let out = bin().args(["decay", "--profile", "gaussian"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t_or_radius,norm,fitted_window_flag"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 10);
    for w in rows.windows(2) {
        let slope = (w[1].1.ln() - w[0].1.ln()) / (w[1].0 - w[0].0);
        assert!((slope + 1.0).abs() < 0.05, "{slope}");
    }
    let other = bin().args(["decay", "--example", "plane_rotation"]).output().unwrap();
    assert_eq!(other.status.code(), Some(2));
}
