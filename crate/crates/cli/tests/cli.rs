use semiflat_cli::{run, CheckRecord, Report, RunOptions, Suite, SuiteConfig};
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_semiflat"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn sample_report() -> Report {
    let mut r = Report::default();
    r.records.push(CheckRecord::new("sl2", "brackets-a", "[L, Λ] = H", 1.0 / 3.0, 1e-10, 60));
    r.records.push(CheckRecord::new("ma", "refine, \"quoted\"", "a, b", 0.1 + 0.2, 0.8, 2));
    r.records.push(CheckRecord::new("bfield", "x", "y", f64::MAX, 5e-324, 0));
    r.records[1].wall_time_ms = 17;
    r.calibration.insert("yukawa/ratio-re".into(), std::f64::consts::PI);
    r
}

#[test]
fn empty_suite_list_gives_empty_report_and_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"n": 2, "potential": {"kind": "flat"}}"#);
    let out = dir.path().join("r.json");
    let st = bin().args(["verify", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert_eq!(st.code(), Some(0));
    let r = Report::load(&out).unwrap();
    assert!(r.records.is_empty());
}

#[test]
fn missing_grid_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"n": 2, "potential": {"kind": "grid", "path": "absent.csv"}, "suites": ["sl2"]}"#);
    let st = bin().args(["verify", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("r.json")).status().unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn malformed_configs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for (k, text) in [
        r#"{"n": 2, "potential": {"kind": "flat"}, "surprise": 1}"#,
        r#"{"n": 2, "potential": {"kind": "flat"}, "tolerances": {"sl2": 0.0}}"#,
        r#"{"n": 2, "potential": {"kind": "quadratic", "hessian": [[1, 2], [2, 1]]}}"#,
        r#"{"n": 2, "potential": {"kind": "flat"}, "grid_resolution": 16}"#,
        r#"{"n": 2, "potential": {"kind": "exact-ma", "c": 0.2}}"#,
        r#"{"n": 5, "potential": {"kind": "flat"}}"#,
    ]
    .into_iter()
    .enumerate()
    {
        let cfg = write(dir.path(), &format!("c{k}.json"), text);
        let st = bin().args(["verify", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("r.json")).status().unwrap();
        assert_eq!(st.code(), Some(2), "{text}");
    }
    let cfg = write(dir.path(), "ok.json", r#"{"n": 2, "potential": {"kind": "flat"}}"#);
    let st = bin().args(["verify", "--suite", "nope", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("r.json")).status().unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn solver_failure_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"n": 2, "potential": {"kind": "exp-tilt", "a": -50.0}}"#);
    let st = bin().args(["solve", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("g.csv")).status().unwrap();
    assert_eq!(st.code(), Some(3));
}

#[test]
fn solved_grid_feeds_a_grid_background() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.json", r#"{"n": 2, "potential": {"kind": "exact-ma", "c": 2.0}}"#);
    let st = bin().args(["solve", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("g.csv")).status().unwrap();
    assert_eq!(st.code(), Some(0));
    let cfg = write(dir.path(), "g.json", r#"{"n": 2, "potential": {"kind": "grid", "path": "g.csv"}, "suites": ["legendre"]}"#);
    let out = dir.path().join("r.csv");
    let st = bin().args(["verify", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert_eq!(st.code(), Some(0));
    assert!(Report::load(&out).unwrap().all_pass());
}

#[test]
fn sl2_suite_passes_on_flat_background() {
    let mut cfg = SuiteConfig::flat(2);
    cfg.suites = vec![Suite::Sl2];
    let out = run(&cfg, &RunOptions::default()).unwrap();
    assert_eq!(out.report.records.len(), 4);
    assert!(out.report.all_pass());
    assert_eq!(out.exit_code(), 0);
}

#[test]
fn failing_checks_exit_one_and_later_suites_still_run() {
    let mut cfg = SuiteConfig::flat(2);
    cfg.suites = vec![Suite::Sl2, Suite::Connections];
    cfg.tolerances.insert("sl2/intertwining".into(), 1e-300);
    cfg.potential = semiflat_cli::PotentialSpec::ExpTilt { a: 0.3 };
    let out = run(&cfg, &RunOptions::default()).unwrap();
    assert!(!out.report.all_pass());
    assert_eq!(out.exit_code(), 1);
    assert!(out.report.records.iter().any(|r| r.suite == "connections" && r.pass));
}

#[test]
fn tolerance_precedence() {
    let mut cfg = SuiteConfig::flat(1);
    cfg.suites = vec![Suite::Sl2];
    cfg.tolerances.insert("sl2".into(), 1e-3);
    cfg.tolerances.insert("sl2/intertwining".into(), 1e-4);
    let r = run(&cfg, &RunOptions::default()).unwrap().report;
    let tol = |c: &str| r.records.iter().find(|x| x.check == c).unwrap().tolerance;
    assert_eq!(tol("intertwining"), 1e-4);
    assert_eq!(tol("brackets-a"), 1e-3);
    let r = run(&cfg, &RunOptions { tolerance: Some(0.5), ..Default::default() }).unwrap().report;
    assert!(r.records.iter().all(|x| x.tolerance == 0.5));
}

#[test]
fn single_record_json_is_one_object_in_an_array() {
    let mut r = Report::default();
    r.records.push(CheckRecord::new("sl2", "brackets-a", "a", 0.0, 1.0, 1));
    let mut buf = Vec::new();
    r.write_json(&mut buf).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
    let recs = v["records"].as_array().unwrap();
    assert_eq!(recs.len(), 1);
    let keys: Vec<_> = recs[0].as_object().unwrap().keys().cloned().collect();
    let mut expected = ["suite", "check", "anchor", "max_residual", "tolerance", "pass", "samples", "wall_time_ms"].map(String::from).to_vec();
    expected.sort();
    let mut keys = keys;
    keys.sort();
    assert_eq!(keys, expected);
}

#[test]
fn json_round_trip_is_bit_exact() {
    let r = sample_report();
    let mut buf = Vec::new();
    r.write_json(&mut buf).unwrap();
    let back = Report::read_json(buf.as_slice()).unwrap();
    assert_eq!(back, r);
    for (a, b) in back.records.iter().zip(&r.records) {
        assert_eq!(a.max_residual.to_bits(), b.max_residual.to_bits());
    }
}

#[test]
fn csv_round_trip_is_bit_exact_and_has_one_header() {
    let r = sample_report();
    let mut buf = Vec::new();
    r.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("suite,check,anchor,max_residual,tolerance,pass,samples,wall_time_ms\n"));
    let back = Report::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.records, r.records);
    assert_eq!(csv::Reader::from_reader(buf.as_slice()).records().count(), r.records.len());
    assert_eq!(text.lines().count(), r.records.len() + 1);
}

#[test]
fn report_verb_converts_between_formats() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("r.json");
    sample_report().emit(&json).unwrap();
    let csv = dir.path().join("r.csv");
    let st = bin().arg("report").arg(&json).arg("--out").arg(&csv).status().unwrap();
    assert_eq!(st.code(), Some(0));
    assert_eq!(Report::load(&csv).unwrap().records, sample_report().records);
    let st = bin().arg("report").arg(&json).arg("--out").arg(dir.path().join("r.txt")).status().unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn seeds_change_samples_but_not_structure() {
    let mut cfg = SuiteConfig::flat(2);
    cfg.potential = semiflat_cli::PotentialSpec::ExpTilt { a: 0.3 };
    cfg.suites = vec![Suite::Connections];
    let opts = |seed| RunOptions { seed: Some(seed), omit_timing: true, ..Default::default() };
    let a = run(&cfg, &opts(1)).unwrap().report;
    let b = run(&cfg, &opts(1)).unwrap().report;
    let c = run(&cfg, &opts(2)).unwrap().report;
    assert_eq!(a, b);
    assert_eq!(a.records.len(), c.records.len());
    assert!(a.records.iter().zip(&c.records).any(|(x, y)| x.max_residual != y.max_residual));
}
