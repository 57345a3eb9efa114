use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ugfbn"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn error_line(o: &Output) -> serde_json::Value {
    let err = String::from_utf8(o.stderr.clone()).unwrap();
    serde_json::from_str(err.lines().next().unwrap()).unwrap()
}

#[test]
fn analyze_worked_example() {
    let o = run(&[
        "analyze",
        &fixture("fig1.toml"),
        "--time",
        "0",
        "--demand",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("R_system=0.54000000"), "{out}");
    assert!(out.contains("0.00000000,0.46000000"));
    assert!(out.contains("1.00000000,0.54000000"));
    let pure = run(&[
        "analyze",
        &fixture("fig1.toml"),
        "--time",
        "0",
        "--accept",
        "1",
        "--method",
        "purebn",
    ]);
    assert!(stdout(&pure).contains("R_system=0.54000000"));
}

#[test]
fn validate_reports_unnormalized_table() {
    let o = run(&["validate", &fixture("table2_broken.toml")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("CPT column for A=0 sums to 0.9"));
    let e = error_line(&o);
    assert_eq!(e["error"], "validation");
    let ok = run(&["validate", &fixture("case1.toml")]);
    assert_eq!(ok.status.code(), Some(0));
}

#[test]
fn simulate_is_deterministic_and_needs_a_seed() {
    let args = [
        "simulate",
        &fixture("fig1.toml"),
        "--time",
        "0",
        "--trials",
        "1",
        "--seed",
        "7",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let big = run(&[
        "simulate",
        &fixture("fig1.toml"),
        "--time",
        "0",
        "--trials",
        "200000",
        "--seed",
        "3",
        "--demand",
        "1",
    ]);
    let out = stdout(&big);
    let r: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("R_estimate="))
        .unwrap()
        .parse()
        .unwrap();
    let se: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("standard_error="))
        .unwrap()
        .parse()
        .unwrap();
    assert!((r - 0.54).abs() <= 4.0 * se);

    let missing = run(&[
        "simulate",
        &fixture("fig1.toml"),
        "--time",
        "0",
        "--trials",
        "5",
    ]);
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(error_line(&missing)["error"], "usage");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        run(&["analyze", &fixture("fig1.toml")]).status.code(),
        Some(2)
    );
    let o = run(&["analyze", "/nonexistent/model.toml", "--time", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn compare_prints_both_methods() {
    let o = run(&["compare", &fixture("case1.toml"), "--time", "10000"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("[ugfbn]") && out.contains("[purebn]"));
    assert!(out.contains("max_abs_diff=0.00000000"));
    assert!(out.contains("ugfbn_ms=") && out.contains("purebn_ms="));
}

#[test]
fn bench_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    let o = run(&[
        "bench",
        &fixture("fig1.toml"),
        "--time",
        "0",
        "--step",
        "1",
        "--steps",
        "2",
        "--reps",
        "1",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{:?}", o);
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "step,components,bn_ms,ugfbn_ms,ratio,truncated");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("0,3,"));
    assert!(lines[3].starts_with("2,5,"));

    let zero = run(&[
        "bench",
        &fixture("fig1.toml"),
        "--time",
        "0",
        "--step",
        "1",
        "--steps",
        "0",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(zero.status.code(), Some(3));
}

#[test]
fn optimize_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.txt");
    let o = run(&[
        "optimize",
        &fixture("toy4.toml"),
        "--exhaustive",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("feasible=true"));
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.contains("[optimum]") && text.contains("[trace]"));
    assert!(text.contains("path = Exhaustive"));

    let o = run(&[
        "optimize",
        &fixture("case2.toml"),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.contains("[comparison]"));
    assert!(text
        .contains("metric,budget,baseline,optimum,k_baseline,k_optimum,delta_s1_pct,delta_s2_pct"));
    assert!(text.contains("heuristic = true"));
}

#[test]
fn infeasible_design_is_an_engine_error() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.txt");
    let o = run(&[
        "optimize",
        &fixture("case2_text_bounds.toml"),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_line(&o)["error"], "engine");
    assert!(std::fs::read_to_string(&report)
        .unwrap()
        .contains("feasible = false"));
    let no_design = run(&[
        "optimize",
        &fixture("fig1.toml"),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(no_design.status.code(), Some(1));
}
