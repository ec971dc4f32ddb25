use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_relay-attack"))
}

fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// `key: value` lines of a summary.
fn field(o: &Output, key: &str) -> Option<String> {
    stdout(o).lines().find_map(|l| l.strip_prefix(&format!("{key}: ")).map(str::to_string))
}

#[test]
fn nflb_on_triad() {
    let triad = data("fixtures/triad.json");
    let t = triad.to_str().unwrap();
    let o = run(&["nflb", t, "--budget-count", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(field(&o, "nflb").as_deref(), Some("0.00"));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = run(&["nflb", t, "--budget-count", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(field(&o, "nflb").as_deref(), Some("2.00"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v["nflb"]["dcopf_value"].as_f64(), Some(2.0));
}

#[test]
fn eq8_reports_its_m() {
    let o = run(&["nflb", data("fixtures/triad.json").to_str().unwrap(), "--budget-pct", "34", "--formulation", "eq8"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(field(&o, "m").as_deref(), Some("1"));
    assert_eq!(field(&o, "value").as_deref(), Some("2.00"));
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["nflb", data("fixtures/triad.json").to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["nflb", "/no/such/file.json", "--budget-count", "1"]).status.code(), Some(3));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(run(&["nflb", bad.to_str().unwrap(), "--budget-count", "1"]).status.code(), Some(3));
    let o = run(&["nflb", data("fixtures/triad.json").to_str().unwrap(), "--budget-count", "9"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["theory", "tu", data("cases/case118.m").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    let o = run(&["theory", "duals", data("cases/case118.m").to_str().unwrap(), "--budget-count", "5"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(run(&["--help"]).status.success());
}

#[test]
fn sweep_rejects_empty_budgets_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let triad = data("fixtures/triad.json");
    let cfg = dir.path().join("empty.toml");
    std::fs::write(&cfg, format!("instances = [{:?}]\nbudgets = []\n", triad)).unwrap();
    assert_eq!(run(&["sweep", cfg.to_str().unwrap()]).status.code(), Some(1));

    let cfg = dir.path().join("ok.toml");
    std::fs::write(&cfg, format!("instances = [{:?}]\nbudgets = [34, 100]\ntime_limit_s = 60\noutput_dir = \"out\"\n", triad)).unwrap();
    let o = run(&["sweep", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(field(&o, "new_cells").as_deref(), Some("2"));
    let o = run(&["sweep", cfg.to_str().unwrap(), "--jobs", "2"]);
    assert_eq!(field(&o, "new_cells").as_deref(), Some("0"));
    assert_eq!(field(&o, "skipped_cells").as_deref(), Some("2"));
    assert!(dir.path().join("out/results.csv").exists());
}

#[test]
fn theory_checks() {
    let triad = data("fixtures/triad.json");
    let t = triad.to_str().unwrap();
    for args in [vec!["theory", "tu", t], vec!["theory", "thm2", t, "--trials", "100"], vec!["theory", "duals", t], vec!["theory", "isf", t]] {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stdout(&o));
        assert!(stdout(&o).starts_with("PASS: "), "{args:?}");
    }
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.json");
    let o = run(&["theory", "prop4", "--n", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let line = stdout(&o);
    assert!(line.starts_with("PASS: flow-polytope feasible, DCOPF infeasible, violating edge (7,9)"), "{line}");
    assert!(line.contains("limit 1.50"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v["check"], "prop4");
    assert_eq!(v["detail"]["critical_edge"], serde_json::json!([7, 9]));
}

#[test]
fn gen_is_deterministic_and_loadable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let o = run(&["gen", "random", "--buses", "6", "--seed", "7", "--out", p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        assert_eq!(field(&o, "buses").as_deref(), Some("6"));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let o = run(&["gen", "prop4", "--n", "1"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["buses"].as_array().unwrap().len(), 3);
    assert_eq!(v["lines"].as_array().unwrap().len(), 3);
    let o = run(&["gen", "prop4", "--n", "3", "--out", a.to_str().unwrap()]);
    assert_eq!(field(&o, "buses").as_deref(), Some("9"));
    assert_eq!(field(&o, "lines").as_deref(), Some("11"));
    assert_eq!(run(&["nflb", a.to_str().unwrap(), "--budget-count", "1"]).status.code(), Some(0));
}
