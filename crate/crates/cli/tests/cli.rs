use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rpkep::fixtures;
use rpkep::io::write_instance;
use rpkep::reduction::{no_formula, yes_formula};
use serde_json::Value;
use tempfile::TempDir;

fn rpkep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rpkep"))
        .args(args)
        .env_remove("RPKEP_TIME_LIMIT_S")
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

fn stderr_json(out: &Output) -> Value {
    assert!(!out.status.success());
    serde_json::from_slice(&out.stderr).expect("stderr is json")
}

fn red_blue_file(dir: &TempDir) -> PathBuf {
    let path = dir.path().join("red-blue.json");
    write_instance(&fixtures::red_blue_pool(), &path).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_maxrp_on_red_blue_pool() {
    let dir = TempDir::new().unwrap();
    let f = red_blue_file(&dir);
    let v = stdout_json(&rpkep(&["solve", "--instance", s(&f), "--mechanism", "maxrp"]));
    assert_eq!(v["value"], 5);
    assert_eq!(v["rejection_proof_certified"], true);
    assert_eq!(v["report"]["rowgen"]["rejection_proof_certified"], true);

    let v = stdout_json(&rpkep(&["solve", "--instance", s(&f), "--mechanism", "social"]));
    assert_eq!(v["value"], 6);
    assert_eq!(v["rejection_proof_certified"], false);
    assert_eq!(v["witness"]["agent"], 0);

    let v = stdout_json(&rpkep(&[
        "solve",
        "--instance",
        s(&f),
        "--mechanism",
        "maxrp",
        "--tiebreak",
        "off",
        "--seed-constraints",
        "full-pool",
    ]));
    assert_eq!(v["value"], 5);
}

#[test]
fn simulate_rejection_on_red_blue_pool() {
    let dir = TempDir::new().unwrap();
    let f = red_blue_file(&dir);
    let v = stdout_json(&rpkep(&[
        "simulate",
        "--instance",
        s(&f),
        "--game",
        "reject",
        "--strategy",
        "rkep",
        "--responders",
        "red",
    ]));
    assert_eq!(v["per_agent_value"]["red"], 2);
    assert_eq!(v["per_agent_value"]["blue"], 3);
    assert_eq!(v["value"], 5);

    let err = stderr_json(&rpkep(&[
        "simulate", "--instance", s(&f), "--game", "reject", "--responders", "green",
    ]));
    assert_eq!(err["error"], "unknown_agent");

    let err = stderr_json(&rpkep(&[
        "simulate", "--instance", s(&f), "--game", "withhold", "--strategy", "rkep",
    ]));
    assert_eq!(err["error"], "bad_strategy");
}

#[test]
fn simulate_withholding_example() {
    let dir = TempDir::new().unwrap();
    let f = dir.path().join("w.json");
    write_instance(&fixtures::withholding_example(true), &f).unwrap();
    let v = stdout_json(&rpkep(&[
        "simulate", "--instance", s(&f), "--game", "withhold", "--responders", "A",
    ]));
    assert_eq!(v["per_agent_value"]["A"], 2);
    assert_eq!(v["baseline_value"]["A"], 1);
}

#[test]
fn experiment_errors_and_csv() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, "{}").unwrap();
    let err = stderr_json(&rpkep(&["experiment", "--spec", s(&empty)]));
    assert_eq!(err["error"], "empty_metrics");

    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"metrics": ["maxrp_ratio", "maxint_ratio", "WT"], "seeds": [1, 2, 3],
            "instance_source": {"density": {"pool_sizes": [4, 4], "arc_prob": 0.4}}}"#,
    )
    .unwrap();
    let csv = dir.path().join("out.csv");
    let json = dir.path().join("out.json");
    let out = rpkep(&["experiment", "--spec", s(&spec), "--csv", s(&csv), "--json", s(&json)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "instance_set,WA,RA,WT,RT,maxrp_ratio,maxint_ratio,all_withhold_ratio,iterations,\
         constraints_added,total_time_s,master_time_s,instances_solved"
    );
    assert!(lines.next().unwrap().ends_with(",3"));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["instances"].as_array().unwrap().len(), 3);

    let again = rpkep(&["experiment", "--spec", s(&spec)]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}

#[test]
fn experiment_files_source_resolves_relative_paths() {
    let dir = TempDir::new().unwrap();
    red_blue_file(&dir);
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"metrics": ["maxrp_ratio"], "instance_source": {"files": ["red-blue.json"]}}"#,
    )
    .unwrap();
    let out = rpkep(&["experiment", "--spec", s(&spec)]);
    let text = String::from_utf8(out.stdout).unwrap();
    let row = text.lines().nth(1).unwrap();
    assert!(row.contains("0.833333"), "{row}");
}

#[test]
fn reduce_yes_and_no() {
    let dir = TempDir::new().unwrap();
    for (formula, answer) in [(yes_formula(), "YES"), (no_formula(), "NO")] {
        let f = dir.path().join(format!("{answer}.cnf"));
        std::fs::write(&f, formula.to_text()).unwrap();
        let inst = dir.path().join(format!("{answer}.json"));
        let v = stdout_json(&rpkep(&[
            "reduce", "--formula", s(&f), "--decide", "--brute", "--out", s(&inst),
        ]));
        assert_eq!(v["t"], 41);
        assert_eq!(v["decision"], answer);
        assert_eq!(v["brute_force"], answer);
        assert!(inst.exists());
    }
    let bad = dir.path().join("bad.cnf");
    std::fs::write(&bad, "x: a\ny: b\na q 0\n").unwrap();
    let err = stderr_json(&rpkep(&["reduce", "--formula", s(&bad)]));
    assert_eq!(err["error"], "invalid_formula");
}

#[test]
fn generate_then_oracle() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("batch");
    let v = stdout_json(&rpkep(&[
        "generate", "--pools", "3,3", "--arc-prob", "0.4", "--seed", "5", "--count", "3",
        "--out", s(&out),
    ]));
    assert_eq!(v["written"].as_array().unwrap().len(), 3);
    let first = out.join("seed-5.json");
    let v = stdout_json(&rpkep(&["oracle", "--instance", s(&first), "--cap", "10000"]));
    assert_eq!(v["agree"], true);

    let one = dir.path().join("s.json");
    stdout_json(&rpkep(&[
        "generate", "--generator", "saidman", "--pools", "10,10", "--seed", "1", "--out", s(&one),
    ]));
    let v = stdout_json(&rpkep(&["solve", "--instance", s(&one), "--mechanism", "maxint"]));
    assert_eq!(v["rejection_proof_certified"], true);
}

#[test]
fn bad_input_reports_json() {
    let dir = TempDir::new().unwrap();
    let f = dir.path().join("broken.json");
    std::fs::write(&f, r#"{"schema_version": "1.0", "K": 3}"#).unwrap();
    let err = stderr_json(&rpkep(&["solve", "--instance", s(&f), "--mechanism", "social"]));
    assert_eq!(err["error"], "missing_field");

    let err = stderr_json(&rpkep(&["solve", "--mechanism", "nope"]));
    assert_eq!(err["error"], "usage");

    let missing = dir.path().join("nope.json");
    let err = stderr_json(&rpkep(&["oracle", "--instance", s(&missing)]));
    assert_eq!(err["error"], "io");
}
