use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mfimpulse"))
}

fn repo(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn validate(doc: &Value) {
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(repo("schemas/report.schema.json")).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{errors:#?}");
}

fn logistic() -> String {
    repo("configs/logistic.toml").display().to_string()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn check_model_passes_builtin_examples() {
    for cfg in ["configs/logistic.toml", "configs/loksendal.toml", "configs/immigration.toml"] {
        let out = run(&["-c", &repo(cfg).display().to_string(), "check-model"]);
        assert!(out.status.success(), "{cfg}: {}", String::from_utf8_lossy(&out.stderr));
        let doc = json(&out);
        validate(&doc);
        for c in doc["report"]["data"].as_array().unwrap() {
            assert_eq!(c["status"], "pass", "{cfg}: {c}");
        }
    }
}

#[test]
fn nonpositive_fixed_cost_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(repo("configs/logistic.toml")).unwrap().replace("fixed_cost = \"0.5\"", "fixed_cost = \"0\"");
    let out = run(&["-c", &write_config(dir.path(), &text), "check-model"]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "config");
    assert!(err["error"]["message"].as_str().unwrap().contains("fixed cost"));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{}\n[solver]\ngrid_size = 10\n", std::fs::read_to_string(repo("configs/logistic.toml")).unwrap());
    let out = run(&["-c", &write_config(dir.path(), &text), "solve-classical", "--price", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn solve_classical_report_validates() {
    let out = run(&["-c", &logistic(), "solve-classical", "--price", "0.463276"]);
    assert!(out.status.success());
    let doc = json(&out);
    validate(&doc);
    let data = &doc["report"]["data"];
    assert_eq!(data["boundary_case"], "interior");
    assert!((data["value"].as_f64().unwrap() - 2.674072).abs() < 1e-5);
    assert!(data["residual_y"].as_f64().unwrap() < 1e-6);
}

#[test]
fn infeasible_price_exits_with_one() {
    let out = run(&["-c", &logistic(), "solve-classical", "--price", "0"]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "infeasible");
}

#[test]
fn solve_mfg_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("trace.csv");
    let out = run(&["-c", &logistic(), "--grid", "64", "--csv", csv.to_str().unwrap(), "solve-mfg"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&out);
    validate(&doc);
    assert!((doc["report"]["data"]["z_star"].as_f64().unwrap() - 5.221743).abs() < 1e-5);
    assert_eq!(doc["config"]["solver"]["mfg_grid"], 64);
    let text = std::fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "z,price,w,y,mapped");
    assert_eq!(text.lines().count(), 66);
}

#[test]
fn solve_mfc_and_best_response() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("surface.csv");
    let out = run(&["-c", &logistic(), "--csv", csv.to_str().unwrap(), "solve-mfc", "--surface-points", "12"]);
    assert!(out.status.success());
    let doc = json(&out);
    validate(&doc);
    assert!((doc["report"]["data"]["value"].as_f64().unwrap() - 2.916862).abs() < 1e-5);
    let text = std::fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "w,y,supply_rate,upsilon");

    let out = run(&["-c", &logistic(), "best-response", "--rate", "4.559874", "--baseline", "2.916862"]);
    let doc = json(&out);
    validate(&doc);
    assert!((doc["report"]["data"]["gap"].as_f64().unwrap() - 0.147439).abs() < 1e-5);
}

#[test]
fn simulate_is_reproducible_and_honours_seed() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("cycles.csv");
    let args = ["-c", &logistic(), "--seed", "7", "simulate", "--w", "1.279499", "--y", "5.368681", "--cycles", "200", "--dt", "1e-3"];
    let first = json(&run(&[&args[..], &["--csv", csv.to_str().unwrap()]].concat()));
    let second = json(&run(&args));
    validate(&first);
    assert_eq!(first["report"], second["report"]);
    assert_eq!(first["report"]["data"]["seed"], 7);
    let other = json(&run(&["-c", &logistic(), "--seed", "8", "simulate", "--w", "1.279499", "--y", "5.368681", "--cycles", "200", "--dt", "1e-3"]));
    assert_ne!(first["report"]["data"]["value"], other["report"]["data"]["value"]);
    let text = std::fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "cycle,time,running_reward,steps,guard_hits");
    assert_eq!(text.lines().count(), 201);
}

#[test]
fn idle_horizon_and_zero_horizon() {
    let out = run(&["-c", &logistic(), "simulate", "--idle", "--horizon", "50", "--dt", "1e-3"]);
    assert!(out.status.success());
    let doc = json(&out);
    validate(&doc);
    assert_eq!(doc["report"]["data"]["impulses"], 0);
    let out = run(&["-c", &logistic(), "simulate", "--w", "1", "--y", "5", "--horizon", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn tabulate_columns() {
    let out = run(&["-c", &logistic(), "tabulate", "--price", "0.5", "--points", "20"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "x,s,m,speed_measure,xi,g,h_p");
    assert_eq!(text.lines().count(), 21);
}

#[test]
fn reproduce_tables_layout() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("tables.json");
    let out = run(&["reproduce-tables", "--example", "logistic", "-o", report.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "Problem,w*,y*,Supply Rate,Price,Value");
    assert!(lines[1].starts_with("MFG,1.279499,5.368681,5.221743,0.463276,2.674072"));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    validate(&doc);

    let out = run(&["reproduce-tables", "--example", "gompertz"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_config_and_bad_flags() {
    assert_eq!(run(&["solve-mfg"]).status.code(), Some(1));
    assert_eq!(run(&["solve-classical", "--price", "abc"]).status.code(), Some(1));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}
