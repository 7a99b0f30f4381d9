use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn optnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_optnet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL_NETWORK: &str = r#"
seed = 4
connections = [
  "selector.evaluation -> orchestrator.features",
  "orchestrator.problem -> model.problem",
  "model.model -> orchestrator.model",
  "orchestrator.quality -> selector.quality",
]

[data]
source = "benchmark"
[data.benchmark]
n_observations = 200
n_features = 12
n_relevant = 3

[[nodes]]
id = "selector"
kind = "feature-selector"
[nodes.params.osga]
population_size = 16
max_evaluations = 400

[[nodes]]
id = "orchestrator"
kind = "feature-selection-orchestrator"

[[nodes]]
id = "model"
kind = "model"

[entry]
to = "selector.start"
"#;

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_writes_requested_shape() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bench.toml",
        "n_observations = 50\nn_features = 7\nn_relevant = 2\n",
    );
    let out = dir.path().join("draw");
    let o = optnet(&["generate", "--config", s(&cfg), "--seed", "3", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("data.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 51);
    assert_eq!(lines[0].split(',').count(), 8);
    let truth: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("truth.json")).unwrap()).unwrap();
    assert_eq!(truth["true_indices"].as_array().unwrap().len(), 2);
    assert_eq!(truth["seed"], 3);
}

#[test]
fn run_then_replay_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "net.toml", SMALL_NETWORK);
    let report = dir.path().join("report.json");
    let o = optnet(&["run", "--config", s(&cfg), "--out", s(&report)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let value: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert!(value["result"]["feature_selection"]["evaluations"].as_u64().unwrap() <= 400);
    assert!(value["timing"]["wall_time_s"].is_number());

    let replay = dir.path().join("replay.json");
    let o = optnet(&["run", "--config", s(&report), "--workers", "3", "--out", s(&replay)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("replay identical"));
    let again: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&replay).unwrap()).unwrap();
    assert_eq!(again["result"], value["result"]);
}

#[test]
fn tampered_report_fails_replay() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "net.toml", SMALL_NETWORK);
    let report = dir.path().join("report.json");
    assert!(optnet(&["run", "--config", s(&cfg), "--out", s(&report)]).status.success());
    let mut value: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    value["result"]["run"]["supersteps"] = serde_json::json!(1);
    fs::write(&report, serde_json::to_string(&value).unwrap()).unwrap();
    let o = optnet(&["run", "--config", s(&report)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("replay differs"));
}

#[test]
fn kind_mismatch_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = SMALL_NETWORK.replace(
        "\"orchestrator.quality -> selector.quality\"",
        "\"orchestrator.problem -> selector.quality\"",
    );
    let cfg = write(dir.path(), "bad.toml", &bad);
    let o = optnet(&["run", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("KindMismatch"), "{err}");
    assert!(err.contains("orchestrator.problem"), "{err}");
}

#[test]
fn usage_and_config_errors_exit_2() {
    assert_eq!(optnet(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(optnet(&["run"]).status.code(), Some(2));
    let o = optnet(&["run", "--config", "/nonexistent/net.toml"]);
    assert_eq!(o.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "typo.toml", &format!("{SMALL_NETWORK}\nsede = 3\n"));
    let o = optnet(&["run", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sede"));
}

#[test]
fn benchmark_writes_results_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bench.toml",
        r#"
seeds = [1, 2]
methods = ["full-ols", "oracle-ols"]
[benchmark]
n_observations = 200
n_features = 10
n_relevant = 3
"#,
    );
    let o = optnet(&["benchmark", "--config", s(&cfg), "--out", s(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("oracle-ols") && stdout.contains("means"));
    let table =
        optnet::experiment::ResultTable::from_csv(&fs::read_to_string(dir.path().join("results.csv")).unwrap())
            .unwrap();
    assert_eq!(table.rows.len(), 4);
}

#[test]
fn analyze_shipped_linear_system() {
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/linear_system.toml");
    let o = optnet(&["analyze", "--config", cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let inputs = &report["candidates"][0]["solution"]["inputs"];
    assert!((inputs[0].as_f64().unwrap() - 1.0).abs() < 0.01);
    assert!((inputs[1].as_f64().unwrap() - 2.0).abs() < 0.02);
}

#[test]
fn shipped_network_config_parses() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/feature_selection.toml");
    let cfg = optnet::config::NetworkConfig::load(Path::new(path)).unwrap();
    assert_eq!(cfg.nodes.len(), 3);
    assert_eq!(cfg.specs().unwrap().len(), 3);
    let bench = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/benchmark.toml");
    let exp: optnet::experiment::ExperimentConfig =
        toml::from_str(&fs::read_to_string(bench).unwrap()).unwrap();
    exp.validate().unwrap();
}
