//! End-to-end runs of the binary against small configs.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_affabs"))
}

fn write(path: &Path, contents: &str) {
    std::fs::write(path, contents).unwrap();
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn sine_config(out_dir: &Path) -> String {
    format!(
        r#"{{
  "function": {{ "dsl": "f0 = sin(2*x0)" }},
  "domain": {{ "lower": [-2.0], "upper": [2.0] }},
  "points_per_dim": 9,
  "method": "both",
  "budget": 5,
  "smoothness": {{ "class": "lipschitz", "constant": 2.0 }},
  "out_dir": "{}",
  "seed": 7
}}"#,
        out_dir.display()
    )
}

#[test]
fn abstract_writes_artifacts_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let config = dir.path().join("run.json");
    write(&config, &sine_config(&out_dir));

    let output = run(&["abstract", config.to_str().unwrap()]);
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("method=onestep"));
    assert!(stdout.contains("method=incremental"));
    assert!(stdout.contains("kappa="));

    for name in
        ["abstraction_onestep.json", "abstraction_incremental.json", "report.json", "report.txt"]
    {
        assert!(out_dir.join(name).exists(), "missing {name}");
    }
    let first: Vec<Vec<u8>> = ["abstraction_onestep.json", "abstraction_incremental.json", "report.json"]
        .iter()
        .map(|n| std::fs::read(out_dir.join(n)).unwrap())
        .collect();

    // Same config, same seed: byte-identical artifacts.
    let output = run(&["abstract", config.to_str().unwrap()]);
    assert!(output.status.success());
    for (name, bytes) in ["abstraction_onestep.json", "abstraction_incremental.json", "report.json"]
        .iter()
        .zip(&first)
    {
        assert_eq!(&std::fs::read(out_dir.join(name)).unwrap(), bytes, "{name} changed");
    }
}

#[test]
fn verify_accepts_written_abstraction() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let config = dir.path().join("run.json");
    write(&config, &sine_config(&out_dir));
    assert!(run(&["abstract", config.to_str().unwrap()]).status.success());

    let abstraction = out_dir.join("abstraction_incremental.json");
    let output = run(&[
        "verify",
        config.to_str().unwrap(),
        "--abstraction",
        abstraction.to_str().unwrap(),
        "--samples",
        "10000",
    ]);
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("grid_sandwich"));
    assert!(stdout.contains("continuous_sandwich"));
}

#[test]
fn memory_cap_aborts_onestep_with_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let config = dir.path().join("run.json");
    write(
        &config,
        &format!(
            r#"{{
  "function": {{ "dsl": "f0 = x0^2" }},
  "domain": {{ "lower": [-1.0], "upper": [1.0] }},
  "points_per_dim": 21,
  "method": "onestep",
  "memory_cap": 10,
  "out_dir": "{}"
}}"#,
            out_dir.display()
        ),
    );
    let output = run(&["abstract", config.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(3));
    let report = std::fs::read_to_string(out_dir.join("report.json")).unwrap();
    assert!(report.contains("\"onestep_na\": true"));
}

#[test]
fn plot_data_emits_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let config = dir.path().join("run.json");
    write(&config, &sine_config(&out_dir));
    assert!(run(&["abstract", config.to_str().unwrap()]).status.success());

    let abstraction = out_dir.join("abstraction_incremental.json");
    let csv_path = dir.path().join("plot.csv");
    let output = run(&[
        "plot-data",
        config.to_str().unwrap(),
        "--abstraction",
        abstraction.to_str().unwrap(),
        "--increments",
        "1,2",
        "--out",
        csv_path.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "x0,f0,upper0,lower0,upper0_k1,lower0_k1,upper0_k2,lower0_k2");
    assert_eq!(lines.count(), 9);
}

#[test]
fn mesh_info_prints_plan() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    write(&config, &sine_config(&dir.path().join("out")));
    let output = run(&["mesh-info", config.to_str().unwrap()]);
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("total grid points:     9"));
    assert!(stdout.contains("planned increments:"));
}

#[test]
fn bench_runs_multiple_configs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    write(&a, &sine_config(&out_dir));
    write(&b, &sine_config(&out_dir));
    let output = run(&[
        "bench",
        a.to_str().unwrap(),
        b.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("== a"));
    assert!(stdout.contains("== b"));
    assert!(out_dir.join("bench_a_report.json").exists());
    assert!(out_dir.join("bench_b_report.json").exists());
}

#[test]
fn invalid_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    // Incremental method with no budget.
    write(
        &config,
        r#"{
  "function": { "dsl": "f0 = x0" },
  "domain": { "lower": [0.0], "upper": [1.0] },
  "points_per_dim": 5,
  "method": "incremental"
}"#,
    );
    let output = run(&["abstract", config.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("budget"));

    let missing = run(&["abstract", "/nonexistent/config.json"]);
    assert_eq!(missing.status.code(), Some(1));
}
