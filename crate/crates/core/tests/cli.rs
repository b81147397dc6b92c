use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_udn-coverage");
const HEADER: &str = "lambda,theta_db,association,engine,pcov,err,flag,wall_ms";

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn write_config(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn cli(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("UDN_COVERAGE_WORKERS")
        .output()
        .unwrap()
}

const NLOS_THREE: &str = r#"{
  "schema_version": 1,
  "scenario": {
    "path_loss": { "exponents": [4.0] },
    "los": { "kind": "none" },
    "fading": { "m": 1 },
    "associations": ["closest"]
  },
  "lambda_grid": [0.001, 0.01, 0.1],
  "theta_grid_db": [0.0],
  "engines": ["analytic"]
}"#;

#[test]
fn analytic_nlos_rows() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "a.json", NLOS_THREE);
    let out = cli(&["run", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(HEADER));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    for (row, lambda) in rows.iter().zip(["0.001", "0.01", "0.1"]) {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f.len(), 8);
        assert_eq!(f[0], lambda);
        assert_eq!(&f[1..4], &["0.0", "closest", "analytic"]);
        let pcov: f64 = f[4].parse().unwrap();
        assert!((pcov - 0.5601).abs() < 1e-4, "{pcov}");
        assert_eq!(f[6], "");
        assert_eq!(f[7], "");
    }
}

#[test]
fn empty_grid_exits_with_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "e.json", &NLOS_THREE.replace("[0.001, 0.01, 0.1]", "[]"));
    for cmd in ["run", "validate"] {
        let out = cli(&[cmd, cfg.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2));
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains("line 9") && err.contains("lambda_grid"), "{err}");
    }
}

#[test]
fn malformed_json_reports_its_line() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "bad.json", &NLOS_THREE.replace("\"m\": 1", "\"m\": "));
    let out = cli(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 6"));
}

#[test]
fn validate_reports_shipped_figure_config() {
    let out = cli(&["validate", configs_dir().join("fig1.json").to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("OK, 124 cells"));
    assert_eq!(text.lines().filter(|l| l.starts_with("  lambda=")).count(), 124);
    for name in ["fig1_nlos.json", "fig2.json", "fig3.json", "fig3_nlos.json"] {
        let out = cli(&["validate", configs_dir().join(name).to_str().unwrap()]);
        assert!(out.status.success(), "{name}");
    }
    let with_mc = cli(&[
        "validate",
        configs_dir().join("fig1.json").to_str().unwrap(),
        "--engines",
        "analytic,montecarlo",
    ]);
    assert!(String::from_utf8(with_mc.stdout).unwrap().starts_with("OK, 248 cells"));
}

#[test]
fn validate_rejects_small_exponent_and_missing_seed() {
    let dir = TempDir::new().unwrap();
    let strongest = NLOS_THREE.replace("[4.0]", "[1.9]").replace("[\"closest\"]", "[\"strongest\"]");
    let cfg = write_config(&dir, "s.json", &strongest);
    let out = cli(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("> 2"));

    let cfg = write_config(&dir, "n.json", NLOS_THREE);
    let out = cli(&["validate", cfg.to_str().unwrap(), "--engines", "montecarlo"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn unknown_engine_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "a.json", NLOS_THREE);
    let out = cli(&["run", cfg.to_str().unwrap(), "--engines", "magic"]);
    assert!(!out.status.success());
}

const MIXED: &str = r#"{
  "schema_version": 1,
  "scenario": {
    "path_loss": { "exponents": [4.0] },
    "los": { "kind": "umi" },
    "fading": { "k_db": 15 },
    "associations": ["closest", "strongest"]
  },
  "lambda_grid": [0.01, 0.1],
  "theta_grid_db": [-5, 0],
  "engines": ["analytic", "montecarlo"],
  "mc": { "n_realizations": 2000, "seed": 42 }
}"#;

#[test]
fn outputs_are_identical_across_runs_and_workers() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "m.json", MIXED);
    let run = |workers: &str, name: &str| {
        let path = dir.path().join(name);
        let out = cli(&["run", cfg.to_str().unwrap(), "--workers", workers, "--output", path.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(path).unwrap()
    };
    let a = run("1", "a.csv");
    let b = run("1", "b.csv");
    let c = run("8", "c.csv");
    assert_eq!(a, b);
    assert_eq!(a, c);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 2 * 2);
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let pcov: f64 = f[4].parse().unwrap();
        assert!((0.0..=1.0).contains(&pcov) || f[6].contains("ExceedsOne"), "{line}");
    }
}

#[test]
fn workers_default_from_environment() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "a.json", NLOS_THREE);
    let out = Command::new(BIN)
        .args(["run", cfg.to_str().unwrap()])
        .env("UDN_COVERAGE_WORKERS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    let bad = Command::new(BIN)
        .args(["run", cfg.to_str().unwrap()])
        .env("UDN_COVERAGE_WORKERS", "many")
        .output()
        .unwrap();
    assert!(!bad.status.success());
}

#[test]
fn jsonl_and_timing() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "a.json", NLOS_THREE);
    let out = cli(&["run", cfg.to_str().unwrap(), "--format", "jsonl", "--timing"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["engine"], "analytic");
        assert!(v["wall_ms"].as_f64().unwrap() >= 0.0);
    }
}

#[test]
fn output_path_from_config() {
    let dir = TempDir::new().unwrap();
    let target = dir.path().join("from_config.csv");
    let body = NLOS_THREE.replace(
        "\"engines\": [\"analytic\"]",
        &format!("\"engines\": [\"analytic\"], \"output\": {{ \"path\": {:?} }}", target.to_str().unwrap()),
    );
    let cfg = write_config(&dir, "o.json", &body);
    let out = cli(&["run", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert!(std::fs::read_to_string(target).unwrap().starts_with(HEADER));
}

#[test]
fn numerical_failure_flushes_partial_rows() {
    let dir = TempDir::new().unwrap();
    let body = MIXED
        .replace("\"mc\": { \"n_realizations\": 2000, \"seed\": 42 }", "\"mc\": { \"n_realizations\": 200, \"seed\": 42 }, \"quadrature\": { \"rel_tol\": 1e-13, \"abs_tol\": 1e-300, \"max_subdivisions\": 1 }");
    let cfg = write_config(&dir, "q.json", &body);
    let out_path = dir.path().join("partial.csv");
    let out = cli(&["run", cfg.to_str().unwrap(), "--output", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("engine=analytic") && err.contains("lambda="), "{err}");
    let text = std::fs::read_to_string(out_path).unwrap();
    assert_eq!(text.lines().next(), Some(HEADER));
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r.contains(",montecarlo,")));
}

#[test]
fn missing_config_is_an_io_error() {
    let out = cli(&["run", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(1));
}
