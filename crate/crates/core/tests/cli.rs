use std::fs;
use std::path::Path;
use std::process::Command;

use regime_bsde::error::Error;
use regime_bsde::experiment::{describe, run, ExperimentConfig, KINDS};
use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_regime-bsde"))
}

fn write_config(dir: &Path, value: &Value) -> std::path::PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

fn trivial_bsde() -> Value {
    json!({
        "kind": "solve-bsde",
        "seed": 4,
        "params": {
            "driver": { "type": "zero" },
            "terminal": { "type": "constant", "values": [1.0] },
            "steps": 10,
            "n_paths": 50,
            "checks": { "y0": { "value": 1.0, "rel_tol": 1e-12 } }
        }
    })
}

#[test]
fn zero_driver_unit_terminal_reports_y0_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &trivial_bsde());
    let out = dir.path().join("out");
    let status = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["pass"], true);
    assert_eq!(summary["results"]["chains"][0]["y0"][0]["mean"], 1.0);
    assert!(out.join("bsde_solution.csv").exists() && out.join("stamp.json").exists());
}

#[test]
fn summary_embeds_a_config_that_parses_back() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_json(&trivial_bsde().to_string()).unwrap();
    let report = run(&cfg, Some(17), Some(dir.path())).unwrap();
    let echo = ExperimentConfig::from_json(&report.summary["config"].to_string()).unwrap();
    assert_eq!(echo.seed, 17);
    assert_eq!(echo.params, cfg.params);
    assert_eq!(echo.output_dir.as_deref(), Some(dir.path()));
    let stamp: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("stamp.json")).unwrap()).unwrap();
    assert_eq!(stamp["seed"], 17);
    assert_eq!(stamp["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn failed_verdict_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut value = trivial_bsde();
    value["params"]["checks"]["y0"]["value"] = json!(2.0);
    let cfg = write_config(dir.path(), &value);
    let status = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("o")).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn unknown_key_is_rejected_with_its_path() {
    let mut value = trivial_bsde();
    value["params"]["checks"]["y0"]["rel_tool"] = json!(0.1);
    let cfg = ExperimentConfig::from_json(&value.to_string()).unwrap();
    match cfg.validate() {
        Err(Error::ConfigInvalid(msg)) => assert!(msg.contains("params.checks.y0") && msg.contains("rel_tool"), "{msg}"),
        other => panic!("expected ConfigInvalid, got {other:?}"),
    }
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &value);
    let output = bin().args(["run", "--config"]).arg(&path).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("rel_tool"));
}

#[test]
fn top_level_typo_reports_line() {
    let text = "{\n  \"kind\": \"aggregate\",\n  \"sead\": 3\n}";
    match ExperimentConfig::from_json(text) {
        Err(Error::ConfigInvalid(msg)) => assert!(msg.contains("sead") && msg.contains("line 3"), "{msg}"),
        other => panic!("expected ConfigInvalid, got {other:?}"),
    }
}

#[test]
fn bad_numeric_parameter_is_caught_before_dispatch() {
    let dir = tempfile::tempdir().unwrap();
    let mut value = trivial_bsde();
    value["params"]["driver"] = json!({ "type": "linear", "coeffs": [40.0] });
    value["params"]["terminal"] = json!({ "type": "constant", "values": [1.0] });
    let cfg = ExperimentConfig::from_json(&value.to_string()).unwrap();
    assert!(matches!(run(&cfg, None, Some(&dir.path().join("never"))), Err(Error::ConfigInvalid(_))));
    assert!(!dir.path().join("never").exists());
}

#[test]
fn unknown_kind_is_an_error() {
    assert!(matches!(ExperimentConfig::from_json(r#"{"kind": "bogus"}"#), Err(Error::UnknownKind(_))));
    assert!(matches!(describe("bogus"), Err(Error::UnknownKind(_))));
    let output = bin().args(["describe", "bogus"]).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn describe_lists_defaults() {
    let text = describe("aggregate").unwrap();
    for field in ["fast", "slow", "partition", "epsilon"] {
        assert!(text.contains(field), "missing {field}");
    }
    let output = bin().args(["describe", "sweep-bsde"]).output().unwrap();
    assert_eq!(output.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&output.stdout).contains("[0.2, 0.1, 0.05, 0.025, 0.0125]"));
    for kind in KINDS {
        assert!(describe(kind).is_ok());
    }
}

#[test]
fn aggregate_config_reports_exact_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/example_3_2_aggregate.json");
    let report = run(&ExperimentConfig::from_file(&path).unwrap(), None, Some(dir.path())).unwrap();
    let q = &report.summary["results"]["aggregated_generator"];
    assert!((q[0][0].as_f64().unwrap() + 5.0 / 3.0).abs() < 1e-12);
    assert!((q[1][0].as_f64().unwrap() - 3.0).abs() < 1e-12);
    let csv = fs::read_to_string(dir.path().join("aggregated_generator.csv")).unwrap();
    assert!(csv.starts_with("row,col,value\n"));
}

#[test]
fn sweep_csv_has_positive_ks_and_no_timings() {
    let dir = tempfile::tempdir().unwrap();
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/example_3_2_sweep_bsde.json");
    let mut cfg = ExperimentConfig::from_file(&path).unwrap();
    cfg.params["n_paths"] = json!(500);
    cfg.params["checks"] = json!({ "trend": true });
    let report = run(&cfg, None, Some(dir.path())).unwrap();
    assert_eq!(report.exit_code(), 0);
    let mut reader = csv::Reader::from_path(dir.path().join("sweep.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let ks = headers.iter().position(|h| h == "ks_distance").unwrap();
    let secs = headers.iter().position(|h| h == "seconds").unwrap();
    for rec in reader.records() {
        let rec = rec.unwrap();
        assert!(rec[ks].parse::<f64>().unwrap() > 0.0);
        assert!(rec[secs].is_empty());
    }
}

#[test]
fn every_bundled_config_validates() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ExperimentConfig::from_file(&path).unwrap();
        cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n >= 12);
}
