use std::path::Path;
use std::process::{Command, Output};

use bse_core::cli::{EXIT_FINDING, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE};
use bse_core::theoremlab::CampaignConfig;
use serde_json::Value;

fn bse(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bse"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("BSE_OUT_DIR")
        .output()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("cfg.json");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn demos_pass_and_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["vacuum", "bell", "inverse", "coherent-covariance"] {
        let out = dir.path().join(name);
        let o = bse(&["demo", name], &out);
        assert_eq!(o.status.code(), Some(EXIT_OK), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        let report = json(&out.join("report.json"));
        assert_eq!(report["passed"], Value::Bool(true));
        let manifest = json(&out.join("manifest.json"));
        for p in manifest["outputs"].as_array().unwrap() {
            assert!(Path::new(p.as_str().unwrap()).exists());
        }
    }
}

#[test]
fn bell_demo_tracks_the_angle() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b");
    assert_eq!(bse(&["demo", "bell", "--theta", "0.7853981634"], &out).status.code(), Some(EXIT_OK));
    let ln = json(&out.join("report.json"))["details"]["report"]["log_negativity"].as_f64().unwrap();
    assert!((ln - 1.0).abs() < 1e-9);
    assert_eq!(bse(&["demo", "bell", "--theta", "0"], &out).status.code(), Some(EXIT_OK));
    let ln = json(&out.join("report.json"))["details"]["report"]["log_negativity"].as_f64().unwrap();
    assert_eq!(ln, 0.0);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bse(&["demo", "unknown"], dir.path()).status.code(), Some(EXIT_USAGE));
    assert_eq!(bse(&["frobnicate"], dir.path()).status.code(), Some(EXIT_USAGE));
    let cfg = write_config(dir.path(), "{ not json");
    assert_eq!(bse(&["verify", "--config", &cfg], dir.path()).status.code(), Some(EXIT_USAGE));
    let cfg = write_config(dir.path(), r#"{"version": 1, "tolerances": {"ppt": 1}}"#);
    assert_eq!(bse(&["verify", "--config", &cfg], dir.path()).status.code(), Some(EXIT_USAGE));
    let missing = dir.path().join("missing.json");
    assert_eq!(
        bse(&["verify", "--config", missing.to_str().unwrap()], dir.path()).status.code(),
        Some(EXIT_USAGE)
    );
}

#[test]
fn negative_weight_is_rejected_at_parse() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"version": 1, "n_trials": 0, "trials": [{
            "input": {"kind": "coherent_ensemble", "components": [
                {"weight": 1.2, "alphas": [[0.3, 0.0], [0.0, 0.0]]},
                {"weight": -0.2, "alphas": [[0.0, 0.0], [0.1, 0.1]]}]},
            "unitary": {"kind": "beam_splitter", "theta": 0.3}}]}"#,
    );
    let o = bse(&["verify", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(EXIT_USAGE));
    assert!(String::from_utf8_lossy(&o.stderr).contains("non-negative"));
}

#[test]
fn unsafe_cutoff_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"version": 1, "amplitude_bound": 3.0}"#);
    let o = bse(&["verify", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(EXIT_USAGE));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unsafe"));
}

#[test]
fn verify_writes_records_and_echoes_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"version": 1, "n_trials": 5, "cutoff": 10, "amplitude_bound": 0.7,
            "trials": [{"input": {"kind": "coherent_ensemble", "components": [
                {"weight": 1, "alphas": [[0.5, 0.0], [0.0, -0.5]]}]},
                "unitary": {"kind": "matrix", "rows": [[[0, 0], [1, 0]], [[1, 0], [0, 0]]]}}]}"#,
    );
    let out = dir.path().join("v");
    let o = bse(&["verify", "--config", &cfg, "--seed", "17"], &out);
    assert_eq!(o.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&o.stderr));
    let lines = std::fs::read_to_string(out.join("trials.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 6);
    let last: Value = serde_json::from_str(lines.lines().last().unwrap()).unwrap();
    assert_eq!(last["unitary"]["source"], "manual");
    assert!(last.get("wall_time").is_none());

    let manifest = json(&out.join("manifest.json"));
    let echo: CampaignConfig = serde_json::from_value(manifest["config"].clone()).unwrap();
    assert_eq!(echo.seed, 17);
    let again: CampaignConfig = serde_json::from_value(serde_json::to_value(&echo).unwrap()).unwrap();
    assert_eq!(again, echo);
    assert_eq!(json(&out.join("report.json"))["summary"]["seed"], 17);
}

#[test]
fn findings_and_truncation_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    // Rounding noise in the partial-transpose spectrum trips an absurdly tight tolerance.
    let cfg = write_config(
        dir.path(),
        r#"{"version": 1, "n_trials": 3, "cutoff": 10, "amplitude_bound": 0.7,
            "tolerances": {"ppt_tol": 1e-300}}"#,
    );
    let out = dir.path().join("f");
    assert_eq!(bse(&["verify", "--config", &cfg], &out).status.code(), Some(EXIT_FINDING));
    assert!(json(&out.join("report.json"))["summary"]["ppt_violations"].as_u64().unwrap() > 0);

    let cfg = write_config(
        dir.path(),
        r#"{"version": 1, "n_trials": 0, "cutoff": 6, "max_retries": 1,
            "trials": [{"input": {"kind": "coherent_ensemble", "components": [
                {"weight": 1, "alphas": [[2.5, 0.0], [0.0, 0.0]]}]},
                "unitary": {"kind": "beam_splitter", "theta": 0.4}}]}"#,
    );
    let out = dir.path().join("t");
    assert_eq!(bse(&["verify", "--config", &cfg], &out).status.code(), Some(EXIT_NUMERIC));
    let summary = &json(&out.join("report.json"))["summary"];
    assert_eq!(summary["truncation_failures"], 1);
    assert_eq!(summary["failures"][0]["kind"], "truncation");
}

#[test]
fn sweep_csv_schema_and_empty_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let o = bse(&["sweep", "--thetas", "0,0.39269908169872414,0.7853981633974483"], &out);
    assert_eq!(o.status.code(), Some(EXIT_OK));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert!(csv.starts_with("theta,phi0,phi1,negativity,"));
    assert_eq!(rows.len(), 3);
    assert!(rows[0][3].abs() < 1e-12);
    assert!(rows[2][3] > rows[1][3] && (rows[2][3] - 0.5).abs() < 1e-12);

    let cfg = write_config(
        dir.path(),
        r#"{"version": 1, "thetas": [], "cutoff": 10,
            "input": {"kind": "coherent_ensemble", "components": [{"weight": 1, "alphas": [[0.5, 0], [0, 0.3]]}]}}"#,
    );
    let out = dir.path().join("e");
    assert_eq!(bse(&["sweep", "--config", &cfg], &out).status.code(), Some(EXIT_OK));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

#[test]
fn classical_sweep_stays_ppt() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"version": 1, "cutoff": 12,
            "input": {"kind": "gaussian_product", "modes": [
                {"kind": "thermal", "nbar": 0.3}, {"kind": "coherent", "alpha": [0.6, -0.2]}]}}"#,
    );
    let out = dir.path().join("c");
    assert_eq!(bse(&["sweep", "--config", &cfg], &out).status.code(), Some(EXIT_OK));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let neg: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert!(neg <= 1e-8);
    }
}

#[test]
fn out_dir_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_bse"))
        .args(["demo", "vacuum"])
        .env("BSE_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(EXIT_OK));
    assert!(dir.path().join("report.json").exists());
    assert!(dir.path().join("manifest.json").exists());
}
