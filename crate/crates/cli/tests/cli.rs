//! End-to-end tests of the `v2xpos` binary: exit codes, file formats, and
//! the file-level solve round trip.

use std::path::Path;
use std::process::{Command, Output};

fn v2xpos(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_v2xpos"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, content: &str) {
    std::fs::write(dir.join(name), content).unwrap();
}

const WORKED_OBS: &str = r#"[
  {"aod_deg": 45.0, "aoa_deg": 135.0, "rel_delay_ns": 0.0},
  {"aod_deg": -30.96375653207352, "aoa_deg": -149.03624346792648, "rel_delay_ns": -82.6743944680117},
  {"aod_deg": 18.434948822922010, "aoa_deg": 63.434948822922010, "rel_delay_ns": 99.30369906473817}
]"#;

#[test]
fn worked_observation_file_solves_to_the_vehicle() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "obs.json", WORKED_OBS);
    let out = v2xpos(&["hvp-solve", "--obs", "obs.json", "--anchor", "0,0"], dir.path());
    assert!(out.status.success());
    let fix: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((fix["x"].as_f64().unwrap() - 100.0).abs() < 1e-6);
    assert!(fix["y"].as_f64().unwrap().abs() < 1e-6);
    assert!((fix["d1"].as_f64().unwrap() - 141.4213562373095).abs() < 1e-6);
}

#[test]
fn two_paths_exit_one_with_named_error() {
    let dir = tempfile::tempdir().unwrap();
    let two: Vec<&str> = WORKED_OBS.lines().take(3).collect();
    let mut obs = two.join("\n");
    obs.truncate(obs.len() - 1); // drop trailing comma
    obs.push_str("\n]");
    write(dir.path(), "obs.json", &obs);
    let out = v2xpos(&["hvp-solve", "--obs", "obs.json", "--anchor", "0,0"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("under-determined"), "stderr: {stderr}");
}

#[test]
fn unknown_subcommand_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = v2xpos(&["no-such-command"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = v2xpos(&["hvp-solve", "--bogus-flag"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn scenario_gen_solve_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = v2xpos(
        &[
            "scenario-gen",
            "--seed",
            "99",
            "--n-scatterers",
            "4",
            "--out",
            "scen.json",
            "--obs-out",
            "obs.json",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let scen: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("scen.json")).unwrap())
            .unwrap();
    assert_eq!(scen["schema"], 1);

    let out = v2xpos(&["hvp-solve", "--obs", "obs.json", "--anchor", "0,0"], dir.path());
    assert!(out.status.success());
    let fix: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let dx = fix["x"].as_f64().unwrap() - scen["vehicle"]["x"].as_f64().unwrap();
    let dy = fix["y"].as_f64().unwrap() - scen["vehicle"]["y"].as_f64().unwrap();
    assert!((dx * dx + dy * dy).sqrt() < 1e-6);
}

#[test]
fn ranging_sweep_emits_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "sweep.json",
        r#"{
  "schema": 1,
  "estimators": ["toa", "pdoa"],
  "n_subcarriers": 256,
  "oversample_list": [1, 2],
  "snr_db_grid": ["inf", 30.0],
  "trials": 16,
  "master_seed": 5
}"#,
    );
    let out = v2xpos(
        &["ranging-sweep", "--config", "sweep.json", "--out", "rows.csv"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("rows.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "estimator,fs_hz,snr_db,trials,mae_m,rmse_m,p95_m");
    // 2 estimators x 2 rates x 2 SNR points.
    assert_eq!(lines.len(), 1 + 8);
}

#[test]
fn json_format_parses_and_matches_row_count() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "sweep.json",
        r#"{
  "schema": 1,
  "estimators": ["pdoa"],
  "n_subcarriers": 256,
  "snr_db_grid": [20.0],
  "trials": 8,
  "master_seed": 5
}"#,
    );
    let out = v2xpos(
        &[
            "ranging-sweep",
            "--config",
            "sweep.json",
            "--format",
            "json",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let rows: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 1);
    assert_eq!(rows[0]["estimator"], "pdoa");
}

#[test]
fn wrong_schema_version_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "sweep.json",
        r#"{"schema": 9, "estimators": ["pdoa"], "trials": 1, "master_seed": 0}"#,
    );
    let out = v2xpos(&["ranging-sweep", "--config", "sweep.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unsupported-schema"));
}

#[test]
fn ambiguity_violating_sweep_fails_before_running() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "sweep.json",
        r#"{
  "schema": 1,
  "estimators": ["pdoa"],
  "n_subcarriers": 256,
  "snr_db_grid": [20.0],
  "range_bounds_m": [50.0, 5000.0],
  "trials": 4,
  "master_seed": 5
}"#,
    );
    let out = v2xpos(&["ranging-sweep", "--config", "sweep.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid-sweep-config"));
}

#[test]
fn rss_scan_csv_columns_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "rss.json",
        r#"{
  "schema": 1,
  "pathloss": {"model": "free_space"},
  "freq_hz": 5.9e9,
  "paths": [{"aoa_deg": 10.0, "dist_m": 100.0}],
  "scan_deg": {"start": -90.0, "stop": 90.0, "step": 5.0}
}"#,
    );
    let out = v2xpos(
        &[
            "rss-scan", "--config", "rss.json", "--out", "rss.csv", "--plot", "rss.svg",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("rss.csv")).unwrap();
    assert!(csv.starts_with("angle_deg,rss_db\n"));
    assert_eq!(csv.lines().count(), 1 + 37);
    let svg = std::fs::read_to_string(dir.path().join("rss.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("polyline"));
    // The noise floor is reported on stderr, not mixed into the data file.
    assert!(String::from_utf8_lossy(&out.stderr).contains("-94"));
}

#[test]
fn classify_against_map_labels_doubles() {
    let dir = tempfile::tempdir().unwrap();
    let out = v2xpos(
        &[
            "scenario-gen",
            "--seed",
            "21",
            "--n-scatterers",
            "3",
            "--out",
            "scen.json",
            "--obs-out",
            "obs.json",
            "--max-bounces",
            "2",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    // Trim the oracle file to its five earliest paths (mix of bounce orders).
    let obs: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("obs.json")).unwrap())
            .unwrap();
    let trimmed = serde_json::json!({
        "schema": 1,
        "paths": obs["paths"].as_array().unwrap()[..5].to_vec(),
    });
    write(dir.path(), "obs5.json", &trimmed.to_string());
    let out = v2xpos(
        &[
            "classify",
            "--obs",
            "obs5.json",
            "--anchor",
            "0,0",
            "--map",
            "scen.json",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fix: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let scen: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("scen.json")).unwrap())
            .unwrap();
    let dx = fix["x"].as_f64().unwrap() - scen["vehicle"]["x"].as_f64().unwrap();
    let dy = fix["y"].as_f64().unwrap() - scen["vehicle"]["y"].as_f64().unwrap();
    assert!((dx * dx + dy * dy).sqrt() < 1e-3);
    assert!(fix["labels"].as_array().unwrap().len() == 5);
}
