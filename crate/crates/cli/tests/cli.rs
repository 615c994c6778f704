//! End-to-end tests of the `qjump` binary: exit codes, output layout,
//! manifest hashing, and byte-level determinism.

use std::path::Path;
use std::process::{Command, Output};

fn qjump(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qjump"))
        .args(args)
        .output()
        .expect("spawn qjump")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const WIGNER_GRW: &str = r#"
schema_version = 1
experiment = "wigner"
master_seed = 42

[wigner]
alpha = [0.6, 0.0]
beta = [0.8, 0.0]
regime = "grw"
n_trials = 400
"#;

#[test]
fn wigner_run_writes_results_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "run.toml", WIGNER_GRW);
    let out_dir = dir.path().join("out");
    let out = qjump(&[
        "run",
        "--config",
        &config,
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    for file in ["result.json", "trials.csv", "manifest.json"] {
        assert!(out_dir.join(file).exists(), "missing {file}");
    }
    let result: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("result.json")).unwrap())
            .unwrap();
    let p = result["result"]["p_o_plus"]["est"].as_f64().unwrap();
    assert!((p - 0.5392).abs() < 0.1, "p_o_plus = {p}");

    // Every payload file is listed in the manifest with its actual hash.
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    let files = manifest["files"].as_array().unwrap();
    assert_eq!(files.len(), 2);
    for entry in files {
        let name = entry["name"].as_str().unwrap();
        let bytes = std::fs::read(out_dir.join(name)).unwrap();
        let digest = hex::encode(sha2::Sha256::digest(&bytes));
        assert_eq!(
            entry["sha256"].as_str().unwrap(),
            digest,
            "hash mismatch for {name}"
        );
    }
    assert!(manifest["wall_time_s"].as_f64().unwrap() >= 0.0);
}

use sha2::Digest;

#[test]
fn identical_config_and_seed_give_identical_payload_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "run.toml", WIGNER_GRW);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    assert!(qjump(&[
        "run",
        "--config",
        &config,
        "--output-dir",
        out_a.to_str().unwrap()
    ])
    .status
    .success());
    assert!(qjump(&[
        "run",
        "--config",
        &config,
        "--output-dir",
        out_b.to_str().unwrap(),
        "--jobs",
        "3"
    ])
    .status
    .success());
    for file in ["result.json", "trials.csv"] {
        let a = std::fs::read(out_a.join(file)).unwrap();
        let b = std::fs::read(out_b.join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between runs");
    }
}

#[test]
fn seed_override_changes_the_sample() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "run.toml", WIGNER_GRW);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    assert!(qjump(&[
        "run",
        "--config",
        &config,
        "--output-dir",
        out_a.to_str().unwrap()
    ])
    .status
    .success());
    assert!(qjump(&[
        "run",
        "--config",
        &config,
        "--output-dir",
        out_b.to_str().unwrap(),
        "--seed",
        "43"
    ])
    .status
    .success());
    let a = std::fs::read(out_a.join("trials.csv")).unwrap();
    let b = std::fs::read(out_b.join("trials.csv")).unwrap();
    assert_ne!(a, b, "different seeds should sample different trials");
}

#[test]
fn missing_seed_is_a_config_error_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let body = WIGNER_GRW.replace("master_seed = 42\n", "");
    let config = write_config(dir.path(), "run.toml", &body);
    let out_dir = dir.path().join("out");
    let out = qjump(&[
        "run",
        "--config",
        &config,
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("master_seed"),
        "stderr should name the key: {stderr}"
    );
    assert!(!out_dir.exists(), "no output files on config error");
}

#[test]
fn unknown_keys_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{WIGNER_GRW}\nunknown_key = 1\n");
    let config = write_config(dir.path(), "run.toml", &body);
    let out = qjump(&["run", "--config", &config, "--output-dir", "unused"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn subcommand_experiment_mismatch_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "run.toml", WIGNER_GRW);
    let out = qjump(&["protocols", "--config", &config, "--output-dir", "unused"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("wigner") && stderr.contains("protocols"),
        "{stderr}"
    );
}

#[test]
fn missing_parameter_table_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let body = "schema_version = 1\nexperiment = \"dilation\"\nmaster_seed = 1\n";
    let config = write_config(dir.path(), "run.toml", body);
    let out = qjump(&["run", "--config", &config, "--output-dir", "unused"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dilation"));
}

#[test]
fn sweep_rejects_unknown_axis() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"
schema_version = 1
experiment = "sweep"
master_seed = 3

[sweep]
target = "grw-trajectory"
axis = "bananas"
values = [1.0]

[grw_trajectory]
sites = 8
spacing = 6.0
particles = 1.0
branch_sites = [1, 5]
t_total = 0.5
n_trajectories = 10
"#;
    let config = write_config(dir.path(), "sweep.toml", body);
    let out_dir = dir.path().join("out");
    let out = qjump(&[
        "run",
        "--config",
        &config,
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bananas"));
}

#[test]
fn sweep_emits_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"
schema_version = 1
experiment = "sweep"
master_seed = 3
formats = ["csv"]

[sweep]
target = "grw-trajectory"
axis = "particles"
values = [0.5, 1.0, 2.0]

[grw_trajectory]
sites = 8
spacing = 6.0
particles = 1.0
branch_sites = [1, 5]
t_total = 0.5
n_trajectories = 50
"#;
    let config = write_config(dir.path(), "sweep.toml", body);
    let out_dir = dir.path().join("out");
    let out = qjump(&[
        "sweep",
        "--config",
        &config,
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4, "header plus one row per value: {csv}");
    assert!(lines[0].starts_with("particles,"));
}

#[test]
fn single_value_sweep_matches_plain_run_summary() {
    let dir = tempfile::tempdir().unwrap();
    let sweep_body = r#"
schema_version = 1
experiment = "sweep"
master_seed = 9

[sweep]
target = "grw-trajectory"
axis = "particles"
values = [1.5]

[grw_trajectory]
sites = 8
spacing = 6.0
particles = 1.5
branch_sites = [1, 5]
t_total = 1.0
n_trajectories = 100
"#;
    let plain_body = r#"
schema_version = 1
experiment = "grw-trajectory"
master_seed = 9

[grw_trajectory]
sites = 8
spacing = 6.0
particles = 1.5
branch_sites = [1, 5]
t_total = 1.0
n_trajectories = 100
"#;
    let sweep_cfg = write_config(dir.path(), "sweep.toml", sweep_body);
    let plain_cfg = write_config(dir.path(), "plain.toml", plain_body);
    let sweep_out = dir.path().join("sweep");
    let plain_out = dir.path().join("plain");
    assert!(qjump(&[
        "run",
        "--config",
        &sweep_cfg,
        "--output-dir",
        sweep_out.to_str().unwrap()
    ])
    .status
    .success());
    assert!(qjump(&[
        "run",
        "--config",
        &plain_cfg,
        "--output-dir",
        plain_out.to_str().unwrap()
    ])
    .status
    .success());

    let sweep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(sweep_out.join("sweep.json")).unwrap())
            .unwrap();
    let plain: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(plain_out.join("result.json")).unwrap())
            .unwrap();
    let from_sweep = sweep["rows"][0]["summary"]["collapse_probability"]
        .as_f64()
        .unwrap();
    let from_plain = plain["collapse_probability"]["est"].as_f64().unwrap();
    assert_eq!(from_sweep, from_plain);
}

#[test]
fn protocols_run_reports_all_checks() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"
schema_version = 1
experiment = "protocols"
master_seed = 5

[protocols]
no_signaling_pairs = 10
bit = 1
commitment_regime = "unitary"
hold_time = 2.0
n_runs = 50
particles = 1.0
"#;
    let config = write_config(dir.path(), "p.toml", body);
    let out_dir = dir.path().join("out");
    let out = qjump(&[
        "run",
        "--config",
        &config,
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let reports: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("reports.json")).unwrap())
            .unwrap();
    let names: Vec<&str> = reports["reports"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["name"].as_str().unwrap())
        .collect();
    assert_eq!(
        names,
        [
            "no-signaling",
            "cloning",
            "cloning",
            "steering",
            "steering",
            "bit-commitment"
        ]
    );
    assert!(out_dir.join("transcript.jsonl").exists());
}
