//! Process-level contract of the binary: exit codes, validation messages,
//! and the machine-readable listing.

use std::path::PathBuf;
use std::process::Command;

fn binary() -> PathBuf {
    let mut path = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    path.pop();
    path.pop();
    path.push("target");
    path.push(if cfg!(debug_assertions) { "debug" } else { "release" });
    path.push("pilotwave");
    path
}

fn tmp(tag: &str) -> PathBuf {
    std::env::temp_dir().join(format!("pilotwave_cli_{}_{tag}", std::process::id()))
}

#[test]
fn list_names_exactly_the_registry() {
    let out = Command::new(binary()).args(["list"]).output().expect("binary runs");
    assert!(out.status.success());
    let names: Vec<&str> = std::str::from_utf8(&out.stdout)
        .unwrap()
        .lines()
        .collect();
    assert_eq!(
        names,
        vec![
            "free_gaussian",
            "boosted_gaussian",
            "harmonic",
            "two_gaussian_interference",
            "ring_state",
            "stern_gerlach",
            "pointer_measurement",
            "two_fermion",
            "two_boson",
            "qtm_free_gaussian",
        ]
    );
    // JSON listing parses and matches.
    let out = Command::new(binary()).args(["list", "--json"]).output().unwrap();
    let parsed: Vec<String> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(parsed.len(), 10);
}

#[test]
fn describe_mentions_the_phase_jump_physics() {
    let out = Command::new(binary())
        .args(["describe", "ring_state"])
        .output()
        .expect("binary runs");
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("2πħ"), "{text}");
    assert!(text.contains("winding"), "{text}");
}

#[test]
fn unknown_scenario_exits_with_validation_code_and_lists_names() {
    let out = Command::new(binary())
        .args(["describe", "nonsense"])
        .output()
        .expect("binary runs");
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("free_gaussian"), "{err}");
}

#[test]
fn malformed_config_fails_fast_without_partial_outputs() {
    let dir = tmp("malformed");
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    let config_path = dir.join("broken.json");
    // Valid JSON, but the mandatory seed is missing.
    std::fs::write(
        &config_path,
        r#"{
            "schema": 1,
            "scenario": {"name": "ring_state", "winding": 2},
            "grid": {"dims_per_particle": 1, "particle_count": 1, "points": [256], "extents": [6.283185307179586], "boundary": "periodic"},
            "solver": {"method": "split_spectral", "dt": 0.001, "t_final": 0.001, "snapshot_stride": 1},
            "output": {"directory": "unused"}
        }"#,
    )
    .unwrap();
    let outdir = dir.join("out");
    let out = Command::new(binary())
        .args(["run"])
        .arg(&config_path)
        .arg("--out")
        .arg(&outdir)
        .output()
        .expect("binary runs");
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("seed"), "{err}");
    assert!(!outdir.exists(), "no partial outputs on validation failure");
}

#[test]
fn seed_override_changes_the_report_seed() {
    let dir = tmp("seed_override");
    let _ = std::fs::remove_dir_all(&dir);
    let config = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/ring_state.json");
    let out = Command::new(binary())
        .args(["run"])
        .arg(&config)
        .arg("--out")
        .arg(&dir)
        .args(["--seed", "7", "--json"])
        .output()
        .expect("binary runs");
    assert!(out.status.success(), "{out:?}");
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["seed"], 7);
    assert_eq!(report["scenario"], "ring_state");
}
