//! End-to-end tests of the `cellflow` binary: exit codes, CSV and trace
//! artifacts, and reproducibility across invocations.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cellflow"))
}

const SMALL: &str = r#"{
    "grid": {"kind": "square", "rows": 1, "cols": 4, "side_len": 1.0},
    "l": 0.25, "rs": 0.05, "v": 0.2, "K": 150,
    "p_f": 0.0, "p_r": 0.0,
    "colors": [{"name": "amber", "source": 1, "target": 4}],
    "seed": 5
}"#;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn run_reports_throughput_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = bin().args(["run", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("summed throughput"), "stdout: {stdout}");
    assert!(stdout.contains("amber"), "stdout: {stdout}");
}

#[test]
fn checked_run_stays_clean_and_csv_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let csv_a = dir.path().join("a.csv");
    let csv_b = dir.path().join("b.csv");
    for csv in [&csv_a, &csv_b] {
        let out = bin()
            .args(["run", "--check", "--config"])
            .arg(&config)
            .arg("--csv")
            .arg(csv)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    }
    let a = std::fs::read(&csv_a).unwrap();
    let b = std::fs::read(&csv_b).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b, "same config + seed must give identical CSV bytes");
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with(
        "param,value,seed,color,throughput,summed_throughput,failures,recoveries\n"
    ));
    assert!(text.lines().any(|l| l.contains("__sum__")));
}

#[test]
fn seed_override_changes_the_reported_seed() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = bin()
        .args(["run", "--seed", "42", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("seed 42"), "stdout: {stdout}");
}

#[test]
fn trace_is_json_lines_with_one_record_per_round() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let trace = dir.path().join("trace.jsonl");
    let out = bin()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--trace")
        .arg(&trace)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let text = std::fs::read_to_string(&trace).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    // Initial state plus one record per simulated round.
    assert_eq!(lines.len(), 151);
    for (i, line) in lines.iter().enumerate() {
        let record: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(record["round"], i as u64);
        assert!(record.get("entities").is_some());
        assert!(record.get("consumed").is_some());
        assert!(record.get("violations").is_none(), "clean run has no violations key");
    }
    // Entities eventually appear and get delivered.
    let last: serde_json::Value = serde_json::from_str(lines[150]).unwrap();
    assert!(last["consumed"]["amber"].as_u64().unwrap() > 0);
}

#[test]
fn sweep_writes_ordered_rows() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let csv = dir.path().join("sweep.csv");
    let out = bin()
        .args(["sweep", "--param", "v", "--values", "0.1,0.2", "--reps", "2", "--config"])
        .arg(&config)
        .arg("--csv")
        .arg(&csv)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    // Header + 2 values x 2 reps x (1 color + __sum__).
    assert_eq!(lines.len(), 9);
    assert!(lines[1].starts_with("v,0.100000,5,amber,"));
    assert!(lines[2].starts_with("v,0.100000,5,__sum__,"));
    assert!(lines[3].starts_with("v,0.100000,6,amber,"));
    assert!(lines[5].starts_with("v,0.200000,5,amber,"));
}

#[test]
fn check_accepts_valid_configs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = bin().args(["check", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("configuration ok"), "stdout: {stdout}");
}

#[test]
fn config_errors_exit_one_with_a_field_name() {
    let dir = tempfile::tempdir().unwrap();
    // Speed faster than the disc radius is physically unsafe.
    let bad = SMALL.replace("\"v\": 0.2", "\"v\": 0.3");
    let config = write_config(dir.path(), &bad);
    let out = bin().args(["check", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("v must be < l"));

    let unknown = SMALL.replace("\"seed\": 5", "\"sede\": 5");
    let config = write_config(dir.path(), &unknown);
    let out = bin().args(["check", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("sede"));
}

#[test]
fn missing_files_and_bad_usage_exit_one() {
    let out = bin()
        .args(["run", "--config", "/nonexistent/config.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    let out = bin().args(["frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let out = bin().args(["sweep", "--param", "nope", "--values", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    let out = bin().args(["--help"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("run"));
    assert!(stdout.contains("sweep"));
    assert!(stdout.contains("check"));
}
