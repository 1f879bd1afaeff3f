use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SYNTH_TOML: &str = r#"
seed = 11
fixations_per_dog = 120
render_frames = true

[camera]
width_px = 160
height_px = 120
hfov_deg = 101.55
vfov_deg = 73.6
fps = 29.96

[[dogs]]
id = "a"

[[dogs]]
id = "b"
accuracy_deg = 4.0

[corruption]
label_swap_rate = 0.1
erosion_keep = 0.9
"#;

fn egogaze(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_egogaze"))
        .args(args)
        .arg("-q")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A synthetic data directory written by the binary itself.
fn synth() -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("synth.toml");
    std::fs::write(&cfg, SYNTH_TOML).unwrap();
    let data = dir.path().join("data");
    let out = egogaze(&["synth", "--config", s(&cfg), "--out", s(&data)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    (dir, data)
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(code(&egogaze(&["bogus"])), 64);
    assert_eq!(code(&egogaze(&["seg-eval", "--gt", "x.json"])), 64);
    assert_eq!(code(&egogaze(&["stats", "--unknown-flag"])), 64);
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&egogaze(&["--help"])), 0);
    assert_eq!(code(&egogaze(&["--version"])), 0);
}

#[test]
fn attribute_prints_the_critical_value() {
    let out = egogaze(&["attribute"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("24.996"), "{}", stdout(&out));
    let out = egogaze(&["attribute", "--alpha", "0.01", "--dof", "2"]);
    assert!(stdout(&out).contains("9.210"), "{}", stdout(&out));
}

#[test]
fn missing_dog_profile_names_the_dog() {
    let (_dir, data) = synth();
    let out = egogaze(&[
        "attribute",
        "--frames",
        s(&data.join("corpus_a.json")),
        "--gaze",
        s(&data.join("gaze_a.csv")),
    ]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("`a`"), "{}", stderr(&out));
}

#[test]
fn missing_input_file_exits_2() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("absent.json");
    let out = egogaze(&["attribute", "--frames", s(&missing), "--dog", "a=5"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("absent.json"));
}

#[test]
fn malformed_dog_flag_is_a_validation_error() {
    assert_eq!(code(&egogaze(&["attribute", "--dog", "a=fast"])), 1);
    assert_eq!(code(&egogaze(&["attribute", "--dog", "=5"])), 1);
}

#[test]
fn pipeline_subcommands_write_their_outputs() {
    let (dir, data) = synth();
    let out_dir = dir.path().join("out");
    let od = s(&out_dir);
    let corpus_a = data.join("corpus_a.json");
    let corpus_b = data.join("corpus_b.json");

    let out = egogaze(&["fixations", "--data", s(&data), "--out-dir", od]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let fixations = out_dir.join("fixations.csv");
    assert!(fixations.is_file());

    let out = egogaze(&["attribute", "--data", s(&data), "--out-dir", od]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let records = out_dir.join("attribution.jsonl");
    assert!(std::fs::read_to_string(&records).unwrap().lines().count() > 0);
    assert!(out_dir.join("prediction_fit.json").is_file());

    let out = egogaze(&[
        "seg-eval",
        "--gt",
        s(&corpus_a),
        "--pred",
        s(&data.join("pred_a.json")),
        "--out-dir",
        od,
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("IoU%"));

    let out = egogaze(&[
        "stats",
        "--attribution",
        s(&records),
        "--frames",
        s(&corpus_a),
        "--frames",
        s(&corpus_b),
        "--out-dir",
        od,
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(out_dir.join("stats.json").is_file());

    let out = egogaze(&[
        "saliency",
        "--attribution",
        s(&records),
        "--frames",
        s(&corpus_a),
        "--frames",
        s(&corpus_b),
        "--generate",
        "--images",
        s(&data.join("frames")),
        "--mode",
        "gray",
        "--out-dir",
        od,
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let roc = std::fs::read_to_string(out_dir.join("roc.csv")).unwrap();
    assert!(roc.starts_with("threshold,fpr,tpr"));
}

#[test]
fn report_check_passes_on_planted_data() {
    let (dir, data) = synth();
    let out_dir = dir.path().join("report");
    let out = egogaze(&[
        "report",
        "--data",
        s(&data),
        "--check",
        "--out-dir",
        s(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}{}", stdout(&out), stderr(&out));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap())
            .unwrap();
    assert!(json.get("attribution").is_some());
}
