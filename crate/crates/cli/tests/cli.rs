use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pon_mpc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pon-mpc"))
        .args(args)
        .current_dir(dir)
        .env_remove("PONMPC_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("exp.toml");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL: &str = r#"
output_dir = "out"
[base]
duration_slots = 300
[sweep]
allocators = ["myopic", "fixed"]
class_loads = [0.5, 1.0]
"#;

#[test]
fn run_then_plot() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = pon_mpc(&["run", &cfg], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = tmp.path().join("out/results.csv");
    let text = fs::read_to_string(&csv).unwrap();
    // Header plus four points with two classes each.
    assert_eq!(text.lines().count(), 9);
    assert!(text.starts_with("schema_version,"));
    assert!(!text.contains('\r'));
    assert!(tmp.path().join("out/summary.json").exists());

    let csv_arg = csv.to_string_lossy().into_owned();
    let out = pon_mpc(&["plot", &csv_arg, "--metric", "violation_pct", "--group-by", "allocator"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 2);
    let out = pon_mpc(&["plot", &csv_arg, "--metric", "mean_delay_s", "--group-by", "allocator,class"], tmp.path());
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 4);
    let out = pon_mpc(&["plot", &csv_arg, "--metric", "happiness"], tmp.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown metric"));
}

#[test]
fn output_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let status = Command::new(env!("CARGO_BIN_EXE_pon-mpc"))
        .args(["run", &cfg])
        .current_dir(tmp.path())
        .env("PONMPC_OUTPUT_DIR", tmp.path().join("elsewhere"))
        .status()
        .unwrap();
    assert!(status.success());
    assert!(tmp.path().join("elsewhere/results.csv").exists());
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn validate_rejects_bad_timing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[base]\nslot_s = 0.002\n");
    let out = pon_mpc(&["validate", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("half of"));
    let cfg = write_config(tmp.path(), "[base]\nduration_slots = 10\n");
    let out = pon_mpc(&["validate", &cfg], tmp.path());
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("1 sweep points valid"));
}

#[test]
fn unknown_allocator_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[sweep]\nallocators = [\"edf\"]\n");
    let out = pon_mpc(&["validate", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("edf"));
}

#[test]
fn empty_sweep_writes_header_only() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "output_dir = \"out\"\n[sweep]\nseeds = []\n");
    let out = pon_mpc(&["run", &cfg], tmp.path());
    assert!(out.status.success());
    let text = fs::read_to_string(tmp.path().join("out/results.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
    let csv_arg = tmp.path().join("out/results.csv").to_string_lossy().into_owned();
    let out = pon_mpc(&["plot", &csv_arg, "--metric", "violation_pct"], tmp.path());
    assert!(!out.status.success());
}

#[test]
fn oracle_command_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pon_mpc(&["oracle", "--cases", "50"], tmp.path());
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 3);
}
