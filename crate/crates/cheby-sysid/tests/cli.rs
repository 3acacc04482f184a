//! End-to-end checks of the command-line surface: exit codes, output files,
//! manifest reruns and sweeps.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cheby-sysid"))
}

fn short_config(dir: &Path) -> std::path::PathBuf {
    let mut config = cheby_sysid::harness::RunConfig::stuart_landau_sec5();
    config.horizon = 0.4;
    let path = dir.join("short.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path
}

#[test]
fn run_writes_outputs_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let config = short_config(dir.path());
    let out = dir.path().join("out");
    let status = bin()
        .args(["run", "--config"])
        .arg(&config)
        .args(["--quiet", "--emit-plot-data", "--out-dir"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    for name in [
        "trajectory.csv",
        "windows.csv",
        "manifest.json",
        "fig2_dynamics.csv",
        "fig3_node_count.csv",
        "fig4_states.csv",
        "fig5_estimation_error.csv",
    ] {
        assert!(out.join(name).exists(), "{name} missing");
    }

    // Rerunning straight from the manifest must work.
    let out2 = dir.path().join("out2");
    let status = bin()
        .args(["run", "--quiet", "--config"])
        .arg(out.join("manifest.json"))
        .arg("--out-dir")
        .arg(&out2)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(
        std::fs::read(out.join("trajectory.csv")).unwrap(),
        std::fs::read(out2.join("trajectory.csv")).unwrap()
    );
}

#[test]
fn validate_reports_ok_for_the_shipped_config() {
    let shipped = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs/stuart_landau_sec5.json");
    let output = bin()
        .args(["validate", "--config"])
        .arg(&shipped)
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("ok (60 windows"), "unexpected output: {stdout}");
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"plant\": {\"name\": \"nope\"}}").unwrap();
    let status = bin()
        .args(["validate", "--config"])
        .arg(&bad)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    // A structurally valid config with an impossible horizon is also a
    // config error.
    let mut config = cheby_sysid::harness::RunConfig::stuart_landau_sec5();
    config.horizon = 0.35;
    let path = dir.path().join("short_window.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    let status = bin()
        .args(["run", "--config"])
        .arg(&path)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn sweep_writes_one_directory_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let config = short_config(dir.path());
    let out = dir.path().join("sweep");
    let status = bin()
        .args(["sweep", "--config"])
        .arg(&config)
        .args(["--param", "eps_th", "--values", "0.001,0.01", "--out-dir"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("eps_th=0.001/manifest.json").exists());
    assert!(out.join("eps_th=0.01/manifest.json").exists());
}
