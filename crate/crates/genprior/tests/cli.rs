//! End-to-end checks of the binary: exit codes, report files, determinism
//! across worker thread counts, and stdout behavior.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_genprior")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).expect("config should be writable");
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(binary())
        .args(args)
        .output()
        .expect("binary should spawn")
}

#[test]
fn collision_subcommand_reports_success() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "collision.toml",
        "kind = \"collision_demo\"\nmaster_seed = 7\ntrial_count = 2\n\n[params]\nk_grid = [2, 3]\n",
    );
    let out_path = dir.path().join("report.csv");
    let output = run(&[
        "collision",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let report = std::fs::read_to_string(&out_path).unwrap();
    let mut lines = report.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("experiment,trial,seed,k,m,"));
    assert_eq!(lines.clone().count(), 4, "2 k values x 2 trials");
    assert!(
        lines.all(|line| line.contains("true")),
        "every collision trial should verify"
    );
}

#[test]
fn reports_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "wdc.toml",
        "kind = \"wdc_sweep\"\nmaster_seed = 3\ntrial_count = 4\n\n[params]\nk = 3\nn_grid = [10, 40]\npairs = 60\n",
    );
    let mut reports = Vec::new();
    for threads in ["1", "4", "8"] {
        let out_path = dir.path().join(format!("report_{threads}.csv"));
        let output = run(&[
            "wdc-sweep",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out_path.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert_eq!(output.status.code(), Some(0));
        reports.push(std::fs::read(&out_path).unwrap());
    }
    assert_eq!(reports[0], reports[1], "1 vs 4 threads must match");
    assert_eq!(reports[1], reports[2], "4 vs 8 threads must match");
}

#[test]
fn invalid_config_exits_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "bad.toml",
        "kind = \"wdc_sweep\"\ntrial_count = 0\n\n[params]\nk = 2\nn_grid = [4]\n",
    );
    let output = run(&["wdc-sweep", "--config", config.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(1));
    assert!(
        String::from_utf8_lossy(&output.stderr).contains("trial_count"),
        "the error should name the offending key"
    );

    let missing = run(&["wdc-sweep", "--config", "/nonexistent/config.toml"]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn per_trial_failures_exit_with_code_two_but_write_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "thin.toml",
        "kind = \"net_demo\"\nmaster_seed = 5\n\n[params]\nk = 2\ndelta = 0.5\nepsilon = 1e-300\nsphere_test_points = 40\n",
    );
    let out_path = dir.path().join("report.csv");
    let output = run(&[
        "net-demo",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    let report = std::fs::read_to_string(&out_path).unwrap();
    assert!(report.contains("false"), "failed row should be recorded");
}

#[test]
fn subcommand_and_config_kind_must_agree() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "collision.toml",
        "kind = \"collision_demo\"\n\n[params]\nk_grid = [2]\n",
    );
    let output = run(&["wdc-sweep", "--config", config.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("does not match"));
}

#[test]
fn json_report_prints_to_stdout_when_out_is_omitted() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "collision.toml",
        "kind = \"collision_demo\"\nmaster_seed = 11\n\n[params]\nk_grid = [2]\n",
    );
    let output = run(&[
        "collision",
        "--config",
        config.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(output.status.code(), Some(0));
    let value: serde_json::Value =
        serde_json::from_slice(&output.stdout).expect("stdout should be JSON");
    let rows = value.as_array().expect("report should be an array");
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["experiment"], "collision_demo");
    assert_eq!(rows[0]["collision_verified"], true);
}

#[test]
fn seed_flag_overrides_the_config_seed() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "wdc.toml",
        "kind = \"wdc_sweep\"\nmaster_seed = 1\n\n[params]\nk = 3\nn_grid = [15]\npairs = 40\n",
    );
    let base = run(&["wdc-sweep", "--config", config.to_str().unwrap()]);
    let same = run(&[
        "wdc-sweep",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "1",
    ]);
    let other = run(&[
        "wdc-sweep",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "99",
    ]);
    assert_eq!(base.status.code(), Some(0));
    assert_eq!(base.stdout, same.stdout, "matching seed reproduces bytes");
    assert_ne!(base.stdout, other.stdout, "new seed must change the report");
}
