//! End-to-end checks of the binary: determinism of the CSV output, config
//! diagnostics, and the exit-code contract.

use std::path::Path;
use std::process::Command;

fn hybeam() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hybeam"))
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let cfg = hybeam_core::config::ExperimentConfig {
        num_antennas: 16,
        num_users: 2,
        paths_per_user: 4,
        oversampling: 2,
        trials: 3,
        ul_snr_db: vec![25.0, 30.0],
        antenna_sweep: vec![8, 16],
        ..Default::default()
    };
    let path = dir.join("config.toml");
    hybeam_core::config::save_config(&cfg, &path).unwrap();
    path
}

#[test]
fn sumrate_output_is_bit_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out1 = dir.path().join("a.csv");
    let out2 = dir.path().join("b.csv");
    for out in [&out1, &out2] {
        let status = hybeam()
            .args(["sumrate-cdf", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = std::fs::read(&out1).unwrap();
    let b = std::fs::read(&out2).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("experiment,trial,method,metric,value\n"));
    assert!(text.lines().count() > 3 * 4);
}

#[test]
fn seed_override_changes_the_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out1 = dir.path().join("a.csv");
    let out2 = dir.path().join("b.csv");
    for (out, seed) in [(&out1, "1"), (&out2, "2")] {
        let status = hybeam()
            .args(["sumrate-cdf", "--config"])
            .arg(&cfg)
            .args(["--seed", seed, "--out"])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    assert_ne!(std::fs::read(&out1).unwrap(), std::fs::read(&out2).unwrap());
}

#[test]
fn nmse_and_lemma1_subcommands_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    for sub in ["nmse-sweep", "lemma1"] {
        let out = dir.path().join(format!("{sub}.csv"));
        let output = hybeam()
            .args([sub, "--config"])
            .arg(&cfg)
            .args(["--trials", "2", "--out"])
            .arg(&out)
            .output()
            .unwrap();
        assert!(output.status.success(), "{sub} failed: {output:?}");
        let text = std::fs::read_to_string(&out).unwrap();
        assert!(text.lines().count() > 2, "{sub} wrote no rows");
    }
}

#[test]
fn malformed_config_names_the_offending_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let text = std::fs::read_to_string(&cfg).unwrap();
    let without_trials: String = text
        .lines()
        .filter(|l| !l.starts_with("trials"))
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(&cfg, without_trials).unwrap();
    let out = dir.path().join("x.csv");
    let output = hybeam()
        .args(["sumrate-cdf", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(
        stderr.contains("trials"),
        "diagnostic missing key name: {stderr}"
    );
    assert!(!out.exists());
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let mut text = std::fs::read_to_string(&cfg).unwrap();
    text.push_str("\nmystery_knob = 3\n");
    std::fs::write(&cfg, text).unwrap();
    let output = hybeam()
        .args(["sumrate-cdf", "--config"])
        .arg(&cfg)
        .args(["--out", "unused.csv"])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("mystery_knob"), "{stderr}");
}
