//! End-to-end checks of the binary: exit codes, machine-readable stderr,
//! deterministic reruns, and the output file contract.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_anderson-dephase"));
    cmd.env_remove("ANDERSON_DEPHASE_THREADS");
    cmd
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("anderson-dephase-test-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    entries.sort();
    entries
}

fn stderr_json(output: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&output.stderr);
    let line = text.lines().next().unwrap_or_else(|| panic!("empty stderr: {text}"));
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr not JSON ({e}): {line}"))
}

#[test]
fn reruns_are_byte_identical_across_output_dirs() {
    let root = scratch("rerun");
    let config = root.join("run.toml");
    fs::write(
        &config,
        "[model]\nsites = 12\nseed = 3\ndisorder = 4.0\n\n[ensemble]\nhorizon_fraction = 0.2\n\n[run]\ngamma = 0.1\n",
    )
    .unwrap();
    for out in ["a", "b"] {
        let status = bin()
            .args(["evolve", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(root.join(out))
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = read_dir_sorted(&root.join("a"));
    let b = read_dir_sorted(&root.join("b"));
    assert!(!a.is_empty());
    assert_eq!(a, b, "identical configs must produce identical bytes");
    let _ = fs::remove_dir_all(&root);
}

#[test]
fn invalid_configuration_exits_one_with_json_stderr() {
    let output = bin()
        .args(["evolve", "--sites", "8", "--gamma", "-2"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let err = stderr_json(&output);
    assert_eq!(err["error"], "invalid_config");

    let output = bin().arg("frobnicate").output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert_eq!(stderr_json(&output)["error"], "invalid_config");

    // an ensemble grid cannot contain zero
    let output = bin()
        .args(["ensemble", "--sites", "8", "--gamma", "0"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn runtime_failures_exit_two() {
    let root = scratch("exit2");
    let blocker = root.join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let output = bin()
        .args(["evolve", "--sites", "8", "--gamma", "1e-8"])
        .arg("--out")
        .arg(blocker.join("sub"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert_eq!(stderr_json(&output)["error"], "runtime");
    let _ = fs::remove_dir_all(&root);
}

#[test]
fn evolve_then_peaks_roundtrip() {
    let root = scratch("roundtrip");
    let status = bin()
        .args([
            "evolve", "--sites", "12", "--seed", "3", "--gamma", "1e-8", "--q", "1",
        ])
        .arg("--config")
        .arg({
            let cfg = root.join("cfg.toml");
            fs::write(&cfg, "[model]\ndisorder = 4.0\n[ensemble]\nhorizon_fraction = 0.2\n").unwrap();
            cfg
        })
        .arg("--out")
        .arg(root.join("run"))
        .status()
        .unwrap();
    assert!(status.success());
    let profile = root.join("run").join("profile_0.5.csv");
    assert!(profile.exists(), "half-decay snapshot missing");

    let output = bin()
        .arg("peaks")
        .arg("--input")
        .arg(&profile)
        .arg("--out")
        .arg(root.join("peaks"))
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = fs::read_to_string(root.join("peaks").join("peaks.csv")).unwrap();
    let mut last_site = 0usize;
    let mut rows = 0;
    for line in text.lines().skip_while(|l| l.starts_with('#')).skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 5);
        let site: usize = fields[0].parse().unwrap();
        let height: f64 = fields[1].parse().unwrap();
        let prominence: f64 = fields[4].parse().unwrap();
        assert!(site > last_site, "sites must ascend and be 1-based");
        assert!(prominence <= height + 1e-15);
        last_site = site;
        rows += 1;
    }
    assert!(rows >= 1);
    let _ = fs::remove_dir_all(&root);
}

#[test]
fn ensemble_json_reports_consistent_bookkeeping() {
    let root = scratch("ensemble");
    let output = bin()
        .args([
            "ensemble", "--sites", "12", "--seed", "9", "--gamma", "1e-8", "--realizations", "2",
        ])
        .arg("--config")
        .arg({
            let cfg = root.join("cfg.toml");
            fs::write(&cfg, "[model]\ndisorder = 4.0\n[ensemble]\nhorizon_fraction = 0.2\n").unwrap();
            cfg
        })
        .arg("--out")
        .arg(root.join("out"))
        .output()
        .unwrap();
    assert!(output.status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(root.join("out").join("ensemble.json")).unwrap())
            .unwrap();
    assert_eq!(doc["git_describe"], env!("CARGO_PKG_VERSION"));
    let results = &doc["results"];
    let accepted = results["accepted"].as_u64().unwrap();
    let rejected = results["rejected"].as_u64().unwrap();
    let failed = results["failed"].as_u64().unwrap();
    let attempted = results["attempted"].as_u64().unwrap();
    assert_eq!(accepted, 2);
    assert_eq!(accepted + rejected + failed, attempted);
    assert!(root.join("out").join("sweep.csv").exists());
    let _ = fs::remove_dir_all(&root);
}
