//! End-to-end runs of the `aoi` binary.

use std::fs;
use std::process::Command;

fn aoi() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aoi"))
}

const SWEEP_SPEC: &str = r#"
channel_reliability = [0.25, 0.5, 0.75, 1.0]
weight = [4, 4, 1, 1]
arrival_multiplier = [1.0, 0.75, 0.5, 0.25]
lambdas = [0.05, 0.1, 0.2]
disciplines = ["single", "noqueue", "fifo"]
policies = ["optimal-randomized", "max-weight"]
horizon = 20000
replications = 3
seed = 5
"#;

#[test]
fn sweep_csv_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("sweep.toml");
    fs::write(&spec, SWEEP_SPEC).unwrap();
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}.csv"));
        let status = aoi()
            .args(["sweep", spec.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .env("AOI_WORKERS", if k == 0 { "1" } else { "3" })
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs.pop().unwrap()).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3 * 3 * 2);
    for r in &rows {
        let (mean, stderr, lb): (f64, f64, f64) = (r[4].parse().unwrap(), r[5].parse().unwrap(), r[6].parse().unwrap());
        if r[3] == "closed_form" {
            assert_eq!(stderr, 0.0);
        }
        if r[7] == "0" {
            assert!(lb <= mean, "{r:?}");
        }
        if r[2] == "max-weight" && r[1] != "fifo" {
            let randomized = rows
                .iter()
                .find(|o| o[0] == r[0] && o[1] == r[1] && o[2] == "optimal-randomized")
                .unwrap();
            let closed: f64 = randomized[4].parse().unwrap();
            assert!(mean <= closed + 3.0 * stderr, "{r:?} vs {randomized:?}");
        }
        if r[1] == "fifo" {
            let expect = if r[0] == "0.2" { "1" } else { "0" };
            assert_eq!(r[7], expect, "{r:?}");
        }
    }
}

#[test]
fn sweep_to_stdout_and_full_flag_parse() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("empty.toml");
    fs::write(&spec, SWEEP_SPEC.replace("[0.05, 0.1, 0.2]", "[]")).unwrap();
    let out = aoi().args(["sweep", spec.to_str().unwrap(), "--full"]).output().unwrap();
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "lambda,discipline,policy,source,ewsaoi_mean,ewsaoi_stderr,lower_bound,diverged_fraction\n"
    );
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "channel_reliability = [0.5, 2.0]\narrival_rate = [0.1, 0.1]\nweight = [1, 1]\n").unwrap();
    let out = aoi().args(["analyze", bad.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("channel_reliability"));

    assert_eq!(aoi().arg("nonsense").output().unwrap().status.code(), Some(1));
    assert_eq!(
        aoi().args(["verify", "--quick", "--full"]).output().unwrap().status.code(),
        Some(1)
    );
    let out = aoi().arg("verify").env("AOI_WORKERS", "zero").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_quick_passes() {
    let out = aoi().args(["verify", "--quick"]).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.contains("11 of 11 checks passed"), "{text}");
    assert!(!text.contains("[FAIL]"));
}

#[test]
fn simulate_respects_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("net.toml");
    fs::write(&cfg, "channel_reliability = [1]\narrival_rate = [1]\nweight = [1]\nhorizon = 10\n").unwrap();
    let out = aoi()
        .args(["simulate", cfg.to_str().unwrap(), "--discipline", "noqueue", "--policy", "naive", "--horizon", "1234", "--seed", "9"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("slots_run          1234"), "{text}");
    assert!(text.contains("ewsaoi             1\n"), "{text}");
}
