use std::process::Command;

use hgp_core::harness::{generate_suite, ExperimentConfig, SuiteConfig};

#[test]
fn config_round_trips_through_toml() {
    let cfg = ExperimentConfig::default();
    let text = cfg.to_toml().unwrap();
    assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    assert!(ExperimentConfig::from_toml("seed = 1\nbogus = 2\n").is_err());
}

#[test]
fn suite_is_deterministic_and_varied() {
    let cfg = SuiteConfig { trips: 4, duration: 30.0, ..Default::default() };
    let a = generate_suite(&cfg, 5, "eval").unwrap();
    let b = generate_suite(&cfg, 5, "eval").unwrap();
    let c = generate_suite(&cfg, 5, "train").unwrap();
    assert_eq!(a.len(), 4);
    for ((x, y), z) in a.iter().zip(&b).zip(&c) {
        assert_eq!(x.trip.rv_tx, y.trip.rv_tx);
        assert_ne!(x.trip.rv_truth.states(), z.trip.rv_truth.states());
        assert_eq!(x.trip.rv_truth.len(), x.trip.hv.len());
    }
    let turning = a.iter().any(|s| {
        let h = s.trip.rv_truth.states();
        (h[h.len() - 1].heading - h[0].heading).abs() > 0.3
    });
    assert!(turning);
}

fn hgp() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hgp"))
}

#[test]
fn cli_prints_config_and_generates_trips() {
    let out = hgp().arg("config").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(ExperimentConfig::from_toml(&text).is_ok());

    let dir = tempfile::tempdir().unwrap();
    let status = hgp().args(["gen-trips", "--count", "2", "--out"]).arg(dir.path()).status().unwrap();
    assert!(status.success());
    let csvs = std::fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv"))
        .count();
    assert!(csvs >= 2);
}

#[test]
fn cli_demo_writes_logs() {
    let dir = tempfile::tempdir().unwrap();
    let out = hgp().args(["demo", "--predictor", "ca", "--out"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let log = std::fs::read_to_string(dir.path().join("fcw_log.csv")).unwrap();
    assert!(log.starts_with("t,rv_id,range,r_w,warn,case,source\n"));
    assert!(log.lines().skip(1).any(|l| l.split(',').nth(4) == Some("1")));
    assert!(dir.path().join("cam.ndjson").exists());
}

#[test]
fn cli_reports_errors() {
    let out = hgp().args(["sweep", "--bank", "/nonexistent.bank.json"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
