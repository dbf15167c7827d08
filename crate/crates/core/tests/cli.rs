use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_padic-wander")).args(args).output().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr_error(out: &Output) -> Value {
    serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap()
}

#[test]
fn certify_writes_reproducible_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("certificate.json");
    let b = dir.path().join("again.json");
    let args = ["certify", "--prime", "2", "--horizon", "5", "--stages", "2", "--eps-bar", "1", "--seed", "3"];
    for path in [&a, &b] {
        let out = run(&[&args[..], &["--out", path.to_str().unwrap()]].concat());
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let cert = json(&a);
    assert_eq!(cert["plan"]["l"][0], 4);
    assert_eq!(cert["plan"]["m"][0], 16);
    assert_eq!(cert["config"]["qs"][0], "2/1");
    assert_eq!(cert["all_margins_positive"], true);
    assert_eq!(cert["trace_consistent"], true);
    assert!(cert["margins"].as_array().unwrap().iter().all(|m| m["value"].as_str().unwrap().contains('/')));
}

#[test]
fn certify_rejects_short_horizon() {
    let out = run(&["certify", "--horizon", "2", "--stages", "2"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_error(&out);
    assert_eq!(err["error"], "HorizonExceeded");
    assert_eq!(err["exit_code"], 2);
}

#[test]
fn verify_suite_and_negative_control() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let out = run(&["verify", "--lemma", "all", "--trials", "200", "--seed", "0", "--out", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&report);
    assert_eq!(r["passed"], true);
    assert_eq!(r["reports"].as_array().unwrap().len(), 6);

    let out = run(&["verify", "--lemma", "norms", "--trials", "20", "--drop-factor", "1"]);
    assert_eq!(out.status.code(), Some(3));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(r["reports"][0]["failures"].as_u64().unwrap() > 0);

    let out = run(&["verify", "--trials", "0"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn verify_reads_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    std::fs::write(&cfg, r#"{"p": 3, "qs": ["2/1", "4/1", "7/1", "12/1"], "generic_depth": 32}"#).unwrap();
    let out = run(&["verify", "--config", cfg.to_str().unwrap(), "--lemma", "norms", "--trials", "30"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["config"]["p"], 3);

    std::fs::write(&cfg, r#"{"p": 2, "qs": ["4/1", "2/1"]}"#).unwrap();
    let out = run(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn connect_demo_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("transcript.json");
    let b = dir.path().join("again.json");
    for path in [&a, &b] {
        let out = run(&["connect-demo", "--prime", "2", "--seed", "5", "--out", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let t = json(&a);
    assert_eq!(t["itinerary"], "B_0 A B_1^2 B_0^10");
    assert_eq!(t["connect"]["v_shift"], t["connect"]["v_shift_predicted"]);
    assert_eq!(t["orbit"][0]["symbol"], "B0");
    assert_eq!(t["orbit"][1]["symbol"], "A");
}

#[test]
fn connect_demo_exit_codes() {
    assert_eq!(run(&["connect-demo", "--prime", "3"]).status.code(), Some(0));
    let out = run(&["connect-demo", "--prime", "5"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_error(&out)["error"], "InvalidConfig");
    // Too little precision to reach the residual target.
    assert_eq!(run(&["connect-demo", "--precision", "24"]).status.code(), Some(4));
}
