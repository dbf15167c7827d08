//! Runs every example binary built alongside this test.

use std::path::PathBuf;
use std::process::Command;

const EXAMPLES: [&str; 7] =
    ["skeleton_dynamics", "synthesize_plan", "padic_newton", "fixed_points", "connect_demo", "verify_lemmas", "certify"];

fn example_path(name: &str) -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    let dir = exe.parent().unwrap().parent().unwrap().join("examples");
    dir.join(format!("{name}{}", std::env::consts::EXE_SUFFIX))
}

#[test]
fn examples_succeed() {
    for name in EXAMPLES {
        let path = example_path(name);
        assert!(path.exists(), "{} not built; a full `cargo test` builds the examples", path.display());
        let out = Command::new(&path).output().unwrap();
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stdout.is_empty(), "{name} printed nothing");
    }
}

#[test]
fn connect_example_certifies() {
    let out = Command::new(example_path("connect_demo")).arg("3").output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("ok: true"), "{text}");
}
