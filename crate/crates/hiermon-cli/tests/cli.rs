//! End-to-end checks of the `hiermon` binary: exit codes and output layout.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hiermon"))
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

#[test]
fn run_writes_outputs_and_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("run")
        .arg(scenarios().join("paper-7node.toml"))
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("paper-7node").join("42");
    assert!(dir.join("trace.log").is_file());
    assert!(dir.join("report.json").is_file());
    assert!(dir.join("metrics.log").is_file());
    assert!(stdout(&out).contains("assert [pass]"));

    // The written trace satisfies the aggregation oracle.
    let verify = bin()
        .arg("verify")
        .arg(dir.join("trace.log"))
        .arg("--oracle")
        .arg("aggregation")
        .output()
        .unwrap();
    assert!(verify.status.success());
    assert!(stdout(&verify).contains("pass"));
}

#[test]
fn verify_rejects_corrupted_trace() {
    let tmp = tempfile::tempdir().unwrap();
    bin()
        .arg("run")
        .arg(scenarios().join("paper-7node.toml"))
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    let trace_path = tmp.path().join("paper-7node").join("42").join("trace.log");
    let text = std::fs::read_to_string(&trace_path).unwrap();
    let corrupted = text.replacen("cpu_mean=", "cpu_mean=9", 1);
    assert_ne!(corrupted, text);
    std::fs::write(&trace_path, corrupted).unwrap();

    let out = bin()
        .arg("verify")
        .arg(&trace_path)
        .arg("--oracle")
        .arg("aggregation")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("FAIL"));
    assert!(stdout(&out).contains("line "));
}

#[test]
fn failing_embedded_assertion_sets_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = r#"
[scenario]
name = "will-fail"
duration_ms = 5000

[[topology]]
id = "boot"
role = "boot"

[[topology]]
id = "n1"
role = "node"
parent = "boot"
capacity = { cpu = 4 }

[[assertions]]
kind = "counter"
name = "lifecycle.node-failed"
op = "eq"
value = 99
"#;
    let path = tmp.path().join("will-fail.toml");
    std::fs::write(&path, scenario).unwrap();
    let out = bin()
        .arg("run")
        .arg(&path)
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("assert [FAIL]"));
}

#[test]
fn invalid_scenario_lists_every_violation() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = r#"
[scenario]
name = "broken"
duration_ms = 1000

[heartbeat]
period_ms = 1000
failure_timeout_ms = 500

[[topology]]
id = "boot"
role = "boot"

[[faults]]
kind = "crash"
actor = "ghost"
at_ms = 5000
"#;
    let path = tmp.path().join("broken.toml");
    std::fs::write(&path, scenario).unwrap();
    let out = bin().arg("run").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("failure_timeout"), "{err}");
    assert!(err.contains("ghost"), "{err}");
    assert!(err.contains("past duration"), "{err}");
}

#[test]
fn parse_descriptor_resolves_bindings() {
    let out = bin()
        .arg("parse-descriptor")
        .arg(scenarios().join("deploy.desc"))
        .arg("-DNODES=h1 h2 h3")
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("3 target(s): h1 h2 h3"), "{text}");

    let bad = bin()
        .arg("parse-descriptor")
        .arg(scenarios().join("deploy.desc"))
        .arg("-DWRONG=1")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("unbound variable NODES"));
}

#[test]
fn seed_override_changes_output_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("run")
        .arg(scenarios().join("escalation.toml"))
        .arg("--seed")
        .arg("7")
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(tmp.path().join("escalation").join("7").join("trace.log").is_file());
}
