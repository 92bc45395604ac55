mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::*;

fn hybridizer(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hybridizer"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn listing_reports_changes_and_prints_diff() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "model.py", &fixture("listing1/model.py"));
    let out = hybridizer(&["--accept-assumptions", "--diff", "model.py"], dir.path());
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    let diff = String::from_utf8(out.stdout).unwrap();
    assert!(diff.contains("+import tensorflow as tf"), "{diff}");
    assert!(diff.contains("+    @tf.function"), "{diff}");
    // Dry run leaves the file alone.
    assert_eq!(fs::read_to_string(dir.path().join("model.py")).unwrap(), fixture("listing1/model.py"));
}

#[test]
fn apply_writes_the_expected_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "model.py", &fixture("listing1/model.py"));
    let out = hybridizer(&["--accept-assumptions", "--apply", "model.py"], dir.path());
    assert_eq!(code(&out), 2);
    assert_eq!(fs::read_to_string(&path).unwrap(), fixture("listing1/model.expected.py"));
    let again = hybridizer(&["--accept-assumptions", "--apply", "model.py"], dir.path());
    assert_eq!(code(&again), 0);
}

#[test]
fn no_tensor_code_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "plain.py", &fixture("cli/plain.py"));
    let out = hybridizer(&["--diff", "."], dir.path());
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
}

#[test]
fn missing_path_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&hybridizer(&["absent.py"], dir.path())), 1);
}

#[test]
fn bad_flag_is_an_error_and_help_is_not() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&hybridizer(&["--mode", "sideways"], dir.path())), 1);
    assert_eq!(code(&hybridizer(&["--fail-on", "C9"], dir.path())), 1);
    assert_eq!(code(&hybridizer(&["--help"], dir.path())), 0);
    assert_eq!(code(&hybridizer(&["--version"], dir.path())), 0);
}

#[test]
fn report_names_the_call_chain_for_transitive_effects() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "chain.py", &fixture("cli/chain.py"));
    let out = hybridizer(&["--mode", "convert", "--report", "r.json", "chain.py"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);
    let f = json["functions"]
        .as_array()
        .unwrap()
        .iter()
        .find(|f| f["function"] == "f")
        .expect("f reported");
    let c3 = f["checks"].as_array().unwrap().iter().find(|c| c["code"] == "C3").unwrap();
    assert_eq!(c3["verdict"], "fail");
    let evidence = c3["evidence"].to_string();
    assert!(evidence.contains("via chain.f -> chain.g"), "{evidence}");
    assert!(evidence.contains("builtins.print"), "{evidence}");
}

#[test]
fn fail_on_keeps_only_failing_functions() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "chain.py", &fixture("cli/chain.py"));
    let out = hybridizer(
        &["--mode", "convert", "--fail-on", "C3", "--report", "r.json", "chain.py"],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    let names: Vec<&str> = json["functions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["function"].as_str().unwrap())
        .collect();
    assert!(names.contains(&"f") && names.contains(&"g"), "{names:?}");
    for f in json["functions"].as_array().unwrap() {
        let c3 = f["checks"].as_array().unwrap().iter().find(|c| c["code"] == "C3").unwrap();
        assert_eq!(c3["verdict"], "fail");
    }
}

#[test]
fn parse_errors_are_reported_but_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "broken.py", "def oops(:\n");
    write(dir.path(), "model.py", &fixture("listing1/model.py"));
    let out = hybridizer(&["--accept-assumptions", "--report", "r.json", "."], dir.path());
    assert_eq!(code(&out), 2);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    let broken = json["files"]
        .as_array()
        .unwrap()
        .iter()
        .find(|f| f["path"].as_str().unwrap().ends_with("broken.py"))
        .unwrap();
    assert_eq!(broken["status"], "parse_error");
    assert_eq!(json["summary"]["parse_errors"], 1);
}

#[test]
fn only_parse_errors_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "broken.py", "def oops(:\n");
    assert_eq!(code(&hybridizer(&["."], dir.path())), 1);
}
