mod common;

use hybridizer::driver::{FunctionEntry, Mode};
use hybridizer::refactor::{Decision, PreconditionCode, Verdict};

use common::*;

const CODES: [&str; 8] = ["c1", "c2", "c3", "c4", "c5", "c6", "c7", "c8"];

fn target(name: &str) -> FunctionEntry {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), name, &fixture(&format!("preconditions/{name}")));
    let out = hybridizer::driver::run(&config(vec![path], Mode::Convert, false));
    out.report
        .functions
        .into_iter()
        .find(|f| f.function == "target")
        .unwrap_or_else(|| panic!("{name}: target not reported"))
}

#[test]
fn each_failing_fixture_fails_only_its_own_check() {
    for code in CODES {
        let entry = target(&format!("{code}_fail.py"));
        let own: PreconditionCode = code.parse().unwrap();
        let failing: Vec<PreconditionCode> = entry
            .checks
            .iter()
            .filter(|c| c.verdict == Verdict::Fail)
            .map(|c| c.code)
            .collect();
        assert_eq!(failing, vec![own], "{code}_fail.py");
        assert_eq!(entry.decision, Decision::Skip, "{code}_fail.py");
        assert!(entry.edits.is_empty(), "{code}_fail.py");
    }
}

#[test]
fn each_passing_fixture_proceeds() {
    for code in CODES {
        let entry = target(&format!("{code}_pass.py"));
        let own: PreconditionCode = code.parse().unwrap();
        assert_eq!(entry.verdict(own), Some(Verdict::Pass), "{code}_pass.py");
        assert_eq!(entry.decision, Decision::Proceed, "{code}_pass.py");
        assert!(!entry.edits.is_empty(), "{code}_pass.py");
    }
}

#[test]
fn optimize_fixtures_get_their_actions() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["varying.py", "mutation.py", "pure.py", "polymorphic_eager.py"] {
        write(dir.path(), name, &fixture(&format!("optimize/{name}")));
    }
    let out = hybridizer::driver::run(&config(vec![dir.path().to_path_buf()], Mode::Both, false));
    let action = |name: &str| {
        let f = out.report.function(name).unwrap_or_else(|| panic!("{name} not reported"));
        serde_json::to_value(&f.action).unwrap().to_string()
    };
    assert!(action("scale").contains("add_reduce_retracing"), "{}", action("scale"));
    assert!(action("record").contains("remove_decorator"), "{}", action("record"));
    assert!(action("double").contains("no_change"), "{}", action("double"));
    let norm = out.patched.iter().find(|(p, _)| p.ends_with("polymorphic_eager.py")).unwrap();
    assert!(
        norm.1.contains("@tf.function(input_signature=[tf.TensorSpec(shape=[None, None], dtype=tf.float32)])"),
        "{}",
        norm.1
    );
}
