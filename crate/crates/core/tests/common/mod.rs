#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use hybridizer::driver::{self, Mode, RunConfig, RunOutput};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn fixture(rel: &str) -> String {
    fs::read_to_string(fixtures().join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

/// (import statement, decorator text bound by it)
pub const ALIAS_VARIANTS: [(&str, &str); 4] = [
    ("import tensorflow as tf", "tf.function"),
    ("import tensorflow", "tensorflow.function"),
    ("from tensorflow import function", "function"),
    ("from tensorflow import function as fn", "fn"),
];

/// Rewrites a fixture that starts with `import tensorflow as tf` and only
/// uses `tf` for the decorator.
pub fn with_alias(src: &str, import: &str, decorator: &str) -> String {
    let rest = src
        .strip_prefix("import tensorflow as tf\n")
        .expect("fixture starts with the canonical import");
    format!("{import}\n{}", rest.replace("@tf.function", &format!("@{decorator}")))
}

pub fn config(paths: Vec<PathBuf>, mode: Mode, speculative: bool) -> RunConfig {
    RunConfig {
        paths,
        mode,
        speculative,
        accept_assumptions: speculative,
        diff: true,
        ..RunConfig::default()
    }
}

/// Runs the driver and round-trips the report through JSON.
pub fn run_json(config: &RunConfig) -> (RunOutput, serde_json::Value) {
    let out = driver::run(config);
    let json = serde_json::from_str(&out.report.to_json()).expect("report is valid JSON");
    (out, json)
}

pub fn write(dir: &Path, rel: &str, text: &str) -> PathBuf {
    let path = dir.join(rel);
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(&path, text).unwrap();
    path
}

/// Every `.py` fixture (expected outputs excluded), relative paths.
pub fn fixture_files() -> Vec<String> {
    let root = fixtures();
    let mut out: Vec<String> = walkdir::WalkDir::new(&root)
        .sort_by_file_name()
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .map(|e| e.path().strip_prefix(&root).unwrap().to_string_lossy().into_owned())
        .filter(|p| p.ends_with(".py") && !p.ends_with(".expected.py"))
        .collect();
    out.sort();
    out
}

/// The corpus: every fixture plus alias variants of the listing and the
/// optimize fixtures, each in its own directory so module names stay unique
/// per program.
pub fn materialize_corpus(dir: &Path) -> Vec<PathBuf> {
    let mut roots = Vec::new();
    for rel in fixture_files() {
        let sub = dir.join(rel.replace(['/', '.'], "_"));
        let name = Path::new(&rel).file_name().unwrap().to_string_lossy().into_owned();
        write(&sub, &name, &fixture(&rel));
        roots.push(sub);
    }
    for (i, (import, decorator)) in ALIAS_VARIANTS.iter().enumerate() {
        let sub = dir.join(format!("alias_{i}"));
        let listing = fixture("listing1/model.py");
        write(&sub, "listing/model.py", &format!("{import}\n{listing}"));
        for name in ["varying.py", "mutation.py", "pure.py"] {
            let src = fixture(&format!("optimize/{name}"));
            write(&sub, &format!("optimize/{name}"), &with_alias(&src, import, decorator));
        }
        roots.push(sub);
    }
    roots
}

/// Runs the whole pipeline on one path and returns the patched text of
/// `file` (or the original when untouched).
pub fn converted(path: &Path, mode: Mode, speculative: bool) -> (RunOutput, String) {
    let out = driver::run(&config(vec![path.to_path_buf()], mode, speculative));
    let text = out
        .patched
        .iter()
        .find(|(p, _)| p == path)
        .map(|(_, t)| t.clone())
        .unwrap_or_else(|| fs::read_to_string(path).unwrap());
    (out, text)
}
