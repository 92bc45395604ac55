//! Batch driver: discovery, analysis phases, planning, patching and the
//! JSON report.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use walkdir::WalkDir;

use crate::callgraph::ApiKnowledgeBase;
use crate::frontend::{LineIndex, ModuleUnit, SourceFile};
use crate::hybrid::HybridizationStatus;
use crate::names::{HybridApi, Program, QualifiedName};
use crate::refactor::{
    self, Analyses, Check, Decision, Edit, EditPlan, OptimizeAction, Options, PreconditionCode, PreconditionReport,
    Refactoring, Verdict,
};
use crate::rewrite::{self, Allowed, Verification};
use crate::types::{ParamFact, ShapeVariability};

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_NO_CHANGES: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CHANGES: i32 = 2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Convert,
    Optimize,
    #[default]
    Both,
}

#[derive(Clone, Debug, Default)]
pub struct RunConfig {
    pub paths: Vec<PathBuf>,
    pub mode: Mode,
    pub apply: bool,
    pub diff: bool,
    pub speculative: bool,
    pub accept_assumptions: bool,
    pub kb_path: Option<PathBuf>,
    pub extra_api_fqns: Vec<QualifiedName>,
    pub report_path: Option<PathBuf>,
    pub fail_on: Option<PreconditionCode>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FileStatus {
    Analyzed,
    ParseError,
    NotebookSkipped,
    Unreadable,
}

#[derive(Clone, Debug, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub status: FileStatus,
    pub line: Option<u32>,
    pub message: Option<String>,
    pub edits: usize,
    pub verification: Option<Verification>,
    pub written: bool,
}

/// One edit, as positioned in the original file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EditRecord {
    pub line: u32,
    pub column: u32,
    pub deleted: String,
    pub inserted: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct FunctionEntry {
    pub path: String,
    pub line: u32,
    pub function: String,
    pub fqn: String,
    pub refactoring: Refactoring,
    pub hybridization: HybridizationStatus,
    pub decision: Decision,
    pub action: Option<OptimizeAction>,
    pub checks: Vec<Check>,
    pub assumptions: Vec<String>,
    pub warnings: Vec<String>,
    pub params: Vec<ParamFact>,
    pub shape_variability: ShapeVariability,
    pub edits: Vec<EditRecord>,
}

impl FunctionEntry {
    pub fn verdict(&self, code: PreconditionCode) -> Option<Verdict> {
        self.checks.iter().find(|c| c.code == code).map(|c| c.verdict)
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Summary {
    pub files: usize,
    pub analyzed: usize,
    pub parse_errors: usize,
    pub notebooks_skipped: usize,
    pub functions: usize,
    pub proceed: usize,
    pub skipped: usize,
    pub speculative_candidates: usize,
    pub edits: usize,
    pub files_changed: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool_version: &'static str,
    pub mode: Mode,
    pub speculative: bool,
    /// The `input_signature` template used for planned signatures.
    pub signature_template: &'static str,
    pub files: Vec<FileEntry>,
    pub functions: Vec<FunctionEntry>,
    pub summary: Summary,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn function(&self, function: &str) -> Option<&FunctionEntry> {
        self.functions.iter().find(|f| f.function == function)
    }
}

#[derive(Debug)]
pub struct RunOutput {
    pub report: Report,
    pub exit_code: i32,
    /// Unified diffs of every changed file.
    pub diff: String,
    pub diagnostics: Vec<String>,
    /// Patched text per changed file, written or not.
    pub patched: Vec<(PathBuf, String)>,
}

struct Discovered {
    path: PathBuf,
    module: String,
    notebook: bool,
}

fn module_name(root: &Path, file: &Path) -> String {
    let rel = file.strip_prefix(root).unwrap_or(file);
    let mut parts: Vec<String> = rel
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect();
    if let Some(last) = parts.last_mut() {
        *last = last.trim_end_matches(".py").to_string();
    }
    if parts.len() > 1 && parts.last().map(String::as_str) == Some("__init__") {
        parts.pop();
    }
    parts.join(".")
}

fn discover(paths: &[PathBuf], errors: &mut Vec<String>) -> Vec<Discovered> {
    let mut out = Vec::new();
    for root in paths {
        if root.is_file() {
            let notebook = root.extension().is_some_and(|e| e == "ipynb");
            let stem = root.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            out.push(Discovered {
                path: root.clone(),
                module: stem,
                notebook,
            });
            continue;
        }
        if !root.is_dir() {
            errors.push(format!("{}: no such file or directory", root.display()));
            continue;
        }
        let walker = WalkDir::new(root)
            .follow_links(false)
            .sort_by_file_name()
            .into_iter()
            .filter_entry(|e| {
                let name = e.file_name().to_string_lossy();
                e.depth() == 0 || !(name.starts_with('.') || name == "__pycache__")
            });
        for entry in walker {
            match entry {
                Ok(e) if e.file_type().is_file() => {
                    let path = e.path();
                    match path.extension().and_then(|x| x.to_str()) {
                        Some("py") => out.push(Discovered {
                            path: path.to_path_buf(),
                            module: module_name(root, path),
                            notebook: false,
                        }),
                        Some("ipynb") => out.push(Discovered {
                            path: path.to_path_buf(),
                            module: String::new(),
                            notebook: true,
                        }),
                        _ => {}
                    }
                }
                Ok(_) => {}
                Err(e) => errors.push(e.to_string()),
            }
        }
    }
    out.sort_by(|a, b| a.path.cmp(&b.path));
    out.dedup_by(|a, b| a.path == b.path);
    out
}

fn record(text: &str, lines: &LineIndex, edit: &Edit) -> EditRecord {
    let (start, end) = edit.byte_range(lines);
    let (line, column) = lines.position(start);
    EditRecord {
        line,
        column,
        deleted: text[start..end].to_string(),
        inserted: rewrite::replacement(text, lines, edit),
    }
}

/// Runs every phase over the configured paths.
pub fn run(config: &RunConfig) -> RunOutput {
    let mut diagnostics = Vec::new();
    let mut failed = false;

    let mut kb = ApiKnowledgeBase::builtin();
    if let Some(path) = &config.kb_path {
        match std::fs::read_to_string(path).map_err(|e| e.to_string()).and_then(|t| {
            ApiKnowledgeBase::parse(&t).map_err(|e| e.to_string())
        }) {
            Ok(extra) => kb.extend(extra),
            Err(e) => {
                diagnostics.push(format!("{}: {e}", path.display()));
                failed = true;
            }
        }
    }
    let api = HybridApi::with_extra(config.extra_api_fqns.iter().cloned());
    let speculative = config.speculative || config.accept_assumptions;
    let options = Options {
        speculative,
        accept_assumptions: config.accept_assumptions,
    };

    let mut path_errors = Vec::new();
    let discovered = discover(&config.paths, &mut path_errors);
    if !path_errors.is_empty() {
        failed = true;
        diagnostics.extend(path_errors);
    }

    let parsed: Vec<(FileEntry, Option<ModuleUnit>)> = discovered
        .par_iter()
        .map(|d| {
            let path = d.path.display().to_string();
            let entry = |status, line, message| FileEntry {
                path: path.clone(),
                status,
                line,
                message,
                edits: 0,
                verification: None,
                written: false,
            };
            if d.notebook {
                return (entry(FileStatus::NotebookSkipped, None, Some("notebooks are not processed".into())), None);
            }
            let file = match SourceFile::read(&d.path) {
                Ok(f) => f,
                Err(e) => return (entry(FileStatus::Unreadable, None, Some(e.to_string())), None),
            };
            match ModuleUnit::parse(file, &d.module) {
                Ok(unit) => (entry(FileStatus::Analyzed, None, None), Some(unit)),
                Err(e) => (
                    entry(FileStatus::ParseError, Some(e.span.start_line), Some(e.message.clone())),
                    None,
                ),
            }
        })
        .collect();
    let mut files: Vec<FileEntry> = Vec::new();
    let mut units = Vec::new();
    for (entry, unit) in parsed {
        match entry.status {
            FileStatus::Unreadable => {
                diagnostics.push(format!("{}: {}", entry.path, entry.message.clone().unwrap_or_default()));
                failed = true;
            }
            FileStatus::ParseError => diagnostics.push(format!(
                "{}:{}: syntax error: {}; file skipped",
                entry.path,
                entry.line.unwrap_or(0),
                entry.message.clone().unwrap_or_default()
            )),
            _ => {}
        }
        files.push(entry);
        units.extend(unit);
    }
    let parse_errors = files.iter().filter(|f| f.status == FileStatus::ParseError).count();
    if parse_errors > 0 && units.is_empty() {
        failed = true;
    }

    let program = Program::new(units);
    let analyses = Analyses::compute(&program, &kb, &api, options);
    let convert = config.mode != Mode::Optimize;
    let optimize = config.mode != Mode::Convert;
    let reports = refactor::analyze_all(&analyses, convert, optimize);

    // Plan per file, functions in source order.
    let mut plans: Vec<EditPlan> = vec![EditPlan::default(); program.units.len()];
    let mut allowed: Vec<Allowed> = vec![Allowed::default(); program.units.len()];
    let mut order: Vec<usize> = (0..reports.len()).collect();
    order.sort_by_key(|&i| {
        let decl = analyses.decl(reports[i].node);
        (analyses.unit_of(reports[i].node), decl.def_span.start)
    });
    let mut entries: Vec<Option<FunctionEntry>> = vec![None; reports.len()];
    for i in order {
        let report = &reports[i];
        let unit_idx = analyses.unit_of(report.node);
        let unit = &program.units[unit_idx];
        let decl = analyses.decl(report.node);
        let mut warnings = report.warnings.clone();
        let edits = plan_for(&analyses, report, &mut warnings);
        debug_assert!(
            edits.is_empty() || report.refactoring != Refactoring::ConvertEagerFunctionToHybrid || !report.has_fail(),
            "safety gate"
        );
        let mut records = Vec::new();
        if !edits.is_empty() {
            let import_at = edits.iter().find_map(|e| match e {
                Edit::InsertLineBefore { indent, text, line } if indent.is_empty() && text.starts_with("import ") => {
                    Some(unit.lines.line_start(*line))
                }
                _ => None,
            });
            match plans[unit_idx].merge(edits.clone(), &unit.lines, &decl.qualified_path) {
                Ok(()) => {
                    records = edits.iter().map(|e| record(unit.text(), &unit.lines, e)).collect();
                    allowed[unit_idx].planned.insert(decl.qualified_path.clone());
                    if import_at.is_some() {
                        allowed[unit_idx].import_at = import_at;
                    }
                }
                Err(conflict) => warnings.push(format!("PlanConflict: {conflict}; plan dropped")),
            }
        }
        entries[i] = Some(FunctionEntry {
            path: unit.file.path.display().to_string(),
            line: decl.def_span.start_line,
            function: decl.qualified_path.clone(),
            fqn: report.fqn.clone(),
            refactoring: report.refactoring,
            hybridization: report.status.clone(),
            decision: report.decision,
            action: report.action.clone(),
            checks: report.checks.clone(),
            assumptions: report.assumptions.clone(),
            warnings,
            params: report.params.clone(),
            shape_variability: report.shape_variability,
            edits: records,
        });
    }
    let mut functions: Vec<FunctionEntry> = entries.into_iter().flatten().collect();

    // Patch, verify, write.
    let mut diff = String::new();
    let mut patched = Vec::new();
    for (idx, unit) in program.units.iter().enumerate() {
        let plan = &plans[idx];
        if plan.is_empty() {
            continue;
        }
        let path_text = unit.file.path.display().to_string();
        let entry = files.iter_mut().find(|f| f.path == path_text).expect("analyzed file has an entry");
        entry.edits = plan.edits.len();
        match rewrite::patch(unit, plan, &allowed[idx]) {
            Err(e) => {
                diagnostics.push(format!("{path_text}: {e}"));
                entry.verification = Some(Verification::StructureChanged(e.to_string()));
                failed = true;
            }
            Ok(result) => {
                entry.verification = Some(result.verification.clone());
                if !result.verification.is_ok() {
                    diagnostics.push(format!(
                        "{path_text}: verification failed ({:?}); file not modified",
                        result.verification
                    ));
                    failed = true;
                    continue;
                }
                if config.diff {
                    let text_diff = similar::TextDiff::from_lines(unit.text(), &result.new_text);
                    diff.push_str(
                        &text_diff
                            .unified_diff()
                            .context_radius(3)
                            .header(&format!("a/{path_text}"), &format!("b/{path_text}"))
                            .to_string(),
                    );
                }
                if config.apply {
                    match rewrite::write_atomic(&unit.file.path, &result.new_text) {
                        Ok(()) => entry.written = true,
                        Err(e) => {
                            diagnostics.push(format!("{path_text}: write failed: {e}"));
                            failed = true;
                        }
                    }
                }
                patched.push((unit.file.path.clone(), result.new_text));
            }
        }
    }

    let total_edits: usize = plans.iter().map(|p| p.edits.len()).sum();
    let summary = Summary {
        files: files.len(),
        analyzed: files.iter().filter(|f| f.status == FileStatus::Analyzed).count(),
        parse_errors,
        notebooks_skipped: files.iter().filter(|f| f.status == FileStatus::NotebookSkipped).count(),
        functions: functions.len(),
        proceed: functions.iter().filter(|f| f.decision == Decision::Proceed).count(),
        skipped: functions.iter().filter(|f| f.decision == Decision::Skip).count(),
        speculative_candidates: functions
            .iter()
            .filter(|f| f.decision == Decision::SpeculativeCandidate)
            .count(),
        edits: total_edits,
        files_changed: patched.len(),
    };

    if let Some(code) = config.fail_on {
        functions.retain(|f| f.verdict(code) == Some(Verdict::Fail));
    }
    functions.sort_by(|a, b| (&a.path, a.line, &a.function).cmp(&(&b.path, b.line, &b.function)));
    files.sort_by(|a, b| a.path.cmp(&b.path));

    let report = Report {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION"),
        mode: config.mode,
        speculative,
        signature_template: "[<tf>.TensorSpec(shape=[<dim>, ...], dtype=<tf>.<dtype>), ...]",
        files,
        functions,
        summary,
    };
    if let Some(path) = &config.report_path {
        if let Err(e) = std::fs::write(path, report.to_json()) {
            diagnostics.push(format!("{}: cannot write report: {e}", path.display()));
            failed = true;
        }
    }
    let exit_code = if failed {
        EXIT_ERROR
    } else if total_edits > 0 {
        EXIT_CHANGES
    } else {
        EXIT_NO_CHANGES
    };
    RunOutput {
        report,
        exit_code,
        diff,
        diagnostics,
        patched,
    }
}

/// Edits for one report; empty unless the report calls for a change.
fn plan_for(a: &Analyses, report: &PreconditionReport, warnings: &mut Vec<String>) -> Vec<Edit> {
    match report.refactoring {
        Refactoring::ConvertEagerFunctionToHybrid => {
            if report.decision != Decision::Proceed {
                return Vec::new();
            }
            // Retracing arguments go into the new decorator right away, so a
            // second run has nothing left to optimize.
            let fold = if report.shape_variability == ShapeVariability::PolymorphicShapes {
                let decl = a.decl(report.node);
                let at = decl.decorators.first().map_or(decl.def_span.start, |d| d.span.start);
                let binding = refactor::api_binding(a.program, a.unit_of(report.node), at);
                refactor::retracing_action(&report.params, report.shape_variability, binding.as_ref())
            } else {
                OptimizeAction::NoChange
            };
            match refactor::plan_convert(a, report.node, &fold) {
                Some(edits) => edits,
                None => {
                    warnings.push("no usable name for tensorflow.function at this position".into());
                    Vec::new()
                }
            }
        }
        Refactoring::OptimizeHybridFunction => match &report.action {
            Some(action) => refactor::plan_optimize(a, report, action),
            None => Vec::new(),
        },
    }
}

/// One-line human summary of a function entry.
pub fn describe(entry: &FunctionEntry) -> String {
    let failed: Vec<String> = entry
        .checks
        .iter()
        .filter(|c| c.verdict == Verdict::Fail)
        .map(|c| c.code.to_string())
        .collect();
    let mut line = format!(
        "{}:{}: {} [{}] {:?}",
        entry.path,
        entry.line,
        entry.function,
        match entry.refactoring {
            Refactoring::ConvertEagerFunctionToHybrid => "convert",
            Refactoring::OptimizeHybridFunction => "optimize",
        },
        entry.decision
    );
    if let Some(action) = &entry.action {
        line.push_str(&format!(" {action:?}"));
    }
    if !failed.is_empty() {
        line.push_str(&format!(" (failed: {})", failed.join(", ")));
    }
    line
}
