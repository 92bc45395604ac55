//! Span-based patching, post-edit verification and atomic writes.

use std::collections::BTreeSet;
use std::convert::Infallible;
use std::io::Write as _;
use std::path::Path;

use rustpython_ast::fold::Fold;
use rustpython_parser::ast::{self, Ranged, Stmt};
use rustpython_parser::lexer;
use rustpython_parser::text_size::TextRange;
use rustpython_parser::{Mode, Tok};
use serde::Serialize;
use thiserror::Error;

use crate::frontend::{LineIndex, ModuleUnit, SourceFile};
use crate::refactor::{Edit, EditPlan};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", content = "detail", rename_all = "snake_case")]
pub enum Verification {
    Ok,
    ReparseFailed(String),
    StructureChanged(String),
}

impl Verification {
    pub fn is_ok(&self) -> bool {
        matches!(self, Verification::Ok)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatchResult {
    pub new_text: String,
    pub applied: usize,
    pub verification: Verification,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum RewriteError {
    #[error("edits {0} and {1} overlap")]
    Overlap(usize, usize),
    #[error("edit {0} lies outside the file")]
    OutOfRange(usize),
}

/// Line terminator used by the file: CRLF if any line has one.
pub fn newline_of(text: &str) -> &'static str {
    if text.contains("\r\n") {
        "\r\n"
    } else {
        "\n"
    }
}

/// Text an edit puts in place of its byte range.
pub fn replacement(text: &str, lines: &LineIndex, edit: &Edit) -> String {
    let nl = newline_of(text);
    match edit {
        Edit::InsertLineBefore { indent, text: t, .. } => {
            let (start, _) = edit.byte_range(lines);
            // Appending after a last line that lacks a terminator.
            let lead = if start == text.len() && !text.is_empty() && !text.ends_with('\n') {
                nl
            } else {
                ""
            };
            format!("{lead}{indent}{t}{nl}")
        }
        Edit::ReplaceRange { text: t, .. } => t.clone(),
        Edit::DeleteLines { .. } => String::new(),
    }
}

/// Applies a plan last-to-first. Bytes outside the edited ranges are copied
/// unchanged.
pub fn apply_plan(text: &str, plan: &EditPlan) -> Result<String, RewriteError> {
    let lines = LineIndex::new(text);
    let line_count = lines.line_count() as u32;
    for (i, e) in plan.edits.iter().enumerate() {
        let in_range = match e {
            Edit::InsertLineBefore { line, .. } => *line >= 1 && *line <= line_count + 1,
            Edit::ReplaceRange { start, end, .. } => {
                start <= end && *end <= text.len() && text.is_char_boundary(*start) && text.is_char_boundary(*end)
            }
            Edit::DeleteLines { start_line, end_line } => {
                *start_line >= 1 && start_line <= end_line && *end_line <= line_count
            }
        };
        if !in_range {
            return Err(RewriteError::OutOfRange(i));
        }
        for (j, o) in plan.edits.iter().enumerate().skip(i + 1) {
            if e == o || e.overlaps(o, &lines) {
                return Err(RewriteError::Overlap(i, j));
            }
        }
    }
    let mut out = text.to_string();
    for i in plan.application_order(&lines) {
        let (start, end) = plan.edits[i].byte_range(&lines);
        out.replace_range(start..end, &replacement(text, &lines, &plan.edits[i]));
    }
    Ok(out)
}

/// What the verifier may ignore: decorators of the planned functions and
/// the import statement inserted at `import_at` (an original byte offset).
#[derive(Clone, Debug, Default)]
pub struct Allowed {
    pub planned: BTreeSet<String>,
    pub import_at: Option<usize>,
}

struct StripRanges;

impl Fold<TextRange> for StripRanges {
    type TargetU = ();
    type Error = Infallible;
    type UserContext = ();

    fn will_map_user(&mut self, _: &TextRange) {}

    fn map_user(&mut self, _: TextRange, _: ()) -> Result<(), Infallible> {
        Ok(())
    }
}

fn clear_planned_decorators(stmts: &mut [Stmt], prefix: &str, planned: &BTreeSet<String>) {
    for stmt in stmts {
        match stmt {
            Stmt::FunctionDef(ast::StmtFunctionDef {
                name,
                decorator_list,
                body,
                ..
            })
            | Stmt::AsyncFunctionDef(ast::StmtAsyncFunctionDef {
                name,
                decorator_list,
                body,
                ..
            }) => {
                let path = format!("{prefix}{name}");
                if planned.contains(&path) {
                    decorator_list.clear();
                }
                clear_planned_decorators(body, &format!("{path}.<locals>."), planned);
            }
            Stmt::ClassDef(c) => {
                let path = format!("{prefix}{}.", c.name);
                clear_planned_decorators(&mut c.body, &path, planned);
            }
            Stmt::If(s) => {
                clear_planned_decorators(&mut s.body, prefix, planned);
                clear_planned_decorators(&mut s.orelse, prefix, planned);
            }
            Stmt::For(s) => {
                clear_planned_decorators(&mut s.body, prefix, planned);
                clear_planned_decorators(&mut s.orelse, prefix, planned);
            }
            Stmt::AsyncFor(s) => {
                clear_planned_decorators(&mut s.body, prefix, planned);
                clear_planned_decorators(&mut s.orelse, prefix, planned);
            }
            Stmt::While(s) => {
                clear_planned_decorators(&mut s.body, prefix, planned);
                clear_planned_decorators(&mut s.orelse, prefix, planned);
            }
            Stmt::With(s) => clear_planned_decorators(&mut s.body, prefix, planned),
            Stmt::AsyncWith(s) => clear_planned_decorators(&mut s.body, prefix, planned),
            Stmt::Try(s) => {
                clear_planned_decorators(&mut s.body, prefix, planned);
                for ast::ExceptHandler::ExceptHandler(h) in &mut s.handlers {
                    clear_planned_decorators(&mut h.body, prefix, planned);
                }
                clear_planned_decorators(&mut s.orelse, prefix, planned);
                clear_planned_decorators(&mut s.finalbody, prefix, planned);
            }
            Stmt::TryStar(s) => {
                clear_planned_decorators(&mut s.body, prefix, planned);
                for ast::ExceptHandler::ExceptHandler(h) in &mut s.handlers {
                    clear_planned_decorators(&mut h.body, prefix, planned);
                }
                clear_planned_decorators(&mut s.orelse, prefix, planned);
                clear_planned_decorators(&mut s.finalbody, prefix, planned);
            }
            Stmt::Match(m) => {
                for case in &mut m.cases {
                    clear_planned_decorators(&mut case.body, prefix, planned);
                }
            }
            _ => {}
        }
    }
}

fn normalized(mut suite: Vec<Stmt>, planned: &BTreeSet<String>) -> Vec<ast::Stmt<()>> {
    clear_planned_decorators(&mut suite, "", planned);
    let Ok(stripped) = StripRanges.fold(suite);
    stripped
}

/// Tokens of `range`, skipping the `ignore` ranges.
fn tokens_in(all: &[(Tok, TextRange)], range: (usize, usize), ignore: &[(usize, usize)]) -> Vec<Tok> {
    all.iter()
        .filter(|(_, r)| {
            let (s, e) = (usize::from(r.start()), usize::from(r.end()));
            s >= range.0 && e <= range.1 && !ignore.iter().any(|&(a, b)| s >= a && e <= b)
        })
        .map(|(t, _)| t.clone())
        .collect()
}

fn decorator_lines(unit: &ModuleUnit, planned: &BTreeSet<String>) -> Vec<(usize, usize)> {
    unit.functions()
        .iter()
        .filter(|f| planned.contains(&f.qualified_path))
        .flat_map(|f| f.decorators.iter())
        .map(|d| (d.span.start, unit.lines.line_end(d.span.end_line)))
        .collect()
}

fn lex_all(text: &str) -> Option<Vec<(Tok, TextRange)>> {
    lexer::lex(text, Mode::Module).collect::<Result<Vec<_>, _>>().ok()
}

/// Re-parses `new_text` and checks that only the allowed deltas occurred.
pub fn verify(original: &ModuleUnit, new_text: &str, allowed: &Allowed) -> Verification {
    let file = SourceFile::new(original.file.path.clone(), new_text);
    let updated = match ModuleUnit::parse(file, &original.module_name) {
        Ok(u) => u,
        Err(e) => return Verification::ReparseFailed(e.to_string()),
    };

    let mut new_suite = updated.suite.clone();
    if let Some(at) = allowed.import_at {
        let pos = new_suite
            .iter()
            .position(|s| usize::from(s.start()) == at && matches!(s, Stmt::Import(_)));
        match pos {
            Some(i) => {
                new_suite.remove(i);
            }
            None => return Verification::StructureChanged("inserted import not found".into()),
        }
    }
    if normalized(original.suite.clone(), &allowed.planned) != normalized(new_suite, &allowed.planned) {
        return Verification::StructureChanged("syntax tree differs outside planned decorators".into());
    }

    let (old_fns, new_fns) = (original.functions(), updated.functions());
    if old_fns.len() != new_fns.len() {
        return Verification::StructureChanged("function count differs".into());
    }
    let (Some(old_tokens), Some(new_tokens)) = (lex_all(original.text()), lex_all(new_text)) else {
        return Verification::ReparseFailed("tokenization failed".into());
    };
    let old_ignore = decorator_lines(original, &allowed.planned);
    let new_ignore = decorator_lines(&updated, &allowed.planned);
    for (old, new) in old_fns.iter().zip(new_fns) {
        if old.qualified_path != new.qualified_path {
            return Verification::StructureChanged(format!(
                "function {} became {}",
                old.qualified_path, new.qualified_path
            ));
        }
        // Through the end of the last body line, so trailing comments count.
        let old_range = (old.body_span.start, original.lines.line_end(old.body_span.end_line));
        let new_range = (new.body_span.start, updated.lines.line_end(new.body_span.end_line));
        let a = tokens_in(&old_tokens, old_range, &old_ignore);
        let b = tokens_in(&new_tokens, new_range, &new_ignore);
        if a != b {
            return Verification::StructureChanged(format!("body of {} changed", old.qualified_path));
        }
    }
    Verification::Ok
}

/// Applies and verifies a plan.
pub fn patch(unit: &ModuleUnit, plan: &EditPlan, allowed: &Allowed) -> Result<PatchResult, RewriteError> {
    let new_text = apply_plan(unit.text(), plan)?;
    let verification = if plan.is_empty() {
        Verification::Ok
    } else {
        verify(unit, &new_text, allowed)
    };
    Ok(PatchResult {
        new_text,
        applied: plan.edits.len(),
        verification,
    })
}

/// Replaces `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, text: &str) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.as_file().sync_all()?;
    if let Ok(meta) = std::fs::metadata(path) {
        tmp.as_file().set_permissions(meta.permissions())?;
    }
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
