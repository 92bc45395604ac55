//! Edit planning: decorator insertion, decorator arguments, decorator
//! removal and the `tensorflow` import.

use std::fmt::Write as _;

use rustpython_parser::ast::{self, Expr, Ranged, Stmt};
use serde::Serialize;
use thiserror::Error;

use super::{Analyses, OptimizeAction, PreconditionReport};
use crate::callgraph::NodeId;
use crate::frontend::{FunctionDecl, LineIndex, ModuleUnit};
use crate::hybrid::{HybridizationStatus, API_PARAMETERS};
use crate::names::{BindingKind, Lookup, Program, QualifiedName};
use crate::types::{DType, Dim, ShapeFact};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Edit {
    /// A new line before 1-based `line`; one past the last line appends.
    InsertLineBefore { line: u32, indent: String, text: String },
    /// Byte range; an empty range is a pure insertion.
    ReplaceRange { start: usize, end: usize, text: String },
    /// Whole lines, inclusive, with their terminators.
    DeleteLines { start_line: u32, end_line: u32 },
}

impl Edit {
    /// Byte range of the original text this edit touches.
    pub fn byte_range(&self, lines: &LineIndex) -> (usize, usize) {
        match self {
            Edit::InsertLineBefore { line, .. } => {
                let at = lines.line_start(*line);
                (at, at)
            }
            Edit::ReplaceRange { start, end, .. } => (*start, *end),
            Edit::DeleteLines { start_line, end_line } => (lines.line_start(*start_line), lines.line_end(*end_line)),
        }
    }

    pub fn overlaps(&self, other: &Edit, lines: &LineIndex) -> bool {
        let (a0, a1) = self.byte_range(lines);
        let (b0, b1) = other.byte_range(lines);
        if a0 == a1 && b0 == b1 {
            // Insertions at one point are ordered by plan position.
            return false;
        }
        if a0 == a1 {
            return b0 < a0 && a0 < b1;
        }
        if b0 == b1 {
            return a0 < b0 && b0 < a1;
        }
        a0 < b1 && b0 < a1
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("planned edits for {function} overlap an edit already planned in this file")]
pub struct PlanConflict {
    pub function: String,
}

/// Non-overlapping edits for one file, in planning order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EditPlan {
    pub edits: Vec<Edit>,
}

impl EditPlan {
    pub fn is_empty(&self) -> bool {
        self.edits.is_empty()
    }

    /// Adds a function's edits atomically; exact duplicates (the shared
    /// import) are kept once.
    pub fn merge(&mut self, edits: Vec<Edit>, lines: &LineIndex, function: &str) -> Result<(), PlanConflict> {
        let fresh: Vec<Edit> = edits.into_iter().filter(|e| !self.edits.contains(e)).collect();
        for (i, e) in fresh.iter().enumerate() {
            let clash = self.edits.iter().chain(&fresh[..i]).any(|o| e.overlaps(o, lines));
            if clash {
                return Err(PlanConflict {
                    function: function.to_string(),
                });
            }
        }
        self.edits.extend(fresh);
        Ok(())
    }

    /// Indices in application order: descending position; at one position
    /// replacements go before insertions, later insertions before earlier.
    pub fn application_order(&self, lines: &LineIndex) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.edits.len()).collect();
        order.sort_by_key(|&i| {
            let (start, end) = self.edits[i].byte_range(lines);
            (std::cmp::Reverse(start), start == end, std::cmp::Reverse(i))
        });
        order
    }
}

/// How the module can spell the hybridization API at a position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ApiBinding {
    /// Decorator expression text, without the `@`.
    pub decorator: String,
    /// A name bound to the `tensorflow` module, for `TensorSpec` and dtypes.
    pub module_alias: Option<String>,
    /// Import statement to add when nothing usable is bound.
    pub import: Option<String>,
}

fn resolves_to(program: &Program, unit: usize, text: &str, at: usize, want: &QualifiedName) -> bool {
    let Ok(expr) = <Expr as rustpython_parser::Parse>::parse(text, "<planned>") else {
        return false;
    };
    program.resolve_path(unit, &expr, at).as_ref() == Some(want)
}

/// Existing binding to reuse for the decorator: a direct alias of the
/// function first, then a module alias. Without one, plans `import
/// tensorflow as tf` (or `import tensorflow` when `tf` is taken).
pub fn api_binding(program: &Program, unit: usize, at: usize) -> Option<ApiBinding> {
    let function = QualifiedName::parse("tensorflow.function").expect("valid");
    let module = QualifiedName::parse("tensorflow").expect("valid");
    let table = &program.tables[unit];
    let mut direct = Vec::new();
    let mut modules = Vec::new();
    for b in table.bindings() {
        if let BindingKind::Import(qn) = &b.kind {
            if *qn == function {
                direct.push(b.name.clone());
            } else if *qn == module {
                modules.push(b.name.clone());
            }
        }
    }
    direct.sort();
    direct.dedup();
    modules.sort();
    modules.dedup();
    let module_alias = modules
        .iter()
        .find(|m| resolves_to(program, unit, m, at, &module))
        .cloned();
    let candidates = direct
        .iter()
        .cloned()
        .chain(modules.iter().map(|m| format!("{m}.function")));
    for text in candidates {
        if resolves_to(program, unit, &text, at, &function) {
            return Some(ApiBinding {
                decorator: text,
                module_alias,
                import: None,
            });
        }
    }
    for (alias, import) in [("tf", "import tensorflow as tf"), ("tensorflow", "import tensorflow")] {
        let unused = table.bindings().all(|b| b.name != alias) && matches!(table.lookup(alias, at), Lookup::Free);
        if unused {
            return Some(ApiBinding {
                decorator: format!("{alias}.function"),
                module_alias: Some(alias.to_string()),
                import: Some(import.to_string()),
            });
        }
    }
    None
}

/// Line before which an added import goes: after a module docstring and any
/// `from __future__` imports.
pub fn import_anchor_line(unit: &ModuleUnit) -> u32 {
    let mut last_end = None;
    for (i, stmt) in unit.suite.iter().enumerate() {
        let skip = match stmt {
            Stmt::Expr(e) if i == 0 => matches!(
                e.value.as_ref(),
                Expr::Constant(c) if matches!(c.value, ast::Constant::Str(_))
            ),
            Stmt::ImportFrom(f) => f.module.as_deref() == Some("__future__"),
            _ => false,
        };
        if !skip {
            let start = match stmt {
                Stmt::FunctionDef(d) => d.decorator_list.first().map(|e| e.start()).unwrap_or(stmt.start()),
                Stmt::AsyncFunctionDef(d) => d.decorator_list.first().map(|e| e.start()).unwrap_or(stmt.start()),
                Stmt::ClassDef(c) => c.decorator_list.first().map(|e| e.start()).unwrap_or(stmt.start()),
                _ => stmt.start(),
            };
            return unit.lines.position(usize::from(start)).0;
        }
        last_end = Some(usize::from(stmt.end()));
    }
    match last_end {
        Some(end) => unit.lines.position(end).0 + 1,
        None => 1,
    }
}

pub fn render_input_signature(module: &str, specs: &[(DType, &ShapeFact)]) -> String {
    let mut out = String::from("[");
    for (i, (dtype, shape)) in specs.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let shape_text = match shape {
            ShapeFact::UnknownRank => "None".to_string(),
            ShapeFact::Rank(dims) => {
                let dims: Vec<String> = dims
                    .iter()
                    .map(|d| match d {
                        Dim::Known(n) => n.to_string(),
                        Dim::Symbolic => "None".to_string(),
                    })
                    .collect();
                format!("[{}]", dims.join(", "))
            }
        };
        let _ = write!(out, "{module}.TensorSpec(shape={shape_text}, dtype={module}.{})", dtype.name());
    }
    out.push(']');
    out
}

/// Decorator position: above the first existing decorator, else the `def`.
fn decorator_anchor(decl: &FunctionDecl) -> (u32, usize) {
    match decl.decorators.first() {
        Some(d) => (d.span.start_line, d.span.start),
        None => (decl.def_span.start_line, decl.def_span.start),
    }
}

/// Convert: the new decorator, plus the import when no binding exists.
/// `action` carries retracing arguments folded into the new decorator.
pub fn plan_convert(a: &Analyses, node: NodeId, action: &OptimizeAction) -> Option<Vec<Edit>> {
    let decl = a.decl(node);
    let unit = a.unit_of(node);
    let (line, at) = decorator_anchor(decl);
    let binding = api_binding(a.program, unit, at)?;
    let args = match action {
        OptimizeAction::AddReduceRetracing => "(reduce_retracing=True)".to_string(),
        OptimizeAction::AddInputSignature(sig) => format!("(input_signature={sig})"),
        _ => String::new(),
    };
    let mut edits = Vec::new();
    if let Some(import) = &binding.import {
        edits.push(Edit::InsertLineBefore {
            line: import_anchor_line(&a.program.units[unit]),
            indent: String::new(),
            text: import.clone(),
        });
    }
    edits.push(Edit::InsertLineBefore {
        line,
        indent: decl.indent.clone(),
        text: format!("@{}{args}", binding.decorator),
    });
    Some(edits)
}

/// Optimize: edits realizing `action` on the function's decorator.
pub fn plan_optimize(a: &Analyses, report: &PreconditionReport, action: &OptimizeAction) -> Vec<Edit> {
    let HybridizationStatus::Decorated { index, .. } = &report.status else {
        return Vec::new();
    };
    let decl = a.decl(report.node);
    let dec = &decl.decorators[*index];
    match action {
        OptimizeAction::NoChange => Vec::new(),
        OptimizeAction::RemoveDecorator => vec![Edit::DeleteLines {
            start_line: dec.span.start_line,
            end_line: dec.span.end_line,
        }],
        OptimizeAction::AddReduceRetracing => set_argument(&dec.expr, "reduce_retracing", "True"),
        OptimizeAction::AddInputSignature(sig) => set_argument(&dec.expr, "input_signature", sig),
    }
}

/// Sets `key=value` on a decorator, converting a bare decorator to a call.
fn set_argument(expr: &Expr, key: &str, value: &str) -> Vec<Edit> {
    let replace = |e: &Expr, text: String| Edit::ReplaceRange {
        start: usize::from(e.start()),
        end: usize::from(e.end()),
        text,
    };
    let insert = |at: usize, text: String| Edit::ReplaceRange {
        start: at,
        end: at,
        text,
    };
    let Expr::Call(call) = expr else {
        return vec![insert(usize::from(expr.end()), format!("({key}={value})"))];
    };
    if let Some(kw) = call.keywords.iter().find(|k| k.arg.as_deref() == Some(key)) {
        return vec![replace(&kw.value, value.to_string())];
    }
    if let Some(pos) = API_PARAMETERS.iter().position(|p| *p == key) {
        if let Some(arg) = call.args.get(pos) {
            return vec![replace(arg, value.to_string())];
        }
    }
    if key == "reduce_retracing" {
        // The deprecated spelling of the same option.
        if let Some(kw) = call
            .keywords
            .iter()
            .find(|k| k.arg.as_deref() == Some("experimental_relax_shapes"))
        {
            return vec![replace(&kw.value, value.to_string())];
        }
    }
    let last_end = call
        .args
        .iter()
        .map(|e| e.end())
        .chain(call.keywords.iter().map(|k| k.end()))
        .max();
    match last_end {
        Some(end) => vec![insert(usize::from(end), format!(", {key}={value}"))],
        None => vec![insert(usize::from(call.end()) - 1, format!("{key}={value}"))],
    }
}
