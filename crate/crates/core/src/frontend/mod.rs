//! Parsing of Python 3 source into a positioned syntax tree and enumeration
//! of function declarations.
//!
//! Source text is kept verbatim. Every later rewrite is expressed as a byte
//! range edit against that text, so comments and formatting survive.

pub mod walk;

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rustpython_parser::ast::{self, Expr, Ranged, Stmt};
use rustpython_parser::text_size::TextRange;
use serde::Serialize;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceFile {
    pub path: PathBuf,
    pub text: String,
}

impl SourceFile {
    pub fn new(path: impl Into<PathBuf>, text: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            text: text.into(),
        }
    }

    pub fn read(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::new(path, text))
    }
}

/// A region of a source file. Lines are 1-based; columns are 0-based byte
/// offsets within the line. `start`/`end` are absolute byte offsets.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SourceSpan {
    pub file: Arc<str>,
    pub start_line: u32,
    pub start_col: u32,
    pub end_line: u32,
    pub end_col: u32,
    #[serde(skip)]
    pub start: usize,
    #[serde(skip)]
    pub end: usize,
}

impl SourceSpan {
    pub fn contains_offset(&self, offset: usize) -> bool {
        self.start <= offset && offset < self.end
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.start_line, self.start_col)
    }
}

/// Byte offsets of line starts.
#[derive(Clone, Debug)]
pub struct LineIndex {
    starts: Vec<usize>,
    len: usize,
}

impl LineIndex {
    pub fn new(text: &str) -> Self {
        let mut starts = vec![0];
        for (i, b) in text.bytes().enumerate() {
            if b == b'\n' {
                starts.push(i + 1);
            }
        }
        Self {
            starts,
            len: text.len(),
        }
    }

    /// Number of lines, counting a final line without terminator.
    pub fn line_count(&self) -> usize {
        if self.starts.len() > 1 && *self.starts.last().unwrap() == self.len {
            self.starts.len() - 1
        } else {
            self.starts.len()
        }
    }

    /// (1-based line, 0-based byte column) of `offset`.
    pub fn position(&self, offset: usize) -> (u32, u32) {
        let line = match self.starts.binary_search(&offset) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        ((line + 1) as u32, (offset - self.starts[line]) as u32)
    }

    /// Offset of the first byte of 1-based `line`; one past the last line
    /// maps to the end of the text.
    pub fn line_start(&self, line: u32) -> usize {
        let idx = line.saturating_sub(1) as usize;
        self.starts.get(idx).copied().unwrap_or(self.len)
    }

    /// Offset just past the terminator of 1-based `line`.
    pub fn line_end(&self, line: u32) -> usize {
        self.starts.get(line as usize).copied().unwrap_or(self.len)
    }
}

#[derive(Debug, Clone, Error)]
#[error("{span}: syntax error: {message}")]
pub struct ParseError {
    pub span: SourceSpan,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    PositionalOnly,
    Positional,
    VarPositional,
    KeywordOnly,
    VarKeyword,
}

#[derive(Clone, Debug)]
pub struct Param {
    pub name: String,
    pub kind: ParamKind,
    pub annotation: Option<Expr>,
    pub default: Option<Expr>,
    pub span: SourceSpan,
}

#[derive(Clone, Debug)]
pub struct Decorator {
    pub expr: Expr,
    /// From the `@` through the end of the decorator expression.
    pub span: SourceSpan,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    /// Not defined directly in a class body.
    Function,
    Instance,
    Class,
    Static,
}

#[derive(Clone, Debug)]
pub struct FunctionDecl {
    /// Dotted `__qualname__`-style path, e.g. `Model.__call__` or
    /// `outer.<locals>.inner`.
    pub qualified_path: String,
    pub name: String,
    pub params: Vec<Param>,
    pub decorators: Vec<Decorator>,
    pub body: Vec<Stmt>,
    /// The `def` line, from the `def`/`async` keyword to the end of the line.
    pub def_span: SourceSpan,
    /// Whole statement from the `def`/`async` keyword to the end of the body.
    pub span: SourceSpan,
    pub body_span: SourceSpan,
    /// Leading whitespace of the `def` line.
    pub indent: String,
    pub is_method: bool,
    pub method_kind: MethodKind,
    pub is_generator: bool,
    pub is_async: bool,
    /// Qualified path of the enclosing class for methods.
    pub class_path: Option<String>,
}

impl FunctionDecl {
    /// Name of the implicit receiver (`self`/`cls`) if the function has one.
    pub fn receiver(&self) -> Option<&str> {
        match self.method_kind {
            MethodKind::Instance | MethodKind::Class => self
                .params
                .first()
                .filter(|p| matches!(p.kind, ParamKind::PositionalOnly | ParamKind::Positional))
                .map(|p| p.name.as_str()),
            _ => None,
        }
    }

    /// Parameters excluding the receiver.
    pub fn value_params(&self) -> impl Iterator<Item = &Param> {
        let skip = usize::from(self.receiver().is_some());
        self.params.iter().skip(skip)
    }
}

#[derive(Clone, Debug)]
pub struct ClassDecl {
    pub qualified_path: String,
    /// Declares base classes or a metaclass.
    pub has_bases: bool,
    pub span: SourceSpan,
}

/// A parsed module: the verbatim source plus its syntax tree.
#[derive(Debug)]
pub struct ModuleUnit {
    pub file: SourceFile,
    /// Dotted module name (`pkg.sub.mod`).
    pub module_name: String,
    pub is_package: bool,
    pub suite: Vec<Stmt>,
    pub lines: LineIndex,
    label: Arc<str>,
    functions: Vec<FunctionDecl>,
    classes: Vec<ClassDecl>,
}

impl ModuleUnit {
    pub fn parse(file: SourceFile, module_name: &str) -> Result<Self, ParseError> {
        let label: Arc<str> = Arc::from(file.path.to_string_lossy().as_ref());
        let lines = LineIndex::new(&file.text);
        let suite = <ast::Suite as rustpython_parser::Parse>::parse(&file.text, &label).map_err(|err| {
            let offset = usize::from(err.offset).min(file.text.len());
            let (line, col) = lines.position(offset);
            ParseError {
                span: SourceSpan {
                    file: label.clone(),
                    start_line: line,
                    start_col: col,
                    end_line: line,
                    end_col: col,
                    start: offset,
                    end: offset,
                },
                message: err.error.to_string(),
            }
        })?;
        let is_package = file
            .path
            .file_stem()
            .is_some_and(|stem| stem == "__init__");
        let mut unit = Self {
            file,
            module_name: module_name.to_string(),
            is_package,
            suite,
            lines,
            label,
            functions: Vec::new(),
            classes: Vec::new(),
        };
        let mut functions = Vec::new();
        let mut classes = Vec::new();
        collect_functions(&unit, &unit.suite, "", None, &mut functions, &mut classes);
        functions.sort_by_key(|f| f.def_span.start);
        classes.sort_by_key(|c| c.span.start);
        unit.functions = functions;
        unit.classes = classes;
        Ok(unit)
    }

    pub fn text(&self) -> &str {
        &self.file.text
    }

    pub fn label(&self) -> &Arc<str> {
        &self.label
    }

    pub fn functions(&self) -> &[FunctionDecl] {
        &self.functions
    }

    pub fn classes(&self) -> &[ClassDecl] {
        &self.classes
    }

    pub fn function(&self, qualified_path: &str) -> Option<&FunctionDecl> {
        self.functions
            .iter()
            .find(|f| f.qualified_path == qualified_path)
    }

    pub fn span(&self, start: usize, end: usize) -> SourceSpan {
        let (start_line, start_col) = self.lines.position(start);
        let (end_line, end_col) = self.lines.position(end);
        SourceSpan {
            file: self.label.clone(),
            start_line,
            start_col,
            end_line,
            end_col,
            start,
            end,
        }
    }

    pub fn span_of(&self, range: TextRange) -> SourceSpan {
        self.span(usize::from(range.start()), usize::from(range.end()))
    }

    pub fn slice(&self, span: &SourceSpan) -> &str {
        &self.file.text[span.start..span.end]
    }

    pub fn line_text(&self, line: u32) -> &str {
        &self.file.text[self.lines.line_start(line)..self.lines.line_end(line)]
    }

    /// Spans that tile the file: each top-level statement together with the
    /// trivia (blank lines, comments) that precedes it, and a final segment
    /// with trailing trivia. Concatenated in order they reproduce the text.
    pub fn top_level_segments(&self) -> Vec<SourceSpan> {
        let mut out = Vec::new();
        let mut cursor = 0;
        for stmt in &self.suite {
            let end = usize::from(stmt.end());
            out.push(self.span(cursor, end));
            cursor = end;
        }
        out.push(self.span(cursor, self.file.text.len()));
        out
    }
}

/// Parses a file using its stem as the module name.
pub fn parse_module(file: SourceFile) -> Result<ModuleUnit, ParseError> {
    let name = file
        .path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "__main__".to_string());
    ModuleUnit::parse(file, &name)
}

pub fn enumerate_functions(unit: &ModuleUnit) -> Vec<FunctionDecl> {
    unit.functions.clone()
}

enum Scope<'a> {
    Class(&'a str),
    Function,
}

fn collect_functions(
    unit: &ModuleUnit,
    body: &[Stmt],
    prefix: &str,
    scope: Option<&Scope>,
    out: &mut Vec<FunctionDecl>,
    classes: &mut Vec<ClassDecl>,
) {
    for stmt in body {
        match stmt {
            Stmt::FunctionDef(def) => {
                let decl = function_decl(
                    unit,
                    stmt,
                    def.name.as_str(),
                    &def.args,
                    &def.decorator_list,
                    &def.body,
                    false,
                    prefix,
                    scope,
                );
                let inner = format!("{}.<locals>.", decl.qualified_path);
                out.push(decl);
                collect_functions(unit, &def.body, &inner, Some(&Scope::Function), out, classes);
            }
            Stmt::AsyncFunctionDef(def) => {
                let decl = function_decl(
                    unit,
                    stmt,
                    def.name.as_str(),
                    &def.args,
                    &def.decorator_list,
                    &def.body,
                    true,
                    prefix,
                    scope,
                );
                let inner = format!("{}.<locals>.", decl.qualified_path);
                out.push(decl);
                collect_functions(unit, &def.body, &inner, Some(&Scope::Function), out, classes);
            }
            Stmt::ClassDef(class) => {
                let path = format!("{prefix}{}", class.name);
                let inner = format!("{path}.");
                classes.push(ClassDecl {
                    qualified_path: path.clone(),
                    has_bases: !class.bases.is_empty() || !class.keywords.is_empty(),
                    span: unit.span_of(class.range),
                });
                collect_functions(unit, &class.body, &inner, Some(&Scope::Class(&path)), out, classes);
            }
            other => {
                for block in walk::child_blocks(other) {
                    collect_functions(unit, block, prefix, scope, out, classes);
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn function_decl(
    unit: &ModuleUnit,
    stmt: &Stmt,
    name: &str,
    args: &ast::Arguments,
    decorator_list: &[Expr],
    body: &[Stmt],
    is_async: bool,
    prefix: &str,
    scope: Option<&Scope>,
) -> FunctionDecl {
    let text = unit.text();
    let start = usize::from(stmt.start());
    let end = usize::from(stmt.end());
    let (def_line, _) = unit.lines.position(start);
    let line_start = unit.lines.line_start(def_line);
    let mut line_end = unit.lines.line_end(def_line);
    while line_end > start && matches!(text.as_bytes()[line_end - 1], b'\n' | b'\r') {
        line_end -= 1;
    }
    let indent: String = text[line_start..start]
        .chars()
        .take_while(|c| c.is_whitespace())
        .collect();

    let decorators = decorator_list
        .iter()
        .map(|expr| {
            let expr_start = usize::from(expr.start());
            let at = text[..expr_start].rfind('@').unwrap_or(expr_start);
            Decorator {
                expr: expr.clone(),
                span: unit.span(at, usize::from(expr.end())),
            }
        })
        .collect::<Vec<_>>();

    let class_path = match scope {
        Some(Scope::Class(path)) => Some(path.to_string()),
        _ => None,
    };
    let method_kind = if class_path.is_none() {
        MethodKind::Function
    } else if decorators.iter().any(|d| is_builtin_decorator(&d.expr, "staticmethod")) {
        MethodKind::Static
    } else if decorators.iter().any(|d| is_builtin_decorator(&d.expr, "classmethod")) {
        MethodKind::Class
    } else {
        MethodKind::Instance
    };

    let body_start = body.first().map(|s| usize::from(s.start())).unwrap_or(end);

    FunctionDecl {
        qualified_path: format!("{prefix}{name}"),
        name: name.to_string(),
        params: params_of(unit, args),
        decorators,
        body: body.to_vec(),
        def_span: unit.span(start, line_end),
        span: unit.span(start, end),
        body_span: unit.span(body_start, end),
        indent,
        is_method: class_path.is_some(),
        method_kind,
        is_generator: walk::contains_yield(body),
        is_async,
        class_path,
    }
}

fn is_builtin_decorator(expr: &Expr, name: &str) -> bool {
    matches!(expr, Expr::Name(n) if n.id.as_str() == name)
}

fn params_of(unit: &ModuleUnit, args: &ast::Arguments) -> Vec<Param> {
    let mut out = Vec::new();
    let push_with_default = |list: &[ast::ArgWithDefault], kind: ParamKind, out: &mut Vec<Param>| {
        for arg in list {
            out.push(Param {
                name: arg.def.arg.to_string(),
                kind,
                annotation: arg.def.annotation.as_deref().cloned(),
                default: arg.default.as_deref().cloned(),
                span: unit.span_of(arg.def.range),
            });
        }
    };
    push_with_default(&args.posonlyargs, ParamKind::PositionalOnly, &mut out);
    push_with_default(&args.args, ParamKind::Positional, &mut out);
    if let Some(vararg) = &args.vararg {
        out.push(Param {
            name: vararg.arg.to_string(),
            kind: ParamKind::VarPositional,
            annotation: vararg.annotation.as_deref().cloned(),
            default: None,
            span: unit.span_of(vararg.range),
        });
    }
    push_with_default(&args.kwonlyargs, ParamKind::KeywordOnly, &mut out);
    if let Some(kwarg) = &args.kwarg {
        out.push(Param {
            name: kwarg.arg.to_string(),
            kind: ParamKind::VarKeyword,
            annotation: kwarg.annotation.as_deref().cloned(),
            default: None,
            span: unit.span_of(kwarg.range),
        });
    }
    out
}
