//! Qualified-name resolution for Python modules.
//!
//! Every module gets an [`ImportTable`] recording, per lexical scope, the
//! names bound by imports, `def`/`class` statements and ordinary
//! assignments, each with the byte offset from which it is visible. Lookup
//! is position sensitive: a use only sees bindings introduced before it.
//! The one exception is a lookup that leaves a function body for an
//! enclosing scope, where `def`/`class` bindings are visible regardless of
//! order (a function may call a helper defined further down the module).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rustpython_parser::ast::{self, Expr, Ranged, Stmt};
use serde::{Serialize, Serializer};

use crate::frontend::walk::{self, ScopeVisitor};
use crate::frontend::{ModuleUnit, SourceSpan};

/// Dotted identity of a program entity, e.g. `tensorflow.function`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QualifiedName {
    segments: Vec<String>,
}

impl QualifiedName {
    pub fn new<S: Into<String>>(segments: impl IntoIterator<Item = S>) -> Option<Self> {
        let segments: Vec<String> = segments.into_iter().map(Into::into).collect();
        if segments.is_empty() || segments.iter().any(|s| s.is_empty()) {
            return None;
        }
        Some(Self { segments })
    }

    pub fn parse(dotted: &str) -> Option<Self> {
        Self::new(dotted.split('.'))
    }

    pub fn segments(&self) -> &[String] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn last(&self) -> &str {
        self.segments.last().expect("non-empty")
    }

    pub fn child(&self, segment: &str) -> Self {
        let mut segments = self.segments.clone();
        segments.push(segment.to_string());
        Self { segments }
    }

    pub fn extended<'s>(&self, tail: impl IntoIterator<Item = &'s str>) -> Self {
        let mut segments = self.segments.clone();
        segments.extend(tail.into_iter().map(str::to_string));
        Self { segments }
    }

    pub fn prefix(&self, len: usize) -> Option<Self> {
        Self::new(self.segments[..len.min(self.segments.len())].iter().cloned())
    }

    pub fn starts_with(&self, prefix: &QualifiedName) -> bool {
        self.segments.starts_with(&prefix.segments)
    }
}

impl fmt::Display for QualifiedName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.segments.join("."))
    }
}

impl Serialize for QualifiedName {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

pub type ScopeId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScopeKind {
    Module,
    Class,
    Function,
}

#[derive(Clone, Debug)]
pub struct Scope {
    pub kind: ScopeKind,
    /// Qualified path of the owning def/class; empty for the module.
    pub path: String,
    /// Byte range of the body statements.
    pub body: (usize, usize),
    pub parent: Option<ScopeId>,
    pub globals: BTreeSet<String>,
    pub nonlocals: BTreeSet<String>,
}

/// How a non-import, non-definition name got its value.
#[derive(Clone, Debug)]
pub enum LocalSource {
    Param,
    /// `name = <expr>` with a single plain-name target.
    Assigned(Box<Expr>),
    /// `for name in <expr>`.
    LoopTarget(Box<Expr>),
    Other,
}

#[derive(Clone, Debug)]
pub enum BindingKind {
    Import(QualifiedName),
    /// `def` or `class`; the name is the definition's own fully qualified name.
    Definition(QualifiedName),
    Local(LocalSource),
}

#[derive(Clone, Debug)]
pub struct Binding {
    pub scope: ScopeId,
    pub name: String,
    pub kind: BindingKind,
    /// Visible to uses at offsets `>= offset`.
    pub offset: usize,
    pub span: SourceSpan,
}

#[derive(Clone, Debug)]
pub struct Wildcard {
    pub scope: ScopeId,
    pub module: QualifiedName,
    pub offset: usize,
    pub span: SourceSpan,
}

/// Result of looking up a bare identifier.
#[derive(Debug)]
pub enum Lookup<'t> {
    Bound(&'t Binding),
    /// Assigned somewhere in the enclosing function, but not before this use.
    UnboundLocal,
    /// Not bound; wildcard imports visible at the use may provide it.
    Wildcard(Vec<&'t Wildcard>),
    Builtin(QualifiedName),
    Free,
}

#[derive(Debug)]
pub struct ImportTable {
    module_name: String,
    scopes: Vec<Scope>,
    bindings: BTreeMap<(ScopeId, String), Vec<Binding>>,
    wildcards: Vec<Wildcard>,
}

pub const BUILTINS: &[&str] = &[
    "abs", "all", "any", "ascii", "bin", "bool", "breakpoint", "bytearray", "bytes", "callable",
    "chr", "classmethod", "compile", "complex", "delattr", "dict", "dir", "divmod", "enumerate",
    "eval", "exec", "filter", "float", "format", "frozenset", "getattr", "globals", "hasattr",
    "hash", "help", "hex", "id", "input", "int", "isinstance", "issubclass", "iter", "len", "list",
    "locals", "map", "max", "memoryview", "min", "next", "object", "oct", "open", "ord", "pow",
    "print", "property", "range", "repr", "reversed", "round", "set", "setattr", "slice",
    "sorted", "staticmethod", "str", "sum", "super", "tuple", "type", "vars", "zip",
    "__import__", "None", "True", "False", "NotImplemented", "Ellipsis", "Exception",
    "BaseException", "ArithmeticError", "AssertionError", "AttributeError", "IndexError",
    "KeyError", "LookupError", "NameError", "NotImplementedError", "OSError", "RuntimeError",
    "StopIteration", "TypeError", "ValueError", "ZeroDivisionError", "IOError",
];

impl ImportTable {
    pub fn build(unit: &ModuleUnit) -> Self {
        let mut builder = TableBuilder {
            unit,
            table: ImportTable {
                module_name: unit.module_name.clone(),
                scopes: vec![Scope {
                    kind: ScopeKind::Module,
                    path: String::new(),
                    body: (0, unit.text().len()),
                    parent: None,
                    globals: BTreeSet::new(),
                    nonlocals: BTreeSet::new(),
                }],
                bindings: BTreeMap::new(),
                wildcards: Vec::new(),
            },
            current: 0,
            handled_names: BTreeSet::new(),
            is_package: unit.is_package,
        };
        walk::walk_scope(&unit.suite, &mut builder);
        let mut table = builder.table;
        for list in table.bindings.values_mut() {
            list.sort_by_key(|b| b.offset);
        }
        table
    }

    pub fn module_name(&self) -> &str {
        &self.module_name
    }

    pub fn scopes(&self) -> &[Scope] {
        &self.scopes
    }

    pub fn wildcards(&self) -> &[Wildcard] {
        &self.wildcards
    }

    /// All bindings, ordered by scope, name and position.
    pub fn bindings(&self) -> impl Iterator<Item = &Binding> {
        self.bindings.values().flatten()
    }

    /// Import bindings only: `(scope path, alias) -> target`.
    pub fn imports(&self) -> impl Iterator<Item = (&str, &str, &QualifiedName)> {
        self.bindings().filter_map(|b| match &b.kind {
            BindingKind::Import(qn) => Some((self.scopes[b.scope].path.as_str(), b.name.as_str(), qn)),
            _ => None,
        })
    }

    pub fn bindings_of(&self, scope: ScopeId, name: &str) -> &[Binding] {
        self.bindings
            .get(&(scope, name.to_string()))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Innermost scope whose body contains `offset`.
    pub fn scope_at(&self, offset: usize) -> ScopeId {
        let mut best = 0;
        let mut best_len = usize::MAX;
        for (id, scope) in self.scopes.iter().enumerate() {
            let (start, end) = scope.body;
            if start <= offset && offset < end.max(start + 1) && end - start < best_len {
                best = id;
                best_len = end - start;
            }
        }
        best
    }

    /// Scope owned by the def/class with the given qualified path.
    pub fn scope_by_path(&self, path: &str) -> Option<ScopeId> {
        self.scopes.iter().position(|s| s.path == path)
    }

    /// Scopes searched for a use at `offset`, innermost first. Class scopes
    /// are only searched when the use is directly in the class body.
    pub fn scope_chain(&self, offset: usize) -> Vec<ScopeId> {
        let start = self.scope_at(offset);
        let mut chain = vec![start];
        let mut current = self.scopes[start].parent;
        while let Some(id) = current {
            if self.scopes[id].kind != ScopeKind::Class {
                chain.push(id);
            }
            current = self.scopes[id].parent;
        }
        chain
    }

    pub fn lookup(&self, name: &str, at: usize) -> Lookup<'_> {
        let start = self.scope_at(at);
        let chain = if self.scopes[start].globals.contains(name) {
            vec![0]
        } else {
            self.scope_chain(at)
        };
        let mut crossed_function = false;
        for &id in &chain {
            let candidates = self.bindings_of(id, name);
            let visible = candidates
                .iter()
                .filter(|b| {
                    b.offset <= at
                        || (crossed_function && matches!(b.kind, BindingKind::Definition(_)))
                })
                .max_by_key(|b| b.offset);
            if let Some(binding) = visible {
                return Lookup::Bound(binding);
            }
            if self.scopes[id].kind == ScopeKind::Function && !candidates.is_empty() {
                return Lookup::UnboundLocal;
            }
            if self.scopes[id].kind == ScopeKind::Function {
                crossed_function = true;
            }
        }
        let wildcards: Vec<&Wildcard> = self
            .wildcards
            .iter()
            .filter(|w| chain.contains(&w.scope) && w.offset <= at)
            .collect();
        if !wildcards.is_empty() {
            return Lookup::Wildcard(wildcards);
        }
        if BUILTINS.contains(&name) {
            return Lookup::Builtin(QualifiedName::new(["builtins", name]).expect("non-empty"));
        }
        Lookup::Free
    }

    /// Resolves a bare identifier to a fully qualified name. Locals,
    /// parameters, and anything behind a wildcard import are unresolved.
    pub fn resolve_name(&self, name: &str, at: usize) -> Option<QualifiedName> {
        match self.lookup(name, at) {
            Lookup::Bound(binding) => match &binding.kind {
                BindingKind::Import(qn) | BindingKind::Definition(qn) => Some(qn.clone()),
                BindingKind::Local(_) => None,
            },
            Lookup::Builtin(qn) => Some(qn),
            Lookup::UnboundLocal | Lookup::Wildcard(_) | Lookup::Free => None,
        }
    }

    /// Resolves a dotted expression (`tf.function`, `layers.Dense`) by
    /// rewriting its leading alias through the binding visible at `at`.
    pub fn resolve_path(&self, expr: &Expr, at: usize) -> Option<QualifiedName> {
        let path = walk::dotted_path(expr)?;
        let head = self.resolve_name(path[0], at)?;
        Some(head.extended(path[1..].iter().copied()))
    }

    fn add(&mut self, binding: Binding) {
        self.bindings
            .entry((binding.scope, binding.name.clone()))
            .or_default()
            .push(binding);
    }
}

struct TableBuilder<'u> {
    unit: &'u ModuleUnit,
    table: ImportTable,
    current: ScopeId,
    /// Start offsets of name targets already recorded by their statement.
    handled_names: BTreeSet<usize>,
    is_package: bool,
}

impl TableBuilder<'_> {
    fn qualify(&self, name: &str) -> QualifiedName {
        let scope = &self.table.scopes[self.current];
        let mut path = self.table.module_name.clone();
        if !scope.path.is_empty() {
            path.push('.');
            path.push_str(&scope.path);
            if scope.kind == ScopeKind::Function {
                path.push_str(".<locals>");
            }
        }
        path.push('.');
        path.push_str(name);
        QualifiedName::parse(&path).unwrap_or_else(|| {
            QualifiedName::new([name]).expect("identifier is non-empty")
        })
    }

    fn child_path(&self, name: &str) -> String {
        let scope = &self.table.scopes[self.current];
        match scope.kind {
            ScopeKind::Module => name.to_string(),
            ScopeKind::Class => format!("{}.{name}", scope.path),
            ScopeKind::Function => format!("{}.<locals>.{name}", scope.path),
        }
    }

    fn bind(&mut self, name: &str, kind: BindingKind, offset: usize, span: SourceSpan) {
        let mut scope = self.current;
        if self.table.scopes[scope].globals.contains(name) {
            scope = 0;
        } else if self.table.scopes[scope].nonlocals.contains(name) {
            let mut parent = self.table.scopes[scope].parent;
            while let Some(p) = parent {
                if self.table.scopes[p].kind == ScopeKind::Function {
                    scope = p;
                    break;
                }
                parent = self.table.scopes[p].parent;
            }
        }
        self.table.add(Binding {
            scope,
            name: name.to_string(),
            kind,
            offset,
            span,
        });
    }

    fn bind_store_target(&mut self, target: &Expr, source: LocalSource, offset: usize) {
        if let Expr::Name(name) = target {
            self.handled_names.insert(usize::from(name.start()));
            let span = self.unit.span_of(name.range);
            self.bind(name.id.as_str(), BindingKind::Local(source), offset, span);
            return;
        }
        let span = self.unit.span_of(target.range());
        for name in walk::target_names(target) {
            self.bind(name, BindingKind::Local(LocalSource::Other), offset, span.clone());
        }
        self.mark_names(target);
    }

    fn mark_names(&mut self, target: &Expr) {
        struct Marker<'m>(&'m mut BTreeSet<usize>);
        impl<'a> ScopeVisitor<'a> for Marker<'_> {
            fn expr(&mut self, expr: &'a Expr) {
                if let Expr::Name(n) = expr {
                    self.0.insert(usize::from(n.start()));
                }
            }
        }
        walk::walk_expr(target, &mut Marker(&mut self.handled_names));
    }

    fn resolve_relative(&self, level: usize, module: Option<&str>) -> Option<QualifiedName> {
        let mut base: Vec<&str> = self.table.module_name.split('.').collect();
        if level > 0 {
            if !self.is_package {
                base.pop();
            }
            for _ in 1..level {
                base.pop()?;
            }
        } else {
            base.clear();
        }
        if let Some(module) = module {
            base.extend(module.split('.'));
        }
        QualifiedName::new(base)
    }

    fn enter_scope(&mut self, kind: ScopeKind, name: &str, body: &[Stmt], end: usize) -> ScopeId {
        let start = body.first().map(|s| usize::from(s.start())).unwrap_or(end);
        let path = self.child_path(name);
        let mut globals = BTreeSet::new();
        let mut nonlocals = BTreeSet::new();
        if kind == ScopeKind::Function {
            struct Decls<'d>(&'d mut BTreeSet<String>, &'d mut BTreeSet<String>);
            impl<'a> ScopeVisitor<'a> for Decls<'_> {
                fn stmt(&mut self, stmt: &'a Stmt) {
                    match stmt {
                        Stmt::Global(g) => self.0.extend(g.names.iter().map(|n| n.to_string())),
                        Stmt::Nonlocal(n) => self.1.extend(n.names.iter().map(|n| n.to_string())),
                        _ => {}
                    }
                }
            }
            walk::walk_scope(body, &mut Decls(&mut globals, &mut nonlocals));
        }
        self.table.scopes.push(Scope {
            kind,
            path,
            body: (start, end),
            parent: Some(self.current),
            globals,
            nonlocals,
        });
        self.table.scopes.len() - 1
    }

    fn function_scope(&mut self, stmt: &Stmt, name: &str, args: &ast::Arguments, body: &[Stmt]) {
        let qn = self.qualify(name);
        let span = self.unit.span_of(stmt.range());
        self.bind(name, BindingKind::Definition(qn), usize::from(stmt.start()), span);
        let end = usize::from(stmt.end());
        let scope = self.enter_scope(ScopeKind::Function, name, body, end);
        let saved = std::mem::replace(&mut self.current, scope);
        let body_start = self.table.scopes[scope].body.0;
        let params = args
            .posonlyargs
            .iter()
            .chain(&args.args)
            .chain(&args.kwonlyargs)
            .map(|a| &a.def)
            .chain(args.vararg.as_deref())
            .chain(args.kwarg.as_deref());
        for param in params {
            let span = self.unit.span_of(param.range);
            self.bind(param.arg.as_str(), BindingKind::Local(LocalSource::Param), body_start, span);
        }
        walk::walk_scope(body, self);
        self.current = saved;
    }
}

impl<'a> ScopeVisitor<'a> for TableBuilder<'_> {
    fn stmt(&mut self, stmt: &'a Stmt) {
        let end = usize::from(stmt.end());
        match stmt {
            Stmt::FunctionDef(def) => self.function_scope(stmt, def.name.as_str(), &def.args, &def.body),
            Stmt::AsyncFunctionDef(def) => {
                self.function_scope(stmt, def.name.as_str(), &def.args, &def.body)
            }
            Stmt::ClassDef(class) => {
                let qn = self.qualify(class.name.as_str());
                let span = self.unit.span_of(stmt.range());
                self.bind(class.name.as_str(), BindingKind::Definition(qn), usize::from(stmt.start()), span);
                let scope = self.enter_scope(ScopeKind::Class, class.name.as_str(), &class.body, end);
                let saved = std::mem::replace(&mut self.current, scope);
                walk::walk_scope(&class.body, self);
                self.current = saved;
            }
            Stmt::Import(import) => {
                for alias in &import.names {
                    let span = self.unit.span_of(alias.range);
                    let Some(full) = QualifiedName::parse(alias.name.as_str()) else {
                        continue;
                    };
                    match &alias.asname {
                        Some(asname) => self.bind(asname.as_str(), BindingKind::Import(full), end, span),
                        None => {
                            let head = full.prefix(1).expect("non-empty");
                            self.bind(head.last(), BindingKind::Import(head.clone()), end, span)
                        }
                    }
                }
            }
            Stmt::ImportFrom(import) => {
                let level = import.level.map(|l| l.to_u32() as usize).unwrap_or(0);
                let Some(module) = self.resolve_relative(level, import.module.as_deref()) else {
                    return;
                };
                for alias in &import.names {
                    let span = self.unit.span_of(alias.range);
                    if alias.name.as_str() == "*" {
                        self.table.wildcards.push(Wildcard {
                            scope: self.current,
                            module: module.clone(),
                            offset: end,
                            span,
                        });
                        continue;
                    }
                    let target = module.child(alias.name.as_str());
                    let local = alias.asname.as_ref().unwrap_or(&alias.name);
                    self.bind(local.as_str(), BindingKind::Import(target), end, span);
                }
            }
            Stmt::Assign(assign) => {
                for target in &assign.targets {
                    let source = if matches!(target, Expr::Name(_)) && assign.targets.len() == 1 {
                        LocalSource::Assigned(assign.value.clone())
                    } else {
                        LocalSource::Other
                    };
                    self.bind_store_target(target, source, end);
                }
            }
            Stmt::AnnAssign(assign) => {
                let source = match &assign.value {
                    Some(value) => LocalSource::Assigned(value.clone()),
                    None => LocalSource::Other,
                };
                if assign.value.is_some() {
                    self.bind_store_target(&assign.target, source, end);
                } else {
                    self.mark_names(&assign.target);
                }
            }
            Stmt::AugAssign(assign) => self.bind_store_target(&assign.target, LocalSource::Other, end),
            Stmt::For(for_) => {
                let offset = usize::from(for_.target.end());
                self.bind_store_target(&for_.target, LocalSource::LoopTarget(for_.iter.clone()), offset)
            }
            Stmt::AsyncFor(for_) => {
                let offset = usize::from(for_.target.end());
                self.bind_store_target(&for_.target, LocalSource::LoopTarget(for_.iter.clone()), offset)
            }
            Stmt::Try(try_) => self.bind_handlers(&try_.handlers),
            Stmt::TryStar(try_) => self.bind_handlers(&try_.handlers),
            _ => {}
        }
    }

    fn expr(&mut self, expr: &'a Expr) {
        if let Expr::Name(name) = expr {
            if name.ctx == ast::ExprContext::Store
                && self.handled_names.insert(usize::from(name.start()))
            {
                let span = self.unit.span_of(name.range);
                self.bind(
                    name.id.as_str(),
                    BindingKind::Local(LocalSource::Other),
                    usize::from(name.end()),
                    span,
                );
            }
        }
    }
}

impl TableBuilder<'_> {
    fn bind_handlers(&mut self, handlers: &[ast::ExceptHandler]) {
        for handler in handlers {
            let ast::ExceptHandler::ExceptHandler(h) = handler;
            if let Some(name) = &h.name {
                let span = self.unit.span_of(h.range);
                let offset = h.body.first().map(|s| usize::from(s.start())).unwrap_or(usize::from(h.end()));
                self.bind(name.as_str(), BindingKind::Local(LocalSource::Other), offset, span);
            }
        }
    }
}

/// The configured set of hybridization entry points.
#[derive(Clone, Debug)]
pub struct HybridApi {
    fqns: Vec<QualifiedName>,
}

impl Default for HybridApi {
    fn default() -> Self {
        Self {
            fqns: vec![QualifiedName::parse("tensorflow.function").expect("valid")],
        }
    }
}

impl HybridApi {
    pub fn with_extra(extra: impl IntoIterator<Item = QualifiedName>) -> Self {
        let mut api = Self::default();
        for qn in extra {
            if !api.fqns.contains(&qn) {
                api.fqns.push(qn);
            }
        }
        api
    }

    pub fn is_hybridization_api(&self, qn: &QualifiedName) -> bool {
        self.fqns.contains(qn)
    }

    /// The canonical API inserted by new decorators.
    pub fn canonical(&self) -> &QualifiedName {
        &self.fqns[0]
    }
}

pub fn is_hybridization_api(qn: &QualifiedName) -> bool {
    HybridApi::default().is_hybridization_api(qn)
}

/// All analyzed modules with their tables; resolves names across modules.
#[derive(Debug)]
pub struct Program {
    pub units: Vec<ModuleUnit>,
    pub tables: Vec<ImportTable>,
    by_module: HashMap<String, usize>,
}

impl Program {
    /// Units are ordered by path so that results do not depend on the order
    /// files were discovered in.
    pub fn new(mut units: Vec<ModuleUnit>) -> Self {
        units.sort_by(|a, b| a.file.path.cmp(&b.file.path));
        let tables = units.iter().map(ImportTable::build).collect();
        let by_module = units
            .iter()
            .enumerate()
            .map(|(i, u)| (u.module_name.clone(), i))
            .collect();
        Self {
            units,
            tables,
            by_module,
        }
    }

    pub fn module_index(&self, module: &str) -> Option<usize> {
        self.by_module.get(module).copied()
    }

    pub fn resolve_name(&self, unit: usize, name: &str, at: usize) -> Option<QualifiedName> {
        let table = &self.tables[unit];
        let qn = match table.lookup(name, at) {
            Lookup::Bound(binding) => match &binding.kind {
                BindingKind::Import(qn) | BindingKind::Definition(qn) => qn.clone(),
                BindingKind::Local(_) => return None,
            },
            Lookup::Builtin(qn) => qn,
            Lookup::Wildcard(wildcards) => self.resolve_through_wildcards(name, &wildcards)?,
            Lookup::UnboundLocal | Lookup::Free => return None,
        };
        Some(self.follow_reexport(&qn))
    }

    fn resolve_through_wildcards(&self, name: &str, wildcards: &[&Wildcard]) -> Option<QualifiedName> {
        for wildcard in wildcards.iter().rev() {
            let idx = self.module_index(&wildcard.module.to_string())?;
            if !self.tables[idx].bindings_of(0, name).is_empty() {
                return Some(wildcard.module.child(name));
            }
        }
        if BUILTINS.contains(&name) {
            return QualifiedName::new(["builtins", name]);
        }
        None
    }

    pub fn resolve_path(&self, unit: usize, expr: &Expr, at: usize) -> Option<QualifiedName> {
        let path = walk::dotted_path(expr)?;
        let head = self.resolve_name(unit, path[0], at)?;
        Some(self.follow_reexport(&head.extended(path[1..].iter().copied())))
    }

    /// Follows a name through one re-export: `pkg.a.foo`, where analyzed
    /// module `pkg.a` binds `foo` by import, becomes that import's target.
    pub fn follow_reexport(&self, qn: &QualifiedName) -> QualifiedName {
        for split in (1..qn.len()).rev() {
            let module = qn.segments()[..split].join(".");
            let Some(idx) = self.module_index(&module) else {
                continue;
            };
            let name = &qn.segments()[split];
            let latest = self.tables[idx].bindings_of(0, name).last();
            if let Some(Binding {
                kind: BindingKind::Import(target),
                ..
            }) = latest
            {
                return target.extended(qn.segments()[split + 1..].iter().map(String::as_str));
            }
            return qn.clone();
        }
        qn.clone()
    }
}
