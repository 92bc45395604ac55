//! Existing hybridization: decorator detection, decorator argument values,
//! and `X = tf.function(F)` wrappings.

use std::collections::{BTreeMap, BTreeSet};

use rustpython_parser::ast::{self, Constant, Expr, Ranged, Stmt};
use serde::Serialize;

use crate::callgraph::{CallGraph, NodeId, Wrapping};
use crate::frontend::walk::{self, ScopeVisitor};
use crate::frontend::{ModuleUnit, SourceSpan};
use crate::names::{HybridApi, Program, ScopeId, ScopeKind};

/// Keyword names of the hybridization API's positional parameters, in order.
pub const API_PARAMETERS: &[&str] = &[
    "func",
    "input_signature",
    "autograph",
    "jit_compile",
    "reduce_retracing",
    "experimental_implements",
    "experimental_autograph_options",
    "experimental_attributes",
    "experimental_relax_shapes",
    "experimental_compile",
    "experimental_follow_type_hints",
];

/// Key recorded for a `**mapping` argument, whose keywords are unknown.
pub const SPLAT_KEY: &str = "**";

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Literal {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    None,
}

impl Literal {
    pub fn from_expr(expr: &Expr) -> Option<Self> {
        match expr {
            Expr::Constant(c) => match &c.value {
                Constant::Bool(b) => Some(Literal::Bool(*b)),
                Constant::Int(i) => i.to_string().parse().ok().map(Literal::Int),
                Constant::Float(f) => Some(Literal::Float(*f)),
                Constant::Str(s) => Some(Literal::Str(s.clone())),
                Constant::None => Some(Literal::None),
                _ => None,
            },
            Expr::UnaryOp(op) if matches!(op.op, ast::UnaryOp::USub) => match Literal::from_expr(&op.operand)? {
                Literal::Int(i) => i.checked_neg().map(Literal::Int),
                Literal::Float(f) => Some(Literal::Float(-f)),
                _ => None,
            },
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ArgValue {
    Const(Literal),
    SignatureExpr(SourceSpan),
    UnknownValue,
}

pub type ArgEnv = BTreeMap<String, ArgValue>;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HybridizationStatus {
    NotHybrid,
    Decorated {
        span: SourceSpan,
        /// Position in the decorator list.
        index: usize,
        args: ArgEnv,
        /// Written as a call (`@tf.function(...)`) rather than bare.
        call_form: bool,
    },
    WrappedFirstClass {
        span: SourceSpan,
        binding: String,
    },
}

impl HybridizationStatus {
    pub fn is_hybrid(&self) -> bool {
        !matches!(self, HybridizationStatus::NotHybrid)
    }
}

/// Status of an analyzed function, plus warnings.
pub fn detect_status(
    program: &Program,
    cg: &CallGraph,
    api: &HybridApi,
    node: NodeId,
) -> (HybridizationStatus, Vec<String>) {
    let Some(decl) = cg.decl(program, node) else {
        return (HybridizationStatus::NotHybrid, Vec::new());
    };
    let unit_idx = unit_of(cg, node);
    let wrapping = cg.wrappings().iter().find(|w| w.wrapped == node);
    if let Some(index) = decorator_targets(program, unit_idx, api, decl).first().copied() {
        let dec_expr = &decl.decorators[index];
        let (args, call_form) = match &dec_expr.expr {
            Expr::Call(call) => (resolve_decorator_args(program, unit_idx, call), true),
            _ => (ArgEnv::new(), false),
        };
        let mut warnings = Vec::new();
        if let Some(w) = wrapping {
            warnings.push(format!(
                "also wrapped first-class as `{}` at line {}; the decorator is used for planning",
                w.binding, w.span.start_line
            ));
        }
        return (
            HybridizationStatus::Decorated {
                span: dec_expr.span.clone(),
                index,
                args,
                call_form,
            },
            warnings,
        );
    }
    match wrapping {
        Some(w) => (
            HybridizationStatus::WrappedFirstClass {
                span: w.span.clone(),
                binding: w.binding.clone(),
            },
            Vec::new(),
        ),
        None => (HybridizationStatus::NotHybrid, Vec::new()),
    }
}

fn unit_of(cg: &CallGraph, node: NodeId) -> usize {
    match cg.node(node).kind {
        crate::callgraph::NodeKind::Function { unit, .. } | crate::callgraph::NodeKind::Module { unit } => unit,
        crate::callgraph::NodeKind::Synthetic => 0,
    }
}

/// Indices of decorators that resolve to the hybridization API, bare or called.
pub fn decorator_targets(
    program: &Program,
    unit: usize,
    api: &HybridApi,
    decl: &crate::frontend::FunctionDecl,
) -> Vec<usize> {
    decl.decorators
        .iter()
        .enumerate()
        .filter_map(|(i, d)| {
            let target = match &d.expr {
                Expr::Call(call) => call.func.as_ref(),
                other => other,
            };
            let qn = program.resolve_path(unit, target, d.span.start)?;
            api.is_hybridization_api(&qn).then_some(i)
        })
        .collect()
}

/// Values of the arguments of a called hybridization decorator.
pub fn resolve_decorator_args(program: &Program, unit: usize, call: &ast::ExprCall) -> ArgEnv {
    let module = &program.units[unit];
    let mut env = ArgEnv::new();
    let at = usize::from(call.start());
    let value_of = |key: &str, expr: &Expr| -> ArgValue {
        if key == "input_signature" && Literal::from_expr(expr) != Some(Literal::None) {
            return ArgValue::SignatureExpr(module.span_of(expr.range()));
        }
        constant_value(program, unit, expr, at)
    };
    for (i, arg) in call.args.iter().enumerate() {
        if matches!(arg, Expr::Starred(_)) {
            env.insert(SPLAT_KEY.to_string(), ArgValue::UnknownValue);
            break;
        }
        let key = API_PARAMETERS.get(i).copied().unwrap_or("<extra>");
        let value = value_of(key, arg);
        env.insert(key.to_string(), value);
    }
    for kw in &call.keywords {
        match kw.arg.as_deref() {
            Some(key) => {
                let value = value_of(key, &kw.value);
                env.insert(key.to_string(), value);
            }
            None => {
                env.insert(SPLAT_KEY.to_string(), ArgValue::UnknownValue);
            }
        }
    }
    env
}

/// Constant value of `expr` evaluated at offset `at`, by constant
/// propagation over the statements of the enclosing scopes.
pub fn constant_value(program: &Program, unit: usize, expr: &Expr, at: usize) -> ArgValue {
    if let Some(lit) = Literal::from_expr(expr) {
        return ArgValue::Const(lit);
    }
    let Expr::Name(name) = expr else {
        return ArgValue::UnknownValue;
    };
    let table = &program.tables[unit];
    let module = &program.units[unit];
    let mut scope = table.scope_at(at);
    let mut point = Some(at);
    loop {
        let Some(body) = scope_body(module, table.scopes()[scope].kind, table.scopes()[scope].body.0) else {
            return ArgValue::UnknownValue;
        };
        let env = match point {
            Some(p) => env_before(body, p, Env::new()),
            None => interpret(body, Env::new()),
        };
        match env.get(name.id.as_str()) {
            Some(Val::Const(lit)) => return ArgValue::Const(lit.clone()),
            Some(Val::Nac) => return ArgValue::UnknownValue,
            None => {}
        }
        if assigned_names(body).contains(name.id.as_str()) {
            // Bound in this scope, but not on every path reaching the use.
            return ArgValue::UnknownValue;
        }
        let current = &table.scopes()[scope];
        let Some(mut parent) = current.parent else {
            return ArgValue::UnknownValue;
        };
        while table.scopes()[parent].kind == ScopeKind::Class {
            match table.scopes()[parent].parent {
                Some(p) => parent = p,
                None => return ArgValue::UnknownValue,
            }
        }
        // A function body runs after its enclosing scope has been set up;
        // a class body runs where the class statement is.
        point = match current.kind {
            ScopeKind::Function => None,
            _ => point.map(|_| scope_start(table, scope)),
        };
        scope = parent;
    }
}

fn scope_start(table: &crate::names::ImportTable, scope: ScopeId) -> usize {
    table.scopes()[scope].body.0
}

/// Statement list owning the scope whose body starts at `body_start`.
fn scope_body(module: &ModuleUnit, kind: ScopeKind, body_start: usize) -> Option<&[Stmt]> {
    if kind == ScopeKind::Module {
        return Some(&module.suite);
    }
    fn find(stmts: &[Stmt], start: usize) -> Option<&[Stmt]> {
        for stmt in stmts {
            let (body, nested): (Option<&[Stmt]>, Vec<&[Stmt]>) = match stmt {
                Stmt::FunctionDef(d) => (Some(&d.body), vec![&d.body]),
                Stmt::AsyncFunctionDef(d) => (Some(&d.body), vec![&d.body]),
                Stmt::ClassDef(c) => (Some(&c.body), vec![&c.body]),
                other => (None, walk::child_blocks(other)),
            };
            if let Some(body) = body {
                if body.first().map(|s| usize::from(s.start())) == Some(start) {
                    return Some(body);
                }
            }
            for block in nested {
                if let Some(found) = find(block, start) {
                    return Some(found);
                }
            }
        }
        None
    }
    find(&module.suite, body_start)
}

#[derive(Clone, Debug, PartialEq)]
enum Val {
    Const(Literal),
    /// Not a constant.
    Nac,
}

/// Abstract environment; a missing name is unbound on every path so far.
type Env = BTreeMap<String, Val>;

fn join(a: &Env, b: &Env) -> Env {
    let keys: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    keys.into_iter()
        .map(|k| {
            let v = match (a.get(k), b.get(k)) {
                (Some(x), Some(y)) if x == y => x.clone(),
                _ => Val::Nac,
            };
            (k.clone(), v)
        })
        .collect()
}

fn eval(expr: &Expr, env: &Env) -> Val {
    if let Some(lit) = Literal::from_expr(expr) {
        return Val::Const(lit);
    }
    match expr {
        Expr::Name(n) => env.get(n.id.as_str()).cloned().unwrap_or(Val::Nac),
        _ => Val::Nac,
    }
}

/// Names bound anywhere in the statements of this scope (not nested scopes).
fn assigned_names(stmts: &[Stmt]) -> BTreeSet<String> {
    struct Names(BTreeSet<String>);
    impl<'a> ScopeVisitor<'a> for Names {
        fn stmt(&mut self, stmt: &'a Stmt) {
            match stmt {
                Stmt::FunctionDef(d) => {
                    self.0.insert(d.name.to_string());
                }
                Stmt::AsyncFunctionDef(d) => {
                    self.0.insert(d.name.to_string());
                }
                Stmt::ClassDef(c) => {
                    self.0.insert(c.name.to_string());
                }
                Stmt::Import(i) => {
                    for a in &i.names {
                        let bound = a.asname.as_ref().unwrap_or(&a.name);
                        self.0.insert(bound.split('.').next().unwrap_or_default().to_string());
                    }
                }
                Stmt::ImportFrom(i) => {
                    for a in &i.names {
                        self.0.insert(a.asname.as_ref().unwrap_or(&a.name).to_string());
                    }
                }
                Stmt::Global(g) => self.0.extend(g.names.iter().map(|n| n.to_string())),
                Stmt::Nonlocal(g) => self.0.extend(g.names.iter().map(|n| n.to_string())),
                Stmt::Try(t) => {
                    for h in &t.handlers {
                        let ast::ExceptHandler::ExceptHandler(h) = h;
                        if let Some(n) = &h.name {
                            self.0.insert(n.to_string());
                        }
                    }
                }
                _ => {}
            }
        }
        fn expr(&mut self, expr: &'a Expr) {
            if let Expr::Name(n) = expr {
                if !matches!(n.ctx, ast::ExprContext::Load) {
                    self.0.insert(n.id.to_string());
                }
            }
        }
    }
    let mut names = Names(BTreeSet::new());
    walk::walk_scope(stmts, &mut names);
    names.0
}

fn contains_jump(stmts: &[Stmt]) -> bool {
    stmts.iter().any(|s| match s {
        Stmt::Break(_) | Stmt::Continue(_) => true,
        // Jumps inside nested loops belong to those loops.
        Stmt::For(_) | Stmt::AsyncFor(_) | Stmt::While(_) => false,
        other => walk::child_blocks(other).into_iter().any(contains_jump),
    })
}

fn make_nac(env: &mut Env, names: impl IntoIterator<Item = String>) {
    for n in names {
        env.insert(n, Val::Nac);
    }
}

fn transfer(stmt: &Stmt, mut env: Env) -> Env {
    // Walrus targets anywhere in the statement's own expressions.
    for e in walk::stmt_exprs(stmt) {
        make_nac(&mut env, assigned_names_in_expr(e));
    }
    match stmt {
        Stmt::Assign(a) => {
            let value = eval(&a.value, &env);
            for target in &a.targets {
                match target {
                    Expr::Name(n) => {
                        env.insert(n.id.to_string(), value.clone());
                    }
                    other => make_nac(&mut env, walk::target_names(other).into_iter().map(String::from)),
                }
            }
            env
        }
        Stmt::AnnAssign(a) => {
            if let (Some(value), Expr::Name(n)) = (&a.value, a.target.as_ref()) {
                let v = eval(value, &env);
                env.insert(n.id.to_string(), v);
            }
            env
        }
        Stmt::AugAssign(a) => {
            make_nac(&mut env, walk::target_names(&a.target).into_iter().map(String::from));
            env
        }
        Stmt::If(s) => {
            let then = interpret(&s.body, env.clone());
            let other = interpret(&s.orelse, env);
            join(&then, &other)
        }
        Stmt::For(s) => loop_transfer(Some(&s.target), &s.body, &s.orelse, env),
        Stmt::AsyncFor(s) => loop_transfer(Some(&s.target), &s.body, &s.orelse, env),
        Stmt::While(s) => loop_transfer(None, &s.body, &s.orelse, env),
        Stmt::With(s) => {
            for item in &s.items {
                if let Some(v) = &item.optional_vars {
                    make_nac(&mut env, walk::target_names(v).into_iter().map(String::from));
                }
            }
            interpret(&s.body, env)
        }
        Stmt::AsyncWith(s) => {
            for item in &s.items {
                if let Some(v) = &item.optional_vars {
                    make_nac(&mut env, walk::target_names(v).into_iter().map(String::from));
                }
            }
            interpret(&s.body, env)
        }
        // Exceptional control flow and pattern captures: give up on every
        // name the statement binds.
        Stmt::Try(_) | Stmt::TryStar(_) | Stmt::Match(_) => {
            make_nac(&mut env, assigned_names(std::slice::from_ref(stmt)));
            env
        }
        Stmt::Delete(d) => {
            for t in &d.targets {
                make_nac(&mut env, walk::target_names(t).into_iter().map(String::from));
            }
            env
        }
        other => {
            make_nac(&mut env, assigned_names(std::slice::from_ref(other)));
            env
        }
    }
}

fn assigned_names_in_expr(expr: &Expr) -> Vec<String> {
    struct Walrus(Vec<String>);
    impl<'a> ScopeVisitor<'a> for Walrus {
        fn expr(&mut self, expr: &'a Expr) {
            if let Expr::NamedExpr(n) = expr {
                self.0.extend(walk::target_names(&n.target).into_iter().map(String::from));
            }
        }
    }
    let mut w = Walrus(Vec::new());
    walk::walk_expr(expr, &mut w);
    w.0
}

fn loop_head(target: Option<&Expr>, body: &[Stmt], entry: Env) -> Env {
    let mut head = entry.clone();
    if contains_jump(body) {
        make_nac(&mut head, assigned_names(body));
    }
    // Each round can only turn a name into Nac, so this terminates.
    loop {
        let mut start = head.clone();
        if let Some(t) = target {
            make_nac(&mut start, walk::target_names(t).into_iter().map(String::from));
        }
        let out = interpret(body, start);
        let next = join(&head, &out);
        if next == head {
            return head;
        }
        head = next;
    }
}

fn loop_transfer(target: Option<&Expr>, body: &[Stmt], orelse: &[Stmt], entry: Env) -> Env {
    let head = loop_head(target, body, entry);
    interpret(orelse, head)
}

fn interpret(stmts: &[Stmt], env: Env) -> Env {
    stmts.iter().fold(env, |env, stmt| transfer(stmt, env))
}

/// Environment just before the statement that contains offset `at`,
/// descending into compound statements.
fn env_before(stmts: &[Stmt], at: usize, mut env: Env) -> Env {
    for stmt in stmts {
        let start = usize::from(stmt.start());
        let end = usize::from(stmt.end());
        if at < start {
            return env;
        }
        if at < end {
            return match stmt {
                Stmt::If(s) => {
                    if block_contains(&s.body, at) {
                        env_before(&s.body, at, env)
                    } else if block_contains(&s.orelse, at) {
                        env_before(&s.orelse, at, env)
                    } else {
                        env
                    }
                }
                Stmt::For(s) => in_loop(Some(&s.target), &s.body, &s.orelse, at, env),
                Stmt::AsyncFor(s) => in_loop(Some(&s.target), &s.body, &s.orelse, at, env),
                Stmt::While(s) => in_loop(None, &s.body, &s.orelse, at, env),
                Stmt::With(s) => env_before(&s.body, at, env),
                Stmt::AsyncWith(s) => env_before(&s.body, at, env),
                Stmt::Try(_) | Stmt::TryStar(_) | Stmt::Match(_) => {
                    make_nac(&mut env, assigned_names(std::slice::from_ref(stmt)));
                    env
                }
                _ => env,
            };
        }
        env = transfer(stmt, env);
    }
    env
}

fn block_contains(stmts: &[Stmt], at: usize) -> bool {
    match (stmts.first(), stmts.last()) {
        (Some(first), Some(last)) => usize::from(first.start()) <= at && at < usize::from(last.end()),
        _ => false,
    }
}

fn in_loop(target: Option<&Expr>, body: &[Stmt], orelse: &[Stmt], at: usize, env: Env) -> Env {
    let head = loop_head(target, body, env);
    if block_contains(body, at) {
        let mut start = head;
        if let Some(t) = target {
            make_nac(&mut start, walk::target_names(t).into_iter().map(String::from));
        }
        env_before(body, at, start)
    } else {
        env_before(orelse, at, head)
    }
}

/// First-class wrappings `X = tf.function(F)` recorded in one module.
pub fn typestate_scan(cg: &CallGraph, unit: usize) -> Vec<&Wrapping> {
    cg.wrappings().iter().filter(|w| w.unit == unit).collect()
}
