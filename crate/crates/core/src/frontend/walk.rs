//! Borrowing traversal helpers over the Python syntax tree.
//!
//! A "scope walk" visits every statement and expression that executes in
//! the scope that owns a statement list. Nested `def`/`class` bodies are a
//! different scope and are not entered, but their decorators, defaults,
//! annotations and base classes are, because those evaluate in the
//! enclosing scope. Lambdas and comprehensions are entered.

use rustpython_parser::ast::{self, Expr, Stmt};

pub trait ScopeVisitor<'a> {
    fn stmt(&mut self, _stmt: &'a Stmt) {}
    fn expr(&mut self, _expr: &'a Expr) {}
}

pub fn walk_scope<'a, V: ScopeVisitor<'a> + ?Sized>(body: &'a [Stmt], visitor: &mut V) {
    for stmt in body {
        walk_stmt(stmt, visitor);
    }
}

pub fn walk_stmt<'a, V: ScopeVisitor<'a> + ?Sized>(stmt: &'a Stmt, visitor: &mut V) {
    visitor.stmt(stmt);
    for expr in stmt_exprs(stmt) {
        walk_expr(expr, visitor);
    }
    for block in child_blocks(stmt) {
        walk_scope(block, visitor);
    }
}

pub fn walk_expr<'a, V: ScopeVisitor<'a> + ?Sized>(expr: &'a Expr, visitor: &mut V) {
    visitor.expr(expr);
    for child in expr_children(expr) {
        walk_expr(child, visitor);
    }
}

fn arguments_exprs(args: &ast::Arguments) -> Vec<&Expr> {
    let mut out = Vec::new();
    for arg in args
        .posonlyargs
        .iter()
        .chain(&args.args)
        .chain(&args.kwonlyargs)
    {
        if let Some(default) = &arg.default {
            out.push(default.as_ref());
        }
        if let Some(annotation) = &arg.def.annotation {
            out.push(annotation.as_ref());
        }
    }
    for arg in args.vararg.iter().chain(&args.kwarg) {
        if let Some(annotation) = &arg.annotation {
            out.push(annotation.as_ref());
        }
    }
    out
}

/// Expressions owned directly by `stmt`, excluding those inside nested blocks.
pub fn stmt_exprs(stmt: &Stmt) -> Vec<&Expr> {
    match stmt {
        Stmt::FunctionDef(def) => {
            let mut out: Vec<&Expr> = def.decorator_list.iter().collect();
            out.extend(arguments_exprs(&def.args));
            out.extend(def.returns.as_deref());
            out
        }
        Stmt::AsyncFunctionDef(def) => {
            let mut out: Vec<&Expr> = def.decorator_list.iter().collect();
            out.extend(arguments_exprs(&def.args));
            out.extend(def.returns.as_deref());
            out
        }
        Stmt::ClassDef(class) => {
            let mut out: Vec<&Expr> = class.decorator_list.iter().collect();
            out.extend(class.bases.iter());
            out.extend(class.keywords.iter().map(|k| &k.value));
            out
        }
        Stmt::Return(s) => s.value.as_deref().into_iter().collect(),
        Stmt::Delete(s) => s.targets.iter().collect(),
        Stmt::Assign(s) => {
            let mut out: Vec<&Expr> = s.targets.iter().collect();
            out.push(&s.value);
            out
        }
        Stmt::TypeAlias(s) => vec![&s.name, &s.value],
        Stmt::AugAssign(s) => vec![&s.target, &s.value],
        Stmt::AnnAssign(s) => {
            let mut out = vec![s.target.as_ref(), s.annotation.as_ref()];
            out.extend(s.value.as_deref());
            out
        }
        Stmt::For(s) => vec![&s.target, &s.iter],
        Stmt::AsyncFor(s) => vec![&s.target, &s.iter],
        Stmt::While(s) => vec![&s.test],
        Stmt::If(s) => vec![&s.test],
        Stmt::With(s) => with_items_exprs(&s.items),
        Stmt::AsyncWith(s) => with_items_exprs(&s.items),
        Stmt::Match(s) => {
            let mut out = vec![s.subject.as_ref()];
            out.extend(s.cases.iter().filter_map(|c| c.guard.as_deref()));
            out
        }
        Stmt::Raise(s) => s.exc.as_deref().into_iter().chain(s.cause.as_deref()).collect(),
        Stmt::Try(s) => handler_types(&s.handlers),
        Stmt::TryStar(s) => handler_types(&s.handlers),
        Stmt::Assert(s) => std::iter::once(s.test.as_ref()).chain(s.msg.as_deref()).collect(),
        Stmt::Expr(s) => vec![&s.value],
        Stmt::Import(_)
        | Stmt::ImportFrom(_)
        | Stmt::Global(_)
        | Stmt::Nonlocal(_)
        | Stmt::Pass(_)
        | Stmt::Break(_)
        | Stmt::Continue(_) => Vec::new(),
    }
}

fn with_items_exprs(items: &[ast::WithItem]) -> Vec<&Expr> {
    let mut out = Vec::new();
    for item in items {
        out.push(&item.context_expr);
        out.extend(item.optional_vars.as_deref());
    }
    out
}

fn handler_types(handlers: &[ast::ExceptHandler]) -> Vec<&Expr> {
    handlers
        .iter()
        .filter_map(|h| match h {
            ast::ExceptHandler::ExceptHandler(h) => h.type_.as_deref(),
        })
        .collect()
}

/// Statement blocks nested in `stmt` that belong to the same scope.
pub fn child_blocks(stmt: &Stmt) -> Vec<&[Stmt]> {
    match stmt {
        Stmt::For(s) => vec![&s.body, &s.orelse],
        Stmt::AsyncFor(s) => vec![&s.body, &s.orelse],
        Stmt::While(s) => vec![&s.body, &s.orelse],
        Stmt::If(s) => vec![&s.body, &s.orelse],
        Stmt::With(s) => vec![&s.body],
        Stmt::AsyncWith(s) => vec![&s.body],
        Stmt::Match(s) => s.cases.iter().map(|c| c.body.as_slice()).collect(),
        Stmt::Try(s) => try_blocks(&s.body, &s.handlers, &s.orelse, &s.finalbody),
        Stmt::TryStar(s) => try_blocks(&s.body, &s.handlers, &s.orelse, &s.finalbody),
        _ => Vec::new(),
    }
}

fn try_blocks<'a>(
    body: &'a [Stmt],
    handlers: &'a [ast::ExceptHandler],
    orelse: &'a [Stmt],
    finalbody: &'a [Stmt],
) -> Vec<&'a [Stmt]> {
    let mut out = vec![body];
    for handler in handlers {
        let ast::ExceptHandler::ExceptHandler(h) = handler;
        out.push(&h.body);
    }
    out.push(orelse);
    out.push(finalbody);
    out
}

pub fn expr_children(expr: &Expr) -> Vec<&Expr> {
    match expr {
        Expr::BoolOp(e) => e.values.iter().collect(),
        Expr::NamedExpr(e) => vec![&e.target, &e.value],
        Expr::BinOp(e) => vec![&e.left, &e.right],
        Expr::UnaryOp(e) => vec![&e.operand],
        Expr::Lambda(e) => {
            let mut out = arguments_exprs(&e.args);
            out.push(&e.body);
            out
        }
        Expr::IfExp(e) => vec![&e.test, &e.body, &e.orelse],
        Expr::Dict(e) => e.keys.iter().flatten().chain(&e.values).collect(),
        Expr::Set(e) => e.elts.iter().collect(),
        Expr::ListComp(e) => comprehension_exprs(std::iter::once(e.elt.as_ref()), &e.generators),
        Expr::SetComp(e) => comprehension_exprs(std::iter::once(e.elt.as_ref()), &e.generators),
        Expr::GeneratorExp(e) => {
            comprehension_exprs(std::iter::once(e.elt.as_ref()), &e.generators)
        }
        Expr::DictComp(e) => comprehension_exprs([e.key.as_ref(), e.value.as_ref()], &e.generators),
        Expr::Await(e) => vec![&e.value],
        Expr::Yield(e) => e.value.as_deref().into_iter().collect(),
        Expr::YieldFrom(e) => vec![&e.value],
        Expr::Compare(e) => std::iter::once(e.left.as_ref()).chain(&e.comparators).collect(),
        Expr::Call(e) => std::iter::once(e.func.as_ref())
            .chain(&e.args)
            .chain(e.keywords.iter().map(|k| &k.value))
            .collect(),
        Expr::FormattedValue(e) => std::iter::once(e.value.as_ref())
            .chain(e.format_spec.as_deref())
            .collect(),
        Expr::JoinedStr(e) => e.values.iter().collect(),
        Expr::Constant(_) | Expr::Name(_) => Vec::new(),
        Expr::Attribute(e) => vec![&e.value],
        Expr::Subscript(e) => vec![&e.value, &e.slice],
        Expr::Starred(e) => vec![&e.value],
        Expr::List(e) => e.elts.iter().collect(),
        Expr::Tuple(e) => e.elts.iter().collect(),
        Expr::Slice(e) => e
            .lower
            .as_deref()
            .into_iter()
            .chain(e.upper.as_deref())
            .chain(e.step.as_deref())
            .collect(),
    }
}

fn comprehension_exprs<'a>(
    heads: impl IntoIterator<Item = &'a Expr>,
    generators: &'a [ast::Comprehension],
) -> Vec<&'a Expr> {
    let mut out: Vec<&Expr> = heads.into_iter().collect();
    for generator in generators {
        out.push(&generator.target);
        out.push(&generator.iter);
        out.extend(generator.ifs.iter());
    }
    out
}

/// Names bound by an assignment target (`a`, `a, (b, *c)`), ignoring
/// attribute and subscript targets.
pub fn target_names(target: &Expr) -> Vec<&str> {
    let mut out = Vec::new();
    collect_target_names(target, &mut out);
    out
}

fn collect_target_names<'a>(target: &'a Expr, out: &mut Vec<&'a str>) {
    match target {
        Expr::Name(name) => out.push(name.id.as_str()),
        Expr::Tuple(t) => t.elts.iter().for_each(|e| collect_target_names(e, out)),
        Expr::List(l) => l.elts.iter().for_each(|e| collect_target_names(e, out)),
        Expr::Starred(s) => collect_target_names(&s.value, out),
        _ => {}
    }
}

/// Dotted path of a `Name` or chain of `Attribute`s rooted in a `Name`.
pub fn dotted_path(expr: &Expr) -> Option<Vec<&str>> {
    match expr {
        Expr::Name(name) => Some(vec![name.id.as_str()]),
        Expr::Attribute(attr) => {
            let mut path = dotted_path(&attr.value)?;
            path.push(attr.attr.as_str());
            Some(path)
        }
        _ => None,
    }
}

/// The root `Name` of an attribute/subscript/call chain such as `a.b[0].c`.
pub fn root_name(expr: &Expr) -> Option<&str> {
    match expr {
        Expr::Name(name) => Some(name.id.as_str()),
        Expr::Attribute(attr) => root_name(&attr.value),
        Expr::Subscript(sub) => root_name(&sub.value),
        _ => None,
    }
}

/// True when the statement list contains `yield`/`yield from` in its own scope.
pub fn contains_yield(body: &[Stmt]) -> bool {
    struct Finder(bool);
    impl<'a> ScopeVisitor<'a> for Finder {
        fn expr(&mut self, expr: &'a Expr) {
            if matches!(expr, Expr::Yield(_) | Expr::YieldFrom(_)) {
                self.0 = true;
            }
        }
    }
    let mut finder = Finder(false);
    walk_scope(body, &mut finder);
    finder.0
}
