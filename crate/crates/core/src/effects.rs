//! Side-effect summaries.
//!
//! Local summaries come from a syntactic scan of one function body plus the
//! knowledge-base classes of its resolved API calls. Transitive summaries
//! close them over the call graph.

use std::collections::BTreeSet;

use rustpython_parser::ast::{self, Expr, ExprContext, Ranged, Stmt};
use serde::Serialize;

use crate::callgraph::{ApiKnowledgeBase, CallGraph, Callee, EffectClass, NodeId, NodeKind};
use crate::frontend::walk::{self, ScopeVisitor};
use crate::frontend::SourceSpan;
use crate::names::{BindingKind, ImportTable, LocalSource, Lookup, Program, QualifiedName, ScopeId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum EffectKind {
    GlobalWrite,
    NonlocalWrite,
    CapturedMutation,
    IO,
    PyRandomness,
    VariableCreation,
    GeneratorYield,
    UnknownCallee,
}

impl EffectKind {
    pub const ALL: [EffectKind; 8] = [
        EffectKind::GlobalWrite,
        EffectKind::NonlocalWrite,
        EffectKind::CapturedMutation,
        EffectKind::IO,
        EffectKind::PyRandomness,
        EffectKind::VariableCreation,
        EffectKind::GeneratorYield,
        EffectKind::UnknownCallee,
    ];
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Effect {
    pub kind: EffectKind,
    pub span: SourceSpan,
    /// Function whose body contains the effect.
    pub origin: NodeId,
    /// A write to the receiver inside `__init__`; not propagated to callers.
    pub constructor_self_write: bool,
    pub detail: String,
}

pub type EffectSummary = BTreeSet<Effect>;

/// A call to graph-compatible printing (`tf.print`), reported only.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphIo {
    pub span: SourceSpan,
    pub api: QualifiedName,
}

const MUTATORS: &[&str] = &[
    "append",
    "extend",
    "insert",
    "remove",
    "pop",
    "popitem",
    "clear",
    "update",
    "setdefault",
    "add",
    "discard",
    "sort",
    "reverse",
    "__setitem__",
    "__delitem__",
];

/// Effects visible in the node's own code, plus the informational graph-I/O calls.
pub fn local_effects(
    program: &Program,
    cg: &CallGraph,
    kb: &ApiKnowledgeBase,
    node: NodeId,
) -> (EffectSummary, Vec<GraphIo>) {
    let mut summary = EffectSummary::new();
    let mut graph_io = Vec::new();

    for site in cg.sites_from(node) {
        let Callee::Api { qn, entry, .. } = &site.callee else { continue };
        let entry = kb.entry(*entry);
        let kind = match entry.effect {
            EffectClass::PureTensor => continue,
            EffectClass::Io if qn.segments()[0] == "tensorflow" => {
                graph_io.push(GraphIo {
                    span: site.span.clone(),
                    api: qn.clone(),
                });
                continue;
            }
            EffectClass::Io => EffectKind::IO,
            EffectClass::Randomness => EffectKind::PyRandomness,
            EffectClass::VariableCreation => EffectKind::VariableCreation,
            EffectClass::Unknown => EffectKind::UnknownCallee,
        };
        summary.insert(Effect {
            kind,
            span: site.span.clone(),
            origin: node,
            constructor_self_write: false,
            detail: format!("call to {qn}"),
        });
    }

    let (unit, body, scope, receiver, is_init): (usize, &[Stmt], ScopeId, Option<&str>, bool) = match cg.node(node).kind {
        NodeKind::Function { unit, decl } => {
            let decl = &program.units[unit].functions()[decl];
            let scope = program.tables[unit]
                .scope_at(decl.body_span.start);
            (unit, &decl.body, scope, decl.receiver(), decl.name == "__init__" && decl.is_method)
        }
        NodeKind::Module { unit } => (unit, &program.units[unit].suite, 0, None, false),
        NodeKind::Synthetic => return (summary, graph_io),
    };
    let mut scan = Scan {
        program,
        table: &program.tables[unit],
        unit,
        scope,
        node,
        receiver,
        is_init,
        out: &mut summary,
    };
    walk::walk_scope(body, &mut scan);
    (summary, graph_io)
}

struct Scan<'p, 'o> {
    program: &'p Program,
    table: &'p ImportTable,
    unit: usize,
    scope: ScopeId,
    node: NodeId,
    receiver: Option<&'p str>,
    is_init: bool,
    out: &'o mut EffectSummary,
}

/// Who owns the object an attribute/subscript chain is rooted in.
enum Root {
    Local,
    Receiver,
    Captured(String),
}

impl Scan<'_, '_> {
    fn push(&mut self, kind: EffectKind, range: rustpython_parser::text_size::TextRange, detail: String, ctor: bool) {
        self.out.insert(Effect {
            kind,
            span: self.program.units[self.unit].span_of(range),
            origin: self.node,
            constructor_self_write: ctor,
            detail,
        });
    }

    fn classify(&self, expr: &Expr, at: usize, depth: usize) -> Root {
        let Some(name) = walk::root_name(expr) else {
            // Chains rooted in calls or literals are fresh objects.
            return Root::Local;
        };
        if self.scope != 0 && self.table.scopes()[self.scope].globals.contains(name) {
            return Root::Captured(name.to_string());
        }
        match self.table.lookup(name, at) {
            Lookup::Bound(binding) if binding.scope == self.scope && self.scope != 0 => match &binding.kind {
                BindingKind::Local(LocalSource::Param) if Some(name) == self.receiver => Root::Receiver,
                BindingKind::Local(LocalSource::Param) => Root::Captured(name.to_string()),
                // A local that copies a captured reference mutates what it refers to.
                BindingKind::Local(LocalSource::Assigned(value)) if depth < 4 => {
                    self.classify(value, binding.offset, depth + 1)
                }
                BindingKind::Local(LocalSource::LoopTarget(iter)) if depth < 4 => {
                    self.classify(iter, binding.offset, depth + 1)
                }
                _ => Root::Local,
            },
            // Module-level code owns its globals.
            Lookup::Bound(binding) if self.scope == 0 && binding.scope == 0 => match binding.kind {
                BindingKind::Import(_) => Root::Captured(name.to_string()),
                _ => Root::Local,
            },
            Lookup::UnboundLocal => Root::Local,
            _ => Root::Captured(name.to_string()),
        }
    }

    fn mutation(&mut self, target: &Expr, range: rustpython_parser::text_size::TextRange, what: &str) {
        let root_expr = match target {
            Expr::Attribute(a) => a.value.as_ref(),
            Expr::Subscript(s) => s.value.as_ref(),
            _ => target,
        };
        match self.classify(root_expr, usize::from(range.start()), 0) {
            Root::Local => {}
            Root::Receiver => {
                let recv = self.receiver.unwrap_or("self").to_string();
                self.push(EffectKind::CapturedMutation, range, format!("{what} on {recv}"), self.is_init)
            }
            Root::Captured(name) => self.push(EffectKind::CapturedMutation, range, format!("{what} on {name}"), false),
        }
    }
}

impl<'a> ScopeVisitor<'a> for Scan<'_, '_> {
    fn stmt(&mut self, stmt: &'a Stmt) {
        if let Stmt::AugAssign(aug) = stmt {
            if matches!(aug.target.as_ref(), Expr::Attribute(_) | Expr::Subscript(_)) {
                self.mutation(&aug.target, aug.range, "augmented assignment");
            }
        }
    }

    fn expr(&mut self, expr: &'a Expr) {
        match expr {
            Expr::Name(name) if matches!(name.ctx, ExprContext::Store | ExprContext::Del) && self.scope != 0 => {
                let scope = &self.table.scopes()[self.scope];
                if scope.globals.contains(name.id.as_str()) {
                    self.push(EffectKind::GlobalWrite, name.range, format!("write to global {}", name.id), false);
                } else if scope.nonlocals.contains(name.id.as_str()) {
                    self.push(EffectKind::NonlocalWrite, name.range, format!("write to nonlocal {}", name.id), false);
                }
            }
            Expr::Attribute(a) if matches!(a.ctx, ExprContext::Store | ExprContext::Del) => {
                self.mutation(expr, a.range, &format!("write to attribute {}", a.attr));
            }
            Expr::Subscript(s) if matches!(s.ctx, ExprContext::Store | ExprContext::Del) => {
                self.mutation(expr, s.range, "item assignment");
            }
            Expr::Call(call) => {
                let at = usize::from(call.start());
                if let Expr::Attribute(attr) = call.func.as_ref() {
                    if MUTATORS.contains(&attr.attr.as_str())
                        && self.program.resolve_path(self.unit, &call.func, at).is_none()
                    {
                        self.mutation(&call.func, call.range, &format!("call to {}", attr.attr));
                    }
                }
                let builtin = self.program.resolve_path(self.unit, &call.func, at);
                if let Some(qn) = builtin {
                    if matches!(qn.to_string().as_str(), "builtins.setattr" | "builtins.delattr") {
                        if let Some(obj) = call.args.first() {
                            let target = Expr::Attribute(ast::ExprAttribute {
                                range: obj.range(),
                                value: Box::new(obj.clone()),
                                attr: ast::Identifier::new("_"),
                                ctx: ExprContext::Store,
                            });
                            self.mutation(&target, call.range, &format!("call to {}", qn.last()));
                        }
                    }
                }
            }
            Expr::Yield(y) => self.push(EffectKind::GeneratorYield, y.range, "yield".into(), false),
            Expr::YieldFrom(y) => self.push(EffectKind::GeneratorYield, y.range, "yield from".into(), false),
            _ => {}
        }
    }
}

/// Result of closing local summaries over the call graph.
#[derive(Debug)]
pub struct TransitiveEffects {
    pub summaries: Vec<EffectSummary>,
    pub rounds: usize,
}

/// Least fixed point of `S(f) = L(f) ∪ U(f) ∪ ⋃ S(g)` over analyzed
/// callees `g`, where `U(f)` holds one `UnknownCallee` per unresolved call
/// and constructor self-writes of `g` are dropped on the way up.
pub fn transitive_effects(cg: &CallGraph, locals: &[EffectSummary]) -> TransitiveEffects {
    let n = cg.nodes().len();
    let base: Vec<EffectSummary> = (0..n)
        .map(|f| {
            let mut s = locals.get(f).cloned().unwrap_or_default();
            for call in cg.unresolved_from(f) {
                s.insert(Effect {
                    kind: EffectKind::UnknownCallee,
                    span: call.span.clone(),
                    origin: f,
                    constructor_self_write: false,
                    detail: call.reason.clone(),
                });
            }
            s
        })
        .collect();
    let callees: Vec<Vec<NodeId>> = (0..n).map(|f| cg.callees(f)).collect();
    let mut summaries = base.clone();
    let mut rounds = 0;
    loop {
        rounds += 1;
        let mut changed = false;
        for f in 0..n {
            let mut next = base[f].clone();
            for &g in &callees[f] {
                next.extend(summaries[g].iter().filter(|e| !e.constructor_self_write).cloned());
            }
            if next.len() != summaries[f].len() {
                summaries[f] = next;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    // Every productive round adds at least one effect to some summary; the
    // effects are drawn from the finite union of the base summaries.
    let bound = base.iter().map(BTreeSet::len).sum::<usize>().max(n * EffectKind::ALL.len()) + 1;
    assert!(rounds <= bound, "effect fixpoint did not converge within {bound} rounds");
    TransitiveEffects { summaries, rounds }
}

/// The call chain from `from` to the function an effect occurs in.
pub fn via_chain(cg: &CallGraph, from: NodeId, effect: &Effect) -> Vec<NodeId> {
    cg.path(from, effect.origin).unwrap_or_else(|| vec![from])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{ModuleUnit, SourceFile};
    use crate::names::HybridApi;
    use proptest::prelude::*;

    struct World {
        program: Program,
        cg: CallGraph,
        kb: ApiKnowledgeBase,
    }

    fn world(src: &str) -> World {
        let unit = ModuleUnit::parse(SourceFile::new("m.py", src), "m").unwrap();
        let program = Program::new(vec![unit]);
        let kb = ApiKnowledgeBase::builtin();
        let cg = CallGraph::build(&program, &kb, &HybridApi::default());
        World { program, cg, kb }
    }

    impl World {
        fn id(&self, fqn: &str) -> NodeId {
            self.cg.node_by_fqn(&QualifiedName::parse(fqn).unwrap()).unwrap()
        }

        fn local(&self, fqn: &str) -> Vec<EffectKind> {
            let (s, _) = local_effects(&self.program, &self.cg, &self.kb, self.id(fqn));
            s.into_iter().map(|e| e.kind).collect()
        }

        fn transitive(&self) -> Vec<EffectSummary> {
            let locals: Vec<EffectSummary> = (0..self.cg.nodes().len())
                .map(|n| local_effects(&self.program, &self.cg, &self.kb, n).0)
                .collect();
            transitive_effects(&self.cg, &locals).summaries
        }
    }

    #[test]
    fn print_is_io() {
        assert_eq!(world("def f(x):\n    print(x)\n").local("m.f"), vec![EffectKind::IO]);
    }

    #[test]
    fn pure_arithmetic_has_no_effects() {
        assert!(world("def f(x):\n    y = x + 1\n    return y\n").local("m.f").is_empty());
    }

    #[test]
    fn captured_list_append() {
        let w = world("class C:\n    def m(self, x):\n        self.cache.append(x)\n");
        assert_eq!(w.local("m.C.m"), vec![EffectKind::CapturedMutation]);
        let w = world("history = []\ndef f(x):\n    history.append(x)\n    return x\n");
        assert_eq!(w.local("m.f"), vec![EffectKind::CapturedMutation]);
    }

    #[test]
    fn local_mutation_is_not_an_effect() {
        let w = world("def f(x):\n    out = []\n    out.append(x)\n    d = {}\n    d['k'] = x\n    return out\n");
        assert!(w.local("m.f").is_empty());
    }

    #[test]
    fn alias_of_captured_is_mutation() {
        let w = world("class C:\n    def m(self, x):\n        c = self.cache\n        c.append(x)\n");
        assert_eq!(w.local("m.C.m"), vec![EffectKind::CapturedMutation]);
    }

    #[test]
    fn global_and_nonlocal_writes() {
        let w = world("n = 0\ndef f():\n    global n\n    n += 1\n");
        assert_eq!(w.local("m.f"), vec![EffectKind::GlobalWrite]);
        let w = world("def f():\n    n = 0\n    def g():\n        nonlocal n\n        n = 2\n    g()\n");
        assert_eq!(w.local("m.f.<locals>.g"), vec![EffectKind::NonlocalWrite]);
        let w = world("n = 0\ndef f():\n    global n\n    return n\n");
        assert!(w.local("m.f").is_empty());
    }

    #[test]
    fn randomness_variables_and_yield() {
        let w = world("import random\nimport tensorflow as tf\ndef f(x):\n    v = tf.Variable(x)\n    yield random.random()\n");
        assert_eq!(
            w.local("m.f"),
            vec![EffectKind::PyRandomness, EffectKind::VariableCreation, EffectKind::GeneratorYield]
        );
    }

    #[test]
    fn tf_print_is_informational() {
        let w = world("import tensorflow as tf\ndef f(x):\n    tf.print(x)\n    return x\n");
        let (s, io) = local_effects(&w.program, &w.cg, &w.kb, w.id("m.f"));
        assert!(s.is_empty());
        assert_eq!(io.len(), 1);
        assert_eq!(io[0].api.to_string(), "tensorflow.print");
    }

    #[test]
    fn transitive_global_write_via_callee() {
        let w = world("n = 0\ndef g():\n    global n\n    n = 1\ndef f():\n    g()\n");
        let t = w.transitive();
        let f = w.id("m.f");
        let effect = t[f].iter().next().unwrap();
        assert_eq!(effect.kind, EffectKind::GlobalWrite);
        assert_eq!(via_chain(&w.cg, f, effect), vec![f, w.id("m.g")]);
    }

    #[test]
    fn unresolved_callee_is_unknown() {
        let w = world("import mystery\ndef f(x):\n    return mystery.go(x)\n");
        let t = w.transitive();
        let kinds: Vec<_> = t[w.id("m.f")].iter().map(|e| e.kind).collect();
        assert_eq!(kinds, vec![EffectKind::UnknownCallee]);
    }

    #[test]
    fn constructor_self_writes_stay_local() {
        let src = "class M:\n    def __init__(self):\n        self.k = []\n    def __call__(self, x):\n        return x\n\ndef run(x):\n    model = M()\n    return model(x)\n";
        let w = world(src);
        let t = w.transitive();
        assert!(!t[w.id("m.M.__init__")].is_empty());
        assert!(t[w.id("m.run")].is_empty());
    }

    #[test]
    fn listing_call_is_pure() {
        let w = world(include_str!("../tests/fixtures/listing1/model.py"));
        let t = w.transitive();
        assert!(t[w.id("m.SequentialModel.__call__")].is_empty());
    }

    fn brute_force(n: usize, edges: &[(usize, usize)], base: &[EffectSummary]) -> Vec<EffectSummary> {
        (0..n)
            .map(|f| {
                let mut seen = vec![false; n];
                let mut stack = vec![f];
                seen[f] = true;
                let mut out = EffectSummary::new();
                while let Some(v) = stack.pop() {
                    out.extend(base[v].iter().cloned());
                    for &(a, b) in edges {
                        if a == v && !seen[b] {
                            seen[b] = true;
                            stack.push(b);
                        }
                    }
                }
                out
            })
            .collect()
    }

    fn effect(node: usize, kind: usize) -> Effect {
        Effect {
            kind: EffectKind::ALL[kind],
            span: SourceSpan {
                file: "<t>".into(),
                start_line: node as u32 + 1,
                start_col: kind as u32,
                end_line: node as u32 + 1,
                end_col: kind as u32 + 1,
                start: 0,
                end: 0,
            },
            origin: node,
            constructor_self_write: false,
            detail: String::new(),
        }
    }

    proptest! {
        /// Adding an edge never shrinks a summary.
        #[test]
        fn adding_edges_is_monotone(
            n in 1usize..7,
            raw in proptest::collection::vec((0usize..7, 0usize..7), 0..12),
            extra in (0usize..7, 0usize..7),
            kinds in proptest::collection::vec(proptest::collection::vec(0usize..7, 0..3), 7),
        ) {
            let edges: Vec<_> = raw.into_iter().filter(|&(a, b)| a < n && b < n).collect();
            let locals: Vec<EffectSummary> = (0..n)
                .map(|i| kinds[i].iter().map(|&k| effect(i, k)).collect())
                .collect();
            let before = transitive_effects(&CallGraph::from_parts(n, &edges, &[]), &locals).summaries;
            let mut more = edges.clone();
            if extra.0 < n && extra.1 < n {
                more.push(extra);
            }
            let after = transitive_effects(&CallGraph::from_parts(n, &more, &[]), &locals).summaries;
            for f in 0..n {
                prop_assert!(before[f].is_subset(&after[f]));
            }
            let oracle = brute_force(n, &more, &locals);
            prop_assert_eq!(after, oracle);
        }
    }
}
