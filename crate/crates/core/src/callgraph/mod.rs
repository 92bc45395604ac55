//! Closed-world call graph over the analyzed modules.
//!
//! Every syntactic call in an analyzed function (or in a module's top-level
//! code, which gets its own `<module>` node) ends up either as a [`CallSite`]
//! or as an [`UnresolvedCall`]. Calls are resolved through qualified names
//! (analyzed functions, analyzed classes, knowledge-base entries) and a
//! small set of object patterns: `self.method()` within the same class,
//! calls on objects that `__init__` built from knowledge-base constructors,
//! locals bound to such objects or to plain containers, and names bound to
//! a `tf.function(f)` wrapper.

pub mod kb;

use std::collections::{BTreeMap, HashMap, VecDeque};

use rustpython_parser::ast::{self, Expr, Ranged, Stmt};

use crate::frontend::walk::{self, ScopeVisitor};
use crate::frontend::{FunctionDecl, SourceSpan};
use crate::names::{BindingKind, HybridApi, LocalSource, Lookup, Program, QualifiedName};

pub use kb::{ApiKnowledgeBase, EffectClass, KbEntry, KbError, ReturnTemplate};

pub type NodeId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Function { unit: usize, decl: usize },
    /// Top-level code of a module, including class bodies.
    Module { unit: usize },
    /// Nodes of graphs assembled with [`CallGraph::from_parts`].
    Synthetic,
}

#[derive(Clone, Debug)]
pub struct Node {
    pub kind: NodeKind,
    pub fqn: QualifiedName,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Callee {
    Function(NodeId),
    Api {
        qn: QualifiedName,
        entry: usize,
        /// Calling an object the entry constructed, rather than the entry.
        instance_call: bool,
    },
    /// Construction of an analyzed class with no `__init__` and no bases.
    Class(QualifiedName),
}

#[derive(Clone, Debug)]
pub struct CallSite {
    pub caller: NodeId,
    pub callee: Callee,
    pub span: SourceSpan,
    pub unit: usize,
    pub call: Option<ast::ExprCall>,
    /// Call through a live `tf.function` wrapper binding.
    pub hybrid: bool,
    /// The callee's first parameter is bound implicitly (method call or
    /// construction), so positional arguments start at the second.
    pub receiver_bound: bool,
}

#[derive(Clone, Debug)]
pub struct UnresolvedCall {
    pub caller: NodeId,
    pub span: SourceSpan,
    pub reason: String,
}

/// `X = tf.function(F, ...)` where `F` is an analyzed function.
#[derive(Clone, Debug)]
pub struct Wrapping {
    pub wrapped: NodeId,
    pub binding: String,
    pub span: SourceSpan,
    pub unit: usize,
}

#[derive(Debug, Default)]
pub struct CallGraph {
    nodes: Vec<Node>,
    sites: Vec<CallSite>,
    unresolved: Vec<UnresolvedCall>,
    wrappings: Vec<Wrapping>,
    outgoing: Vec<Vec<usize>>,
    incoming: Vec<Vec<usize>>,
    unresolved_by: Vec<Vec<usize>>,
    by_fqn: HashMap<QualifiedName, NodeId>,
    by_decl: HashMap<(usize, usize), NodeId>,
    by_offset: HashMap<(usize, usize), usize>,
    module_nodes: HashMap<usize, NodeId>,
}

impl CallGraph {
    pub fn build(program: &Program, kb: &ApiKnowledgeBase, api: &HybridApi) -> Self {
        let mut graph = CallGraph::default();
        for (unit_idx, unit) in program.units.iter().enumerate() {
            let id = graph.push_node(Node {
                kind: NodeKind::Module { unit: unit_idx },
                fqn: module_fqn(&unit.module_name, "<module>"),
            });
            graph.module_nodes.insert(unit_idx, id);
            for (decl_idx, decl) in unit.functions().iter().enumerate() {
                let id = graph.push_node(Node {
                    kind: NodeKind::Function {
                        unit: unit_idx,
                        decl: decl_idx,
                    },
                    fqn: module_fqn(&unit.module_name, &decl.qualified_path),
                });
                graph.by_decl.insert((unit_idx, decl_idx), id);
            }
        }

        let mut resolver = Resolver {
            program,
            kb,
            api,
            graph: &graph,
            classes: HashMap::new(),
            attrs: HashMap::new(),
        };
        for (unit_idx, unit) in program.units.iter().enumerate() {
            for class in unit.classes() {
                let init = unit
                    .functions()
                    .iter()
                    .position(|f| f.qualified_path == format!("{}.__init__", class.qualified_path));
                resolver.classes.insert(
                    module_fqn(&unit.module_name, &class.qualified_path),
                    ClassInfo {
                        unit: unit_idx,
                        path: class.qualified_path.clone(),
                        init,
                        has_bases: class.has_bases,
                    },
                );
            }
        }
        let attrs = resolver.constructor_attributes();
        resolver.attrs = attrs;

        let mut sites = Vec::new();
        let mut unresolved = Vec::new();
        let mut wrappings = Vec::new();
        for (id, node) in graph.nodes.iter().enumerate() {
            let (unit, body): (usize, &[Stmt]) = match node.kind {
                NodeKind::Function { unit, decl } => (unit, &program.units[unit].functions()[decl].body),
                NodeKind::Module { unit } => (unit, &program.units[unit].suite),
                NodeKind::Synthetic => continue,
            };
            let mut collector = CallCollector {
                resolver: &resolver,
                unit,
                caller: id,
                sites: &mut sites,
                unresolved: &mut unresolved,
                wrappings: &mut wrappings,
            };
            walk::walk_scope(body, &mut collector);
        }
        drop(resolver);
        graph.sites = sites;
        graph.unresolved = unresolved;
        graph.wrappings = wrappings;
        graph.index();
        graph
    }

    /// A graph over synthetic nodes `n0..n{count}`: `edges` are caller/callee
    /// pairs and `unresolved` lists callers with one unresolved call each.
    pub fn from_parts(count: usize, edges: &[(NodeId, NodeId)], unresolved: &[NodeId]) -> Self {
        let mut graph = CallGraph::default();
        for i in 0..count {
            graph.push_node(Node {
                kind: NodeKind::Synthetic,
                fqn: QualifiedName::parse(&format!("n{i}")).expect("valid"),
            });
        }
        let span = |i: usize| SourceSpan {
            file: "<synthetic>".into(),
            start_line: i as u32 + 1,
            start_col: 0,
            end_line: i as u32 + 1,
            end_col: 1,
            start: i,
            end: i + 1,
        };
        graph.sites = edges
            .iter()
            .enumerate()
            .map(|(i, &(caller, callee))| CallSite {
                caller,
                callee: Callee::Function(callee),
                span: span(i),
                unit: 0,
                call: None,
                hybrid: false,
                receiver_bound: false,
            })
            .collect();
        graph.unresolved = unresolved
            .iter()
            .enumerate()
            .map(|(i, &caller)| UnresolvedCall {
                caller,
                span: span(edges.len() + i),
                reason: "synthetic".into(),
            })
            .collect();
        graph.index();
        graph
    }

    fn push_node(&mut self, node: Node) -> NodeId {
        self.by_fqn.insert(node.fqn.clone(), self.nodes.len());
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    fn index(&mut self) {
        let n = self.nodes.len();
        self.outgoing = vec![Vec::new(); n];
        self.incoming = vec![Vec::new(); n];
        self.unresolved_by = vec![Vec::new(); n];
        self.by_offset.clear();
        for (i, site) in self.sites.iter().enumerate() {
            self.by_offset.insert((site.unit, site.span.start), i);
            self.outgoing[site.caller].push(i);
            if let Callee::Function(callee) = site.callee {
                self.incoming[callee].push(i);
            }
        }
        for (i, call) in self.unresolved.iter().enumerate() {
            self.unresolved_by[call.caller].push(i);
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn sites(&self) -> &[CallSite] {
        &self.sites
    }

    /// The resolved call whose expression starts at `offset` in `unit`.
    pub fn site_at(&self, unit: usize, offset: usize) -> Option<&CallSite> {
        self.by_offset.get(&(unit, offset)).map(|&i| &self.sites[i])
    }

    pub fn unresolved(&self) -> &[UnresolvedCall] {
        &self.unresolved
    }

    pub fn wrappings(&self) -> &[Wrapping] {
        &self.wrappings
    }

    pub fn node_for_decl(&self, unit: usize, decl: usize) -> Option<NodeId> {
        self.by_decl.get(&(unit, decl)).copied()
    }

    pub fn node_by_fqn(&self, fqn: &QualifiedName) -> Option<NodeId> {
        self.by_fqn.get(fqn).copied()
    }

    pub fn module_node(&self, unit: usize) -> Option<NodeId> {
        self.module_nodes.get(&unit).copied()
    }

    pub fn decl<'p>(&self, program: &'p Program, id: NodeId) -> Option<&'p FunctionDecl> {
        match self.nodes[id].kind {
            NodeKind::Function { unit, decl } => Some(&program.units[unit].functions()[decl]),
            _ => None,
        }
    }

    pub fn sites_from(&self, id: NodeId) -> impl Iterator<Item = &CallSite> {
        self.outgoing[id].iter().map(|&i| &self.sites[i])
    }

    pub fn sites_to(&self, id: NodeId) -> impl Iterator<Item = &CallSite> {
        self.incoming[id].iter().map(|&i| &self.sites[i])
    }

    pub fn unresolved_from(&self, id: NodeId) -> impl Iterator<Item = &UnresolvedCall> {
        self.unresolved_by[id].iter().map(|&i| &self.unresolved[i])
    }

    /// Analyzed-function callees of `id`, deduplicated and ordered.
    pub fn callees(&self, id: NodeId) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = self
            .sites_from(id)
            .filter_map(|s| match s.callee {
                Callee::Function(c) => Some(c),
                _ => None,
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Nodes reachable from `id` through analyzed-function edges, including `id`.
    pub fn reachable(&self, id: NodeId) -> Vec<NodeId> {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([id]);
        seen[id] = true;
        let mut out = Vec::new();
        while let Some(n) = queue.pop_front() {
            out.push(n);
            for c in self.callees(n) {
                if !seen[c] {
                    seen[c] = true;
                    queue.push_back(c);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Shortest call chain from `from` to `to`, both included.
    pub fn path(&self, from: NodeId, to: NodeId) -> Option<Vec<NodeId>> {
        let mut parent: Vec<Option<NodeId>> = vec![None; self.nodes.len()];
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(n) = queue.pop_front() {
            if n == to {
                let mut chain = vec![n];
                let mut cur = n;
                while let Some(p) = parent[cur] {
                    chain.push(p);
                    cur = p;
                }
                chain.reverse();
                return Some(chain);
            }
            for c in self.callees(n) {
                if !seen[c] {
                    seen[c] = true;
                    parent[c] = Some(n);
                    queue.push_back(c);
                }
            }
        }
        None
    }

    pub fn in_recursive_cycle(&self, id: NodeId) -> bool {
        self.callees(id)
            .into_iter()
            .any(|c| c == id || self.reachable(c).contains(&id))
    }

    pub fn has_unresolved_callee(&self, id: NodeId, transitive: bool) -> bool {
        if transitive {
            self.reachable(id)
                .into_iter()
                .any(|n| !self.unresolved_by[n].is_empty())
        } else {
            !self.unresolved_by[id].is_empty()
        }
    }
}

fn module_fqn(module: &str, path: &str) -> QualifiedName {
    QualifiedName::parse(&format!("{module}.{path}"))
        .or_else(|| QualifiedName::parse(path))
        .unwrap_or_else(|| QualifiedName::new(["<anonymous>"]).expect("non-empty"))
}

#[derive(Clone, Debug)]
struct ClassInfo {
    unit: usize,
    path: String,
    init: Option<usize>,
    has_bases: bool,
}

/// What a local name or attribute refers to, as far as call resolution cares.
#[derive(Clone, Debug, PartialEq, Eq)]
enum Origin {
    /// An object built by one of these knowledge-base constructors.
    Kb(Vec<QualifiedName>),
    /// A list of objects built by these knowledge-base constructors.
    KbList(Vec<QualifiedName>),
    /// A builtin container (`list`, `dict`, `set`, `tuple`).
    Container(&'static str),
    /// An instance of an analyzed class.
    Instance(QualifiedName),
    /// The receiver of a method of an analyzed class.
    Receiver(QualifiedName),
    Function(NodeId),
    /// A `tf.function` wrapper around an analyzed function.
    Hybrid(NodeId),
}

const ORIGIN_DEPTH: usize = 4;

struct Resolver<'g> {
    program: &'g Program,
    kb: &'g ApiKnowledgeBase,
    api: &'g HybridApi,
    graph: &'g CallGraph,
    classes: HashMap<QualifiedName, ClassInfo>,
    /// Attributes `__init__` assigns on its receiver, per class.
    attrs: HashMap<QualifiedName, BTreeMap<String, Origin>>,
}

type Resolution = Result<(Callee, bool, bool), String>;

impl Resolver<'_> {
    fn constructor_attributes(&self) -> HashMap<QualifiedName, BTreeMap<String, Origin>> {
        let mut out = HashMap::new();
        for (class_fqn, info) in &self.classes {
            let Some(init) = info.init else { continue };
            let unit = &self.program.units[info.unit];
            let decl = &unit.functions()[init];
            let Some(receiver) = decl.receiver() else { continue };
            struct Assigns<'a>(Vec<&'a ast::StmtAssign>);
            impl<'a> ScopeVisitor<'a> for Assigns<'a> {
                fn stmt(&mut self, stmt: &'a Stmt) {
                    if let Stmt::Assign(a) = stmt {
                        self.0.push(a);
                    }
                }
            }
            let mut assigns = Assigns(Vec::new());
            walk::walk_scope(&decl.body, &mut assigns);
            let mut map: BTreeMap<String, Origin> = BTreeMap::new();
            for assign in assigns.0 {
                let [Expr::Attribute(target)] = assign.targets.as_slice() else { continue };
                if !matches!(target.value.as_ref(), Expr::Name(n) if n.id.as_str() == receiver) {
                    continue;
                }
                let origin = self.origin_of(info.unit, &assign.value, usize::from(assign.start()), 0);
                let attr = target.attr.to_string();
                match origin {
                    // An attribute assigned twice with different origins is unknown.
                    Some(o) if map.get(&attr).is_none_or(|prev| *prev == o) => {
                        map.insert(attr, o);
                    }
                    _ => {
                        map.remove(&attr);
                    }
                }
            }
            out.insert(class_fqn.clone(), map);
        }
        out
    }

    fn function_node(&self, qn: &QualifiedName) -> Option<NodeId> {
        let id = self.graph.node_by_fqn(qn)?;
        matches!(self.graph.node(id).kind, NodeKind::Function { .. }).then_some(id)
    }

    fn method(&self, class: &QualifiedName, name: &str) -> Option<NodeId> {
        self.function_node(&class.child(name))
    }

    fn origin_of(&self, unit: usize, expr: &Expr, at: usize, depth: usize) -> Option<Origin> {
        if depth > ORIGIN_DEPTH {
            return None;
        }
        match expr {
            Expr::Call(call) => {
                let qn = self.program.resolve_path(unit, &call.func, at)?;
                if self.api.is_hybridization_api(&qn) {
                    let target = call
                        .args
                        .first()
                        .or_else(|| call.keywords.iter().find(|k| k.arg.as_deref() == Some("func")).map(|k| &k.value))?;
                    let wrapped = self.program.resolve_path(unit, target, at)?;
                    return self.function_node(&wrapped).map(Origin::Hybrid);
                }
                if self.classes.contains_key(&qn) {
                    return Some(Origin::Instance(qn));
                }
                match qn.to_string().as_str() {
                    "builtins.list" => return Some(Origin::Container("list")),
                    "builtins.dict" => return Some(Origin::Container("dict")),
                    "builtins.set" => return Some(Origin::Container("set")),
                    _ => {}
                }
                self.kb.lookup(&qn).map(|_| Origin::Kb(vec![qn]))
            }
            Expr::List(list) => Some(self.list_origin(unit, &list.elts, at, depth).unwrap_or(Origin::Container("list"))),
            Expr::Tuple(tuple) => Some(self.list_origin(unit, &tuple.elts, at, depth).unwrap_or(Origin::Container("tuple"))),
            Expr::ListComp(comp) => Some(
                self.list_origin(unit, std::slice::from_ref(comp.elt.as_ref()), at, depth)
                    .unwrap_or(Origin::Container("list")),
            ),
            Expr::Dict(_) | Expr::DictComp(_) => Some(Origin::Container("dict")),
            Expr::Set(_) | Expr::SetComp(_) => Some(Origin::Container("set")),
            Expr::Name(name) => self.name_origin(unit, name.id.as_str(), at, depth),
            Expr::Attribute(attr) => {
                if let Some(qn) = self.program.resolve_path(unit, expr, at) {
                    return self.function_node(&qn).map(Origin::Function);
                }
                match self.origin_of(unit, &attr.value, at, depth + 1)? {
                    Origin::Receiver(class) | Origin::Instance(class) => {
                        if let Some(m) = self.method(&class, attr.attr.as_str()) {
                            return Some(Origin::Function(m));
                        }
                        self.attrs.get(&class)?.get(attr.attr.as_str()).cloned()
                    }
                    _ => None,
                }
            }
            _ => None,
        }
    }

    /// Elements that are all knowledge-base constructions make a `KbList`.
    fn list_origin(&self, unit: usize, elts: &[Expr], at: usize, depth: usize) -> Option<Origin> {
        if elts.is_empty() {
            return None;
        }
        let mut ctors = Vec::new();
        for elt in elts {
            match self.origin_of(unit, elt, at, depth + 1) {
                Some(Origin::Kb(qns)) => ctors.extend(qns),
                _ => return None,
            }
        }
        ctors.sort();
        ctors.dedup();
        Some(Origin::KbList(ctors))
    }

    fn name_origin(&self, unit: usize, name: &str, at: usize, depth: usize) -> Option<Origin> {
        let table = &self.program.tables[unit];
        match table.lookup(name, at) {
            Lookup::Bound(binding) => match &binding.kind {
                BindingKind::Import(_) | BindingKind::Definition(_) => {
                    let qn = self.program.resolve_name(unit, name, at)?;
                    if let Some(node) = self.function_node(&qn) {
                        return Some(Origin::Function(node));
                    }
                    None
                }
                BindingKind::Local(LocalSource::Assigned(value)) => {
                    self.origin_of(unit, value, binding.offset, depth + 1)
                }
                BindingKind::Local(LocalSource::LoopTarget(iter)) => {
                    match self.origin_of(unit, iter, binding.offset, depth + 1)? {
                        Origin::KbList(ctors) => Some(Origin::Kb(ctors)),
                        _ => None,
                    }
                }
                BindingKind::Local(LocalSource::Param) => {
                    let scope = &table.scopes()[binding.scope];
                    let decl = self.program.units[unit].function(&scope.path)?;
                    if decl.receiver() != Some(name) {
                        return None;
                    }
                    let class = decl.class_path.as_deref()?;
                    Some(Origin::Receiver(module_fqn(&self.program.units[unit].module_name, class)))
                }
                BindingKind::Local(LocalSource::Other) => None,
            },
            _ => None,
        }
    }

    fn resolve_qn(&self, qn: &QualifiedName) -> Resolution {
        if let Some(node) = self.function_node(qn) {
            return Ok((Callee::Function(node), false, false));
        }
        if let Some(info) = self.classes.get(qn) {
            if let Some(init) = info.init {
                let node = self
                    .graph
                    .node_for_decl(info.unit, init)
                    .expect("every declaration has a node");
                return Ok((Callee::Function(node), false, true));
            }
            if !info.has_bases {
                return Ok((Callee::Class(qn.clone()), false, false));
            }
            return Err(format!(
                "construction of `{}` runs an inherited initializer",
                info.path
            ));
        }
        self.api_callee(qn, false)
    }

    fn api_callee(&self, qn: &QualifiedName, instance_call: bool) -> Resolution {
        match self.kb.lookup_index(qn) {
            Some(entry) => Ok((
                Callee::Api {
                    qn: qn.clone(),
                    entry,
                    instance_call,
                },
                false,
                false,
            )),
            None => Err(format!("`{qn}` is neither analyzed nor in the knowledge base")),
        }
    }

    fn resolve_call(&self, unit: usize, call: &ast::ExprCall, at: usize) -> Resolution {
        if let Some(qn) = self.program.resolve_path(unit, &call.func, at) {
            return self.resolve_qn(&qn);
        }
        match call.func.as_ref() {
            Expr::Name(name) => {
                let origin = self
                    .name_origin(unit, name.id.as_str(), at, 0)
                    .ok_or_else(|| format!("`{}` is not bound to a known callable", name.id))?;
                self.call_origin(origin, None)
            }
            Expr::Attribute(attr) => {
                let origin = self
                    .origin_of(unit, &attr.value, at, 0)
                    .ok_or_else(|| format!("receiver of `.{}` has no known origin", attr.attr))?;
                self.call_origin(origin, Some(attr.attr.as_str()))
            }
            _ => Err("callee is not a name or attribute".to_string()),
        }
    }

    fn call_origin(&self, origin: Origin, method: Option<&str>) -> Resolution {
        match (origin, method) {
            (Origin::Function(node), None) => Ok((Callee::Function(node), false, false)),
            (Origin::Hybrid(node), None) => Ok((Callee::Function(node), true, false)),
            (Origin::Receiver(class) | Origin::Instance(class), None) => self
                .method(&class, "__call__")
                .map(|m| (Callee::Function(m), false, true))
                .ok_or_else(|| format!("`{class}` defines no `__call__`")),
            (Origin::Receiver(class) | Origin::Instance(class), Some(name)) => {
                if let Some(m) = self.method(&class, name) {
                    return Ok((Callee::Function(m), false, true));
                }
                match self.attrs.get(&class).and_then(|a| a.get(name)) {
                    Some(attr) => self.call_origin(attr.clone(), None),
                    None => Err(format!("`{class}` has no method or constructed attribute `{name}`")),
                }
            }
            (Origin::Kb(ctors), None) => {
                let layers = ctors.iter().all(|c| {
                    self.kb
                        .lookup(c)
                        .is_some_and(|e| e.returns == ReturnTemplate::Layer)
                });
                if layers {
                    self.api_callee(&ctors[0], true)
                } else {
                    Err("calling an object that is not a known layer".to_string())
                }
            }
            (Origin::Kb(ctors), Some(name)) if ctors.len() == 1 => self.api_callee(&ctors[0].child(name), false),
            (Origin::KbList(_), Some(name)) => self.api_callee(&builtin_method("list", name), false),
            (Origin::Container(kind), Some(name)) => self.api_callee(&builtin_method(kind, name), false),
            (_, Some(name)) => Err(format!("method `{name}` on an object of unknown type")),
            (_, None) => Err("callee object is not callable".to_string()),
        }
    }
}

fn builtin_method(kind: &str, name: &str) -> QualifiedName {
    QualifiedName::new(["builtins", kind, name]).expect("non-empty")
}

struct CallCollector<'r, 'g> {
    resolver: &'r Resolver<'g>,
    unit: usize,
    caller: NodeId,
    sites: &'r mut Vec<CallSite>,
    unresolved: &'r mut Vec<UnresolvedCall>,
    wrappings: &'r mut Vec<Wrapping>,
}

impl<'a> ScopeVisitor<'a> for CallCollector<'_, '_> {
    fn stmt(&mut self, stmt: &'a Stmt) {
        match stmt {
            // Class bodies execute as part of the enclosing code.
            Stmt::ClassDef(class) => walk::walk_scope(&class.body, self),
            Stmt::Assign(assign) => {
                let [Expr::Name(target)] = assign.targets.as_slice() else { return };
                let at = usize::from(assign.value.start());
                if let Some(Origin::Hybrid(wrapped)) = match assign.value.as_ref() {
                    call @ Expr::Call(_) => self.resolver.origin_of(self.unit, call, at, 0),
                    _ => None,
                } {
                    let unit = &self.resolver.program.units[self.unit];
                    self.wrappings.push(Wrapping {
                        wrapped,
                        binding: target.id.to_string(),
                        span: unit.span_of(assign.range),
                        unit: self.unit,
                    });
                }
            }
            _ => {}
        }
    }

    fn expr(&mut self, expr: &'a Expr) {
        let Expr::Call(call) = expr else { return };
        let unit = &self.resolver.program.units[self.unit];
        let span = unit.span_of(call.range);
        match self.resolver.resolve_call(self.unit, call, usize::from(call.start())) {
            Ok((callee, hybrid, receiver_bound)) => self.sites.push(CallSite {
                caller: self.caller,
                callee,
                span,
                unit: self.unit,
                call: Some(call.clone()),
                hybrid,
                receiver_bound,
            }),
            Err(reason) => self.unresolved.push(UnresolvedCall {
                caller: self.caller,
                span,
                reason,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{ModuleUnit, SourceFile};

    fn build(sources: &[(&str, &str)]) -> (Program, CallGraph) {
        let units = sources
            .iter()
            .map(|(name, text)| ModuleUnit::parse(SourceFile::new(format!("{name}.py"), *text), name).unwrap())
            .collect();
        let program = Program::new(units);
        let graph = CallGraph::build(&program, &ApiKnowledgeBase::builtin(), &HybridApi::default());
        (program, graph)
    }

    fn node(graph: &CallGraph, fqn: &str) -> NodeId {
        graph.node_by_fqn(&QualifiedName::parse(fqn).unwrap()).unwrap()
    }

    fn syntactic_calls(body: &[Stmt]) -> usize {
        struct Count(usize);
        impl<'a> ScopeVisitor<'a> for Count {
            fn stmt(&mut self, stmt: &'a Stmt) {
                if let Stmt::ClassDef(c) = stmt {
                    walk::walk_scope(&c.body, self);
                }
            }
            fn expr(&mut self, expr: &'a Expr) {
                if matches!(expr, Expr::Call(_)) {
                    self.0 += 1;
                }
            }
        }
        let mut c = Count(0);
        walk::walk_scope(body, &mut c);
        c.0
    }

    const LISTING: &str = include_str!("../../tests/fixtures/listing1/model.py");

    #[test]
    fn listing_layer_calls_resolve_to_kb() {
        let (_, g) = build(&[("model", LISTING)]);
        let call = node(&g, "model.SequentialModel.__call__");
        assert!(!g.has_unresolved_callee(call, true));
        let callees: Vec<String> = g
            .sites_from(call)
            .map(|s| match &s.callee {
                Callee::Api { qn, instance_call: true, .. } => qn.to_string(),
                other => panic!("unexpected callee {other:?}"),
            })
            .collect();
        assert_eq!(
            callees,
            [
                "tensorflow.keras.layers.Flatten",
                "tensorflow.keras.layers.Dense",
                "tensorflow.keras.layers.Dropout",
                "tensorflow.keras.layers.Dense",
            ]
        );
    }

    #[test]
    fn self_loop_and_mutual_recursion() {
        let (_, g) = build(&[("m", "def f():\n    f()\n\ndef a():\n    b()\n\ndef b():\n    a()\n\ndef h():\n    pass\n")]);
        let f = node(&g, "m.f");
        assert!(g.in_recursive_cycle(f));
        assert!(g.in_recursive_cycle(node(&g, "m.a")));
        assert!(g.in_recursive_cycle(node(&g, "m.b")));
        assert!(!g.in_recursive_cycle(node(&g, "m.h")));
    }

    #[test]
    fn unknown_import_is_unresolved() {
        let (_, g) = build(&[("m", "from elsewhere import g\ndef f():\n    g()\n")]);
        let f = node(&g, "m.f");
        assert!(g.has_unresolved_callee(f, false));
        assert!(g.unresolved_from(f).next().unwrap().reason.contains("elsewhere.g"));
    }

    #[test]
    fn transitive_unresolved() {
        let (_, g) = build(&[("m", "import x\ndef f():\n    g()\ndef g():\n    x.y()\n")]);
        let f = node(&g, "m.f");
        assert!(!g.has_unresolved_callee(f, false));
        assert!(g.has_unresolved_callee(f, true));
    }

    #[test]
    fn self_method_only_within_class() {
        let src = "class A:\n    def m(self):\n        return self.n()\n    def n(self):\n        return self.missing()\n";
        let (_, g) = build(&[("m", src)]);
        let m = node(&g, "m.A.m");
        let n = node(&g, "m.A.n");
        assert_eq!(g.callees(m), vec![n]);
        assert!(g.sites_from(m).next().unwrap().receiver_bound);
        assert!(g.has_unresolved_callee(n, false));
    }

    #[test]
    fn unknown_tensorflow_names_are_unresolved() {
        let (_, g) = build(&[("m", "import tensorflow as tf\ndef f(x):\n    return tf.experimental.numpy.foo(x)\n")]);
        assert!(g.has_unresolved_callee(node(&g, "m.f"), false));
    }

    #[test]
    fn cross_module_call() {
        let (_, g) = build(&[
            ("util", "def helper(x):\n    return x\n"),
            ("main", "import util\nfrom util import helper as h\ndef f(x):\n    util.helper(x)\n    return h(x)\n"),
        ]);
        let f = node(&g, "main.f");
        assert_eq!(g.sites_from(f).count(), 2);
        assert_eq!(g.callees(f), vec![node(&g, "util.helper")]);
    }

    #[test]
    fn typestate_wrapping_and_kill() {
        let src = "import tensorflow as tf\ndef f(x):\n    return x\ng = tf.function(f)\ng(1)\ng = f\ng(2)\n";
        let (_, g) = build(&[("m", src)]);
        let f = node(&g, "m.f");
        let hybrid: Vec<bool> = g.sites_to(f).map(|s| s.hybrid).collect();
        assert_eq!(hybrid, vec![true, false]);
        assert_eq!(g.wrappings().len(), 1);
        assert_eq!(g.wrappings()[0].binding, "g");
        assert_eq!(g.wrappings()[0].wrapped, f);
    }

    #[test]
    fn container_methods_resolve() {
        let src = "def f(x):\n    out = []\n    out.append(x)\n    d = {}\n    d.update(x)\n    return out\n";
        let (_, g) = build(&[("m", src)]);
        let f = node(&g, "m.f");
        assert!(!g.has_unresolved_callee(f, false));
        assert_eq!(g.sites_from(f).count(), 2);
    }

    #[test]
    fn construction_and_instance_calls() {
        let src = "class M:\n    def __init__(self):\n        self.k = 1\n    def __call__(self, x):\n        return x\n\ndef run(x):\n    model = M()\n    return model(x)\n";
        let (_, g) = build(&[("m", src)]);
        let run = node(&g, "m.run");
        assert_eq!(g.callees(run), vec![node(&g, "m.M.__init__"), node(&g, "m.M.__call__")]);
        assert!(g.sites_from(run).all(|s| s.receiver_bound));
    }

    #[test]
    fn totality_on_listing() {
        let (program, g) = build(&[("model", LISTING)]);
        for (id, n) in g.nodes().iter().enumerate() {
            let body = match n.kind {
                NodeKind::Function { unit, decl } => &program.units[unit].functions()[decl].body,
                NodeKind::Module { unit } => &program.units[unit].suite,
                NodeKind::Synthetic => continue,
            };
            let resolved = g.sites_from(id).count();
            let unresolved = g.unresolved_from(id).count();
            assert_eq!(resolved + unresolved, syntactic_calls(body), "node {}", n.fqn);
        }
    }

    #[test]
    fn order_independent() {
        let a = ("a", "import b\ndef f(x):\n    return b.g(x)\n");
        let b = ("b", "def g(x):\n    return print(x)\n");
        let (_, g1) = build(&[a, b]);
        let (_, g2) = build(&[b, a]);
        let summary = |g: &CallGraph| {
            g.sites()
                .iter()
                .map(|s| (g.node(s.caller).fqn.to_string(), format!("{:?}", s.callee), s.span.clone()))
                .collect::<Vec<_>>()
        };
        assert_eq!(summary(&g1), summary(&g2));
    }

    proptest::proptest! {
        /// Cycle membership matches brute-force path enumeration.
        #[test]
        fn cycle_detection_matches_paths(
            n in 1usize..8,
            raw in proptest::collection::vec((0usize..8, 0usize..8), 0..16),
        ) {
            let edges: Vec<(usize, usize)> = raw.into_iter().filter(|&(a, b)| a < n && b < n).collect();
            let g = CallGraph::from_parts(n, &edges, &[]);
            for start in 0..n {
                // A node is on a cycle iff some simple walk from it returns to it.
                let mut on_cycle = false;
                let mut stack = vec![(start, vec![start])];
                while let Some((cur, path)) = stack.pop() {
                    for &(a, b) in &edges {
                        if a != cur { continue; }
                        if b == start { on_cycle = true; }
                        if !path.contains(&b) {
                            let mut p = path.clone();
                            p.push(b);
                            stack.push((b, p));
                        }
                    }
                }
                proptest::prop_assert_eq!(g.in_recursive_cycle(start), on_cycle);
            }
        }
    }
}
