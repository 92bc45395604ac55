//! Tensor facts for function parameters.
//!
//! A [`TypeFact`] is drawn from a small lattice whose top is `Unknown`.
//! Parameter facts combine the annotation (trusted when present), the
//! literal default, and the argument facts at every resolved call site.

use std::collections::BTreeSet;
use std::fmt;

use rustpython_parser::ast::{self, Constant, Expr, Ranged, UnaryOp};
use serde::Serialize;

use crate::callgraph::{ApiKnowledgeBase, CallGraph, CallSite, Callee, EffectClass, NodeId, ReturnTemplate};
use crate::frontend::walk::{self, ScopeVisitor};
use crate::frontend::{FunctionDecl, Param, ParamKind};
use crate::names::{BindingKind, LocalSource, Lookup, Program, QualifiedName};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveKind {
    Int,
    Float,
    Bool,
    Str,
    None,
}

impl PrimitiveKind {
    pub fn from_keyword(s: &str) -> Option<Self> {
        Some(match s {
            "int" => Self::Int,
            "float" => Self::Float,
            "bool" => Self::Bool,
            "str" => Self::Str,
            "none" => Self::None,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DType {
    Unknown,
    Float32,
    Float64,
    Int32,
    Int64,
    Bool,
    String,
}

impl DType {
    pub const ALL: [DType; 7] = [
        DType::Unknown,
        DType::Float32,
        DType::Float64,
        DType::Int32,
        DType::Int64,
        DType::Bool,
        DType::String,
    ];

    /// Parses a dtype name such as `float32` (the last segment of `tf.float32`).
    pub fn from_name(name: &str) -> Self {
        match name {
            "float32" => Self::Float32,
            "float64" | "double" => Self::Float64,
            "int32" => Self::Int32,
            "int64" => Self::Int64,
            "bool" => Self::Bool,
            "string" => Self::String,
            _ => Self::Unknown,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Unknown => "unknown",
            Self::Float32 => "float32",
            Self::Float64 => "float64",
            Self::Int32 => "int32",
            Self::Int64 => "int64",
            Self::Bool => "bool",
            Self::String => "string",
        }
    }

    pub fn join(self, other: Self) -> Self {
        if self == other {
            self
        } else {
            Self::Unknown
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Dim {
    Known(u64),
    Symbolic,
}

impl Dim {
    pub fn join(self, other: Self) -> Self {
        match (self, other) {
            (Dim::Known(a), Dim::Known(b)) if a == b => Dim::Known(a),
            _ => Dim::Symbolic,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeFact {
    UnknownRank,
    Rank(Vec<Dim>),
}

impl ShapeFact {
    pub fn join(&self, other: &Self) -> Self {
        match (self, other) {
            (ShapeFact::Rank(a), ShapeFact::Rank(b)) if a.len() == b.len() => {
                ShapeFact::Rank(a.iter().zip(b).map(|(x, y)| x.join(*y)).collect())
            }
            _ => ShapeFact::UnknownRank,
        }
    }

    /// `self` is at least as precise as `other`.
    pub fn leq(&self, other: &Self) -> bool {
        self.join(other) == *other
    }

    pub fn rank(&self) -> Option<usize> {
        match self {
            ShapeFact::Rank(dims) => Some(dims.len()),
            ShapeFact::UnknownRank => None,
        }
    }
}

impl fmt::Display for ShapeFact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShapeFact::UnknownRank => f.write_str("?"),
            ShapeFact::Rank(dims) => {
                f.write_str("[")?;
                for (i, d) in dims.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    match d {
                        Dim::Known(n) => write!(f, "{n}")?,
                        Dim::Symbolic => f.write_str("None")?,
                    }
                }
                f.write_str("]")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TypeFact {
    Tensor { dtype: DType, shape: ShapeFact },
    Primitive { primitive: PrimitiveKind },
    OtherObject { qn: Option<QualifiedName> },
    Unknown,
}

impl TypeFact {
    pub fn tensor(dtype: DType, shape: ShapeFact) -> Self {
        TypeFact::Tensor { dtype, shape }
    }

    pub fn unknown_tensor() -> Self {
        Self::tensor(DType::Unknown, ShapeFact::UnknownRank)
    }

    pub fn primitive(primitive: PrimitiveKind) -> Self {
        TypeFact::Primitive { primitive }
    }

    pub fn other(qn: Option<QualifiedName>) -> Self {
        TypeFact::OtherObject { qn }
    }

    pub fn join(&self, other: &Self) -> Self {
        use TypeFact::*;
        match (self, other) {
            (Tensor { dtype: d1, shape: s1 }, Tensor { dtype: d2, shape: s2 }) => Tensor {
                dtype: d1.join(*d2),
                shape: s1.join(s2),
            },
            (Primitive { primitive: a }, Primitive { primitive: b }) if a == b => self.clone(),
            (OtherObject { qn: a }, OtherObject { qn: b }) => OtherObject {
                qn: if a == b { a.clone() } else { None },
            },
            _ => Unknown,
        }
    }

    /// `self` is at least as precise as `other`.
    pub fn leq(&self, other: &Self) -> bool {
        self.join(other) == *other
    }

    pub fn is_tensor(&self) -> bool {
        matches!(self, TypeFact::Tensor { .. })
    }
}

impl fmt::Display for TypeFact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeFact::Tensor { dtype, shape } => write!(f, "Tensor({}, {shape})", dtype.name()),
            TypeFact::Primitive { primitive } => write!(f, "{primitive:?}"),
            TypeFact::OtherObject { qn: Some(qn) } => write!(f, "Object({qn})"),
            TypeFact::OtherObject { qn: None } => f.write_str("Object"),
            TypeFact::Unknown => f.write_str("Unknown"),
        }
    }
}

/// Join over an iterator; `None` when there is nothing to join.
pub fn join_all<'a>(facts: impl IntoIterator<Item = &'a TypeFact>) -> Option<TypeFact> {
    facts.into_iter().fold(None, |acc, f| match acc {
        None => Some(f.clone()),
        Some(a) => Some(a.join(f)),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorLikeness {
    Tensor,
    MaybeTensor,
    NotTensor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeVariability {
    Monomorphic,
    PolymorphicShapes,
    VaryingPrimitives,
    NoCallSites,
}

/// What the analysis concluded about one parameter.
#[derive(Clone, Debug, Serialize)]
pub struct ParamFact {
    pub name: String,
    pub fact: TypeFact,
    pub likeness: TensorLikeness,
    pub is_receiver: bool,
    /// Argument fact at each call site, in call-graph order.
    #[serde(skip)]
    pub site_facts: Vec<TypeFact>,
    /// Distinct literal values the parameter receives across call sites.
    pub literals: BTreeSet<String>,
    pub assumptions: Vec<String>,
    pub warnings: Vec<String>,
}

/// Maps an annotation to a fact. Only tensor and builtin scalar hints are
/// understood; other resolvable names become `OtherObject`.
pub fn type_from_hint(program: &Program, unit: usize, annotation: &Expr, at: usize) -> TypeFact {
    if let Expr::Constant(c) = annotation {
        if matches!(c.value, Constant::None) {
            return TypeFact::primitive(PrimitiveKind::None);
        }
        return TypeFact::Unknown;
    }
    let Some(qn) = program.resolve_path(unit, annotation, at) else {
        return TypeFact::Unknown;
    };
    match qn.to_string().as_str() {
        "tensorflow.Tensor" | "tensorflow.Variable" => TypeFact::unknown_tensor(),
        "builtins.int" => TypeFact::primitive(PrimitiveKind::Int),
        "builtins.float" => TypeFact::primitive(PrimitiveKind::Float),
        "builtins.bool" => TypeFact::primitive(PrimitiveKind::Bool),
        "builtins.str" => TypeFact::primitive(PrimitiveKind::Str),
        _ => TypeFact::other(Some(qn)),
    }
}

const FOLLOW_DEPTH: usize = 4;

/// Facts of argument expressions, evaluated in the caller's module.
pub struct ArgEvaluator<'a> {
    pub program: &'a Program,
    pub cg: &'a CallGraph,
    pub kb: &'a ApiKnowledgeBase,
}

impl<'a> ArgEvaluator<'a> {
    pub fn new(program: &'a Program, cg: &'a CallGraph, kb: &'a ApiKnowledgeBase) -> Self {
        Self { program, cg, kb }
    }

    pub fn fact(&self, unit: usize, expr: &Expr, at: usize) -> TypeFact {
        self.fact_at_depth(unit, expr, at, 0)
    }

    fn fact_at_depth(&self, unit: usize, expr: &Expr, at: usize, depth: usize) -> TypeFact {
        if depth > FOLLOW_DEPTH {
            return TypeFact::Unknown;
        }
        if let Some((kind, _)) = literal(expr) {
            return TypeFact::primitive(kind);
        }
        match expr {
            Expr::Call(call) => self.call_fact(unit, call),
            Expr::List(_) | Expr::ListComp(_) => builtin_object("list"),
            Expr::Tuple(_) => builtin_object("tuple"),
            Expr::Dict(_) | Expr::DictComp(_) => builtin_object("dict"),
            Expr::Set(_) | Expr::SetComp(_) => builtin_object("set"),
            Expr::Name(name) => {
                let table = &self.program.tables[unit];
                match table.lookup(name.id.as_str(), at) {
                    Lookup::Bound(binding) => match &binding.kind {
                        BindingKind::Local(LocalSource::Assigned(value)) => {
                            self.fact_at_depth(unit, value, binding.offset, depth + 1)
                        }
                        BindingKind::Local(LocalSource::Param) => {
                            let scope = &table.scopes()[binding.scope];
                            self.program.units[unit]
                                .function(&scope.path)
                                .and_then(|decl| decl.params.iter().find(|p| p.name == name.id.as_str()))
                                .and_then(|p| p.annotation.as_ref())
                                .map(|ann| type_from_hint(self.program, unit, ann, binding.offset))
                                .unwrap_or(TypeFact::Unknown)
                        }
                        BindingKind::Import(qn) | BindingKind::Definition(qn) => TypeFact::other(Some(qn.clone())),
                        BindingKind::Local(_) => TypeFact::Unknown,
                    },
                    _ => TypeFact::Unknown,
                }
            }
            _ => TypeFact::Unknown,
        }
    }

    fn call_fact(&self, unit: usize, call: &ast::ExprCall) -> TypeFact {
        let Some(site) = self.cg.site_at(unit, usize::from(call.start())) else {
            return TypeFact::Unknown;
        };
        match &site.callee {
            Callee::Api {
                qn,
                entry,
                instance_call,
            } => {
                let entry = self.kb.entry(*entry);
                if *instance_call {
                    return match entry.returns {
                        ReturnTemplate::Layer => TypeFact::unknown_tensor(),
                        _ => TypeFact::Unknown,
                    };
                }
                match &entry.returns {
                    ReturnTemplate::Tensor {
                        shape_arg,
                        value_arg,
                    } => TypeFact::tensor(
                        self.dtype_keyword(unit, call),
                        shape_from_args(call, *shape_arg, *value_arg),
                    ),
                    ReturnTemplate::Layer | ReturnTemplate::Object => TypeFact::other(Some(qn.clone())),
                    ReturnTemplate::Primitive(kind) => TypeFact::primitive(*kind),
                    ReturnTemplate::Unknown => TypeFact::Unknown,
                }
            }
            Callee::Class(qn) => TypeFact::other(Some(qn.clone())),
            Callee::Function(node) if site.receiver_bound => {
                // Construction through `__init__`: an instance of the class.
                let fqn = &self.cg.node(*node).fqn;
                if fqn.last() == "__init__" {
                    TypeFact::other(fqn.prefix(fqn.len() - 1))
                } else {
                    TypeFact::Unknown
                }
            }
            Callee::Function(_) => TypeFact::Unknown,
        }
    }

    fn dtype_keyword(&self, unit: usize, call: &ast::ExprCall) -> DType {
        let Some(kw) = call.keywords.iter().find(|k| k.arg.as_deref() == Some("dtype")) else {
            return DType::Unknown;
        };
        match &kw.value {
            Expr::Constant(ast::ExprConstant {
                value: Constant::Str(s),
                ..
            }) => DType::from_name(s),
            other => self
                .program
                .resolve_path(unit, other, usize::from(other.start()))
                .filter(|qn| qn.segments()[0] == "tensorflow")
                .map(|qn| DType::from_name(qn.last()))
                .unwrap_or(DType::Unknown),
        }
    }
}

fn builtin_object(kind: &str) -> TypeFact {
    TypeFact::other(QualifiedName::new(["builtins", kind]))
}

/// A literal constant and its canonical text, e.g. `(Int, "int:-1")`.
pub fn literal(expr: &Expr) -> Option<(PrimitiveKind, String)> {
    match expr {
        Expr::Constant(c) => match &c.value {
            Constant::Int(i) => Some((PrimitiveKind::Int, format!("int:{i}"))),
            Constant::Float(f) => Some((PrimitiveKind::Float, format!("float:{f:?}"))),
            Constant::Bool(b) => Some((PrimitiveKind::Bool, format!("bool:{b}"))),
            Constant::Str(s) => Some((PrimitiveKind::Str, format!("str:{s:?}"))),
            Constant::None => Some((PrimitiveKind::None, "none".to_string())),
            _ => None,
        },
        Expr::UnaryOp(op) if matches!(op.op, UnaryOp::USub) => match literal(&op.operand)? {
            (kind @ (PrimitiveKind::Int | PrimitiveKind::Float), text) => {
                let (tag, value) = text.split_once(':')?;
                Some((kind, format!("{tag}:-{value}")))
            }
            _ => None,
        },
        _ => None,
    }
}

fn shape_from_args(call: &ast::ExprCall, shape_arg: Option<usize>, value_arg: Option<usize>) -> ShapeFact {
    let arg = |index: Option<usize>, keyword: &str| {
        call.keywords
            .iter()
            .find(|k| k.arg.as_deref() == Some(keyword))
            .map(|k| &k.value)
            .or_else(|| index.and_then(|i| call.args.get(i)))
    };
    if shape_arg.is_some() {
        if let Some(shape) = arg(shape_arg, "shape") {
            return literal_shape(shape);
        }
    }
    if value_arg.is_some() {
        if let Some(value) = arg(value_arg, "value") {
            return value_shape(value).unwrap_or(ShapeFact::UnknownRank);
        }
    }
    ShapeFact::UnknownRank
}

/// `(2, 3)`, `[2, None]` or `4` as a shape.
fn literal_shape(expr: &Expr) -> ShapeFact {
    let dim = |e: &Expr| match e {
        Expr::Constant(ast::ExprConstant {
            value: Constant::Int(i),
            ..
        }) => i.to_string().parse().map(Dim::Known).unwrap_or(Dim::Symbolic),
        _ => Dim::Symbolic,
    };
    match expr {
        Expr::Tuple(t) => ShapeFact::Rank(t.elts.iter().map(dim).collect()),
        Expr::List(l) => ShapeFact::Rank(l.elts.iter().map(dim).collect()),
        Expr::Constant(ast::ExprConstant {
            value: Constant::Int(_),
            ..
        }) => ShapeFact::Rank(vec![dim(expr)]),
        _ => ShapeFact::UnknownRank,
    }
}

/// Shape of a rectangular nested list literal such as `[[1, 2], [3, 4]]`.
fn value_shape(expr: &Expr) -> Option<ShapeFact> {
    match expr {
        Expr::List(ast::ExprList { elts, .. }) | Expr::Tuple(ast::ExprTuple { elts, .. }) => {
            let mut inner: Option<ShapeFact> = None;
            for elt in elts {
                let shape = value_shape(elt)?;
                match &inner {
                    None => inner = Some(shape),
                    Some(prev) if *prev == shape => {}
                    Some(_) => return None,
                }
            }
            let mut dims = vec![Dim::Known(elts.len() as u64)];
            match inner {
                Some(ShapeFact::Rank(rest)) => dims.extend(rest),
                Some(ShapeFact::UnknownRank) => return None,
                None => {}
            }
            Some(ShapeFact::Rank(dims))
        }
        _ => literal(expr)
            .filter(|(k, _)| matches!(k, PrimitiveKind::Int | PrimitiveKind::Float | PrimitiveKind::Bool))
            .map(|_| ShapeFact::Rank(Vec::new())),
    }
}

/// Binds call arguments to parameters. `None` when the mapping is not
/// statically known (`*args`/`**kwargs` at the call site). Each parameter
/// gets the expression passed for it, or `None` when omitted.
pub fn bind_arguments<'c>(
    decl: &FunctionDecl,
    call: &'c ast::ExprCall,
    receiver_bound: bool,
) -> Option<Vec<Option<&'c Expr>>> {
    if call.args.iter().any(|a| matches!(a, Expr::Starred(_))) || call.keywords.iter().any(|k| k.arg.is_none()) {
        return None;
    }
    let mut bound: Vec<Option<&Expr>> = vec![None; decl.params.len()];
    let positional: Vec<usize> = decl
        .params
        .iter()
        .enumerate()
        .filter(|(_, p)| matches!(p.kind, ParamKind::PositionalOnly | ParamKind::Positional))
        .map(|(i, _)| i)
        .skip(usize::from(receiver_bound))
        .collect();
    for (i, arg) in call.args.iter().enumerate() {
        if let Some(&slot) = positional.get(i) {
            bound[slot] = Some(arg);
        }
    }
    for kw in &call.keywords {
        let name = kw.arg.as_deref()?;
        if let Some(slot) = decl
            .params
            .iter()
            .position(|p| p.name == name && !matches!(p.kind, ParamKind::PositionalOnly))
        {
            bound[slot] = Some(&kw.value);
        }
    }
    Some(bound)
}

/// Parameter facts for an analyzed function.
pub fn infer_param_facts(
    program: &Program,
    cg: &CallGraph,
    kb: &ApiKnowledgeBase,
    node: NodeId,
    speculative: bool,
) -> Vec<ParamFact> {
    let Some(decl) = cg.decl(program, node) else {
        return Vec::new();
    };
    let unit = unit_of(cg, node);
    let eval = ArgEvaluator::new(program, cg, kb);
    let def_at = decl.span.start;
    let sites: Vec<&CallSite> = cg.sites_to(node).collect();
    let bindings: Vec<Option<Vec<Option<&Expr>>>> = sites
        .iter()
        .map(|s| s.call.as_ref().and_then(|c| bind_arguments(decl, c, s.receiver_bound)))
        .collect();
    let receiver = decl.receiver();
    let flows = if speculative {
        tensor_flows(program, cg, kb, unit, decl)
    } else {
        Vec::new()
    };

    decl.params
        .iter()
        .enumerate()
        .map(|(idx, param)| {
            if receiver == Some(param.name.as_str()) && idx == 0 {
                let class = decl
                    .class_path
                    .as_ref()
                    .and_then(|c| QualifiedName::parse(&format!("{}.{c}", program.units[unit].module_name)));
                return ParamFact {
                    name: param.name.clone(),
                    fact: TypeFact::other(class),
                    likeness: TensorLikeness::NotTensor,
                    is_receiver: true,
                    site_facts: Vec::new(),
                    literals: BTreeSet::new(),
                    assumptions: Vec::new(),
                    warnings: Vec::new(),
                };
            }
            let default_fact = param.default.as_ref().map(|d| eval.fact(unit, d, def_at));
            let mut site_facts = Vec::new();
            let mut literals = BTreeSet::new();
            for (site, binding) in sites.iter().zip(&bindings) {
                let (fact, lit) = site_argument(&eval, site, binding.as_ref(), idx, param, unit, def_at);
                site_facts.push(fact);
                literals.extend(lit);
            }
            let evidence = join_all(site_facts.iter().chain(default_fact.as_ref()));
            let hint = param
                .annotation
                .as_ref()
                .map(|ann| type_from_hint(program, unit, ann, def_at));
            let mut warnings = Vec::new();
            let fact = match (hint, evidence) {
                (Some(hint), Some(evidence)) => {
                    if hint.is_tensor() && evidence.is_tensor() {
                        evidence
                    } else {
                        let conflict = match (&hint, &evidence) {
                            (_, TypeFact::Unknown) | (TypeFact::Unknown, _) => false,
                            (h, e) => h.is_tensor() != e.is_tensor() || !e.leq(h) && !h.leq(e),
                        };
                        if conflict {
                            warnings.push(format!(
                                "parameter {} is annotated {hint} but call sites pass {evidence}; the annotation is kept",
                                param.name
                            ));
                        }
                        hint
                    }
                }
                (Some(hint), None) => hint,
                (None, Some(evidence)) => evidence,
                (None, None) => TypeFact::Unknown,
            };
            let mut assumptions = Vec::new();
            let likeness = if fact.is_tensor() {
                TensorLikeness::Tensor
            } else if let (TypeFact::Unknown, Some((_, api))) =
                (&fact, flows.iter().find(|(p, _)| *p == param.name))
            {
                assumptions.push(format!(
                    "parameter {} assumed Tensor because it flows into {api}",
                    param.name
                ));
                TensorLikeness::MaybeTensor
            } else {
                TensorLikeness::NotTensor
            };
            ParamFact {
                name: param.name.clone(),
                fact,
                likeness,
                is_receiver: false,
                site_facts,
                literals,
                assumptions,
                warnings,
            }
        })
        .collect()
}

fn unit_of(cg: &CallGraph, node: NodeId) -> usize {
    match cg.node(node).kind {
        crate::callgraph::NodeKind::Function { unit, .. } | crate::callgraph::NodeKind::Module { unit } => unit,
        crate::callgraph::NodeKind::Synthetic => 0,
    }
}

/// Fact and literal text of the argument a call site passes for one
/// parameter, falling back to the default when omitted.
fn site_argument(
    eval: &ArgEvaluator<'_>,
    site: &CallSite,
    binding: Option<&Vec<Option<&Expr>>>,
    idx: usize,
    param: &Param,
    callee_unit: usize,
    def_at: usize,
) -> (TypeFact, Option<String>) {
    if matches!(param.kind, ParamKind::VarPositional) {
        return (builtin_object("tuple"), None);
    }
    if matches!(param.kind, ParamKind::VarKeyword) {
        return (builtin_object("dict"), None);
    }
    let Some(binding) = binding else {
        return (TypeFact::Unknown, None);
    };
    match binding[idx] {
        Some(arg) => {
            let at = usize::from(arg.start());
            let fact = eval.fact(site.unit, arg, at);
            (fact, literal_through_locals(eval.program, site.unit, arg, at))
        }
        None => match &param.default {
            Some(default) => (
                eval.fact(callee_unit, default, def_at),
                literal(default).map(|(_, text)| text),
            ),
            None => (TypeFact::Unknown, None),
        },
    }
}

/// The literal an argument evaluates to, following plain local assignments.
fn literal_through_locals(program: &Program, unit: usize, expr: &Expr, at: usize) -> Option<String> {
    let mut current = expr;
    let mut at = at;
    for _ in 0..=FOLLOW_DEPTH {
        if let Some((_, text)) = literal(current) {
            return Some(text);
        }
        let Expr::Name(name) = current else { return None };
        let Lookup::Bound(binding) = program.tables[unit].lookup(name.id.as_str(), at) else {
            return None;
        };
        let BindingKind::Local(LocalSource::Assigned(value)) = &binding.kind else {
            return None;
        };
        current = value;
        at = binding.offset;
    }
    None
}

/// `(parameter, api)` pairs: the parameter, or a plain local alias of it,
/// is an argument of a tensor-consuming knowledge-base call. First
/// occurrence per parameter in source order.
fn tensor_flows(
    program: &Program,
    cg: &CallGraph,
    kb: &ApiKnowledgeBase,
    unit: usize,
    decl: &FunctionDecl,
) -> Vec<(String, QualifiedName)> {
    struct Calls<'a>(Vec<&'a ast::ExprCall>);
    impl<'a> ScopeVisitor<'a> for Calls<'a> {
        fn expr(&mut self, expr: &'a Expr) {
            if let Expr::Call(c) = expr {
                self.0.push(c);
            }
        }
    }
    let mut calls = Calls(Vec::new());
    walk::walk_scope(&decl.body, &mut calls);
    calls.0.sort_by_key(|c| c.start());

    let mut out: Vec<(String, QualifiedName)> = Vec::new();
    for call in calls.0 {
        let Some(site) = cg.site_at(unit, usize::from(call.start())) else { continue };
        let Callee::Api {
            qn,
            entry,
            instance_call,
        } = &site.callee
        else {
            continue;
        };
        let entry = kb.entry(*entry);
        let consumes = entry.effect == EffectClass::PureTensor
            && match &entry.returns {
                ReturnTemplate::Layer => *instance_call,
                ReturnTemplate::Tensor { .. } => !*instance_call,
                _ => false,
            };
        if !consumes {
            continue;
        }
        let args = call.args.iter().chain(call.keywords.iter().map(|k| &k.value));
        for arg in args {
            if let Some(param) = param_alias(program, unit, decl, arg) {
                if !out.iter().any(|(p, _)| *p == param) {
                    out.push((param, qn.clone()));
                }
            }
        }
    }
    out
}

/// The parameter an expression names directly or through `a = b` copies.
fn param_alias(program: &Program, unit: usize, decl: &FunctionDecl, expr: &Expr) -> Option<String> {
    let mut current = expr;
    let mut at = usize::from(expr.start());
    for _ in 0..=FOLLOW_DEPTH {
        let Expr::Name(name) = current else { return None };
        let Lookup::Bound(binding) = program.tables[unit].lookup(name.id.as_str(), at) else {
            return None;
        };
        match &binding.kind {
            BindingKind::Local(LocalSource::Param)
                if program.tables[unit].scopes()[binding.scope].path == decl.qualified_path =>
            {
                return Some(name.id.to_string());
            }
            BindingKind::Local(LocalSource::Assigned(value)) => {
                current = value;
                at = binding.offset;
            }
            _ => return None,
        }
    }
    None
}

pub fn shape_variability(params: &[ParamFact], site_count: usize) -> ShapeVariability {
    if site_count == 0 {
        return ShapeVariability::NoCallSites;
    }
    if params.iter().any(|p| p.literals.len() >= 2) {
        return ShapeVariability::VaryingPrimitives;
    }
    let polymorphic = params.iter().any(|p| {
        let shapes: Vec<&ShapeFact> = p
            .site_facts
            .iter()
            .filter_map(|f| match f {
                TypeFact::Tensor { shape, .. } => Some(shape),
                _ => None,
            })
            .collect();
        if shapes.len() < 2 {
            return false;
        }
        let joined = shapes[1..].iter().fold(shapes[0].clone(), |acc, s| acc.join(s));
        shapes.iter().all(|s| **s != joined)
    });
    if polymorphic {
        ShapeVariability::PolymorphicShapes
    } else {
        ShapeVariability::Monomorphic
    }
}
