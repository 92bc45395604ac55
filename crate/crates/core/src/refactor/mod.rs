//! Preconditions and decisions for the two refactorings.

mod plan;

pub use plan::{
    api_binding, import_anchor_line, plan_convert, plan_optimize, render_input_signature, ApiBinding, Edit, EditPlan,
    PlanConflict,
};

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use rustpython_parser::ast::Expr;
use serde::Serialize;

use crate::callgraph::{ApiKnowledgeBase, CallGraph, NodeId, NodeKind};
use crate::effects::{self, EffectKind, EffectSummary, GraphIo, TransitiveEffects};
use crate::frontend::{FunctionDecl, SourceSpan};
use crate::hybrid::{self, ArgEnv, ArgValue, HybridizationStatus, Literal, SPLAT_KEY};
use crate::names::{HybridApi, Program};
use crate::types::{self, DType, ParamFact, ShapeFact, ShapeVariability, TensorLikeness, TypeFact};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PreconditionCode {
    C1,
    C2,
    C3,
    C4,
    C5,
    C6,
    C7,
    C8,
}

impl PreconditionCode {
    pub const ALL: [PreconditionCode; 8] = [
        Self::C1,
        Self::C2,
        Self::C3,
        Self::C4,
        Self::C5,
        Self::C6,
        Self::C7,
        Self::C8,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::C1 => "NotAlreadyHybrid",
            Self::C2 => "HasTensorParam",
            Self::C3 => "NoSideEffects",
            Self::C4 => "NoVariableCreation",
            Self::C5 => "NotRecursive",
            Self::C6 => "ClosedWorld",
            Self::C7 => "NoRetracingRisk",
            Self::C8 => "NoUnsupportedConstructs",
        }
    }
}

impl fmt::Display for PreconditionCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for PreconditionCode {
    type Err = String;

    /// Accepts `C3`, `c3` or the long name `NoSideEffects`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.to_string().eq_ignore_ascii_case(s) || c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown precondition code `{s}` (expected C1..C8)"))
    }
}

impl Serialize for PreconditionCode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Warn,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Evidence {
    pub span: Option<SourceSpan>,
    pub message: String,
}

impl Evidence {
    fn at(span: &SourceSpan, message: impl Into<String>) -> Self {
        Self {
            span: Some(span.clone()),
            message: message.into(),
        }
    }

    fn note(message: impl Into<String>) -> Self {
        Self {
            span: None,
            message: message.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub code: PreconditionCode,
    pub name: &'static str,
    pub verdict: Verdict,
    pub evidence: Vec<Evidence>,
}

impl Check {
    fn new(code: PreconditionCode, verdict: Verdict, evidence: Vec<Evidence>) -> Self {
        Self {
            code,
            name: code.name(),
            verdict,
            evidence,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Refactoring {
    ConvertEagerFunctionToHybrid,
    OptimizeHybridFunction,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Proceed,
    Skip,
    /// Every check passes, but only under assumptions the user has not accepted.
    SpeculativeCandidate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "signature", rename_all = "snake_case")]
pub enum OptimizeAction {
    AddReduceRetracing,
    AddInputSignature(String),
    RemoveDecorator,
    NoChange,
}

#[derive(Clone, Debug, Serialize)]
pub struct PreconditionReport {
    pub node: NodeId,
    pub fqn: String,
    pub refactoring: Refactoring,
    pub status: HybridizationStatus,
    pub checks: Vec<Check>,
    pub assumptions: Vec<String>,
    pub warnings: Vec<String>,
    pub params: Vec<ParamFact>,
    pub shape_variability: ShapeVariability,
    pub decision: Decision,
    /// Optimize only.
    pub action: Option<OptimizeAction>,
}

impl PreconditionReport {
    pub fn check(&self, code: PreconditionCode) -> Option<&Check> {
        self.checks.iter().find(|c| c.code == code)
    }

    pub fn verdict(&self, code: PreconditionCode) -> Option<Verdict> {
        self.check(code).map(|c| c.verdict)
    }

    pub fn has_fail(&self) -> bool {
        self.checks.iter().any(|c| c.verdict == Verdict::Fail)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Options {
    pub speculative: bool,
    pub accept_assumptions: bool,
}

/// Everything the preconditions read, computed once per program.
pub struct Analyses<'p> {
    pub program: &'p Program,
    pub kb: &'p ApiKnowledgeBase,
    pub api: &'p HybridApi,
    pub cg: CallGraph,
    pub effects: TransitiveEffects,
    pub graph_io: Vec<Vec<GraphIo>>,
    pub options: Options,
}

impl<'p> Analyses<'p> {
    pub fn compute(program: &'p Program, kb: &'p ApiKnowledgeBase, api: &'p HybridApi, options: Options) -> Self {
        let cg = CallGraph::build(program, kb, api);
        let locals: Vec<(EffectSummary, Vec<GraphIo>)> = (0..cg.nodes().len())
            .into_par_iter()
            .map(|n| effects::local_effects(program, &cg, kb, n))
            .collect();
        let (summaries, graph_io): (Vec<_>, Vec<_>) = locals.into_iter().unzip();
        let effects = effects::transitive_effects(&cg, &summaries);
        Self {
            program,
            kb,
            api,
            cg,
            effects,
            graph_io,
            options,
        }
    }

    /// Analyzed functions, in call-graph order.
    pub fn functions(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.cg.nodes().len()).filter(|&n| matches!(self.cg.node(n).kind, NodeKind::Function { .. }))
    }

    pub fn unit_of(&self, node: NodeId) -> usize {
        match self.cg.node(node).kind {
            NodeKind::Function { unit, .. } | NodeKind::Module { unit } => unit,
            NodeKind::Synthetic => 0,
        }
    }

    pub fn decl(&self, node: NodeId) -> &'p FunctionDecl {
        self.cg.decl(self.program, node).expect("function node")
    }

    pub fn status(&self, node: NodeId) -> (HybridizationStatus, Vec<String>) {
        hybrid::detect_status(self.program, &self.cg, self.api, node)
    }

    fn fqn(&self, node: NodeId) -> String {
        self.cg.node(node).fqn.to_string()
    }
}

const SIDE_EFFECTS: [EffectKind; 5] = [
    EffectKind::GlobalWrite,
    EffectKind::NonlocalWrite,
    EffectKind::CapturedMutation,
    EffectKind::IO,
    EffectKind::PyRandomness,
];

struct Facts {
    status: HybridizationStatus,
    params: Vec<ParamFact>,
    variability: ShapeVariability,
    warnings: Vec<String>,
}

fn facts(a: &Analyses, node: NodeId) -> Facts {
    let (status, mut warnings) = a.status(node);
    let params = types::infer_param_facts(a.program, &a.cg, a.kb, node, a.options.speculative);
    let value_params: Vec<ParamFact> = params.iter().filter(|p| !p.is_receiver).cloned().collect();
    let variability = types::shape_variability(&value_params, a.cg.sites_to(node).count());
    for p in &params {
        warnings.extend(p.warnings.iter().cloned());
    }
    for io in &a.graph_io[node] {
        warnings.push(format!(
            "{} at line {} runs inside the graph; kept as is",
            io.api, io.span.start_line
        ));
    }
    Facts {
        status,
        params,
        variability,
        warnings,
    }
}

fn effect_check(a: &Analyses, node: NodeId, code: PreconditionCode, kinds: &[EffectKind]) -> Check {
    let evidence: Vec<Evidence> = a.effects.summaries[node]
        .iter()
        .filter(|e| kinds.contains(&e.kind))
        .map(|e| {
            let chain = effects::via_chain(&a.cg, node, e);
            let mut message = format!("{:?}: {}", e.kind, e.detail);
            if chain.len() > 1 {
                let names: Vec<String> = chain.iter().map(|&n| a.fqn(n)).collect();
                message.push_str(&format!(" (via {})", names.join(" -> ")));
            }
            Evidence::at(&e.span, message)
        })
        .collect();
    let verdict = if evidence.is_empty() { Verdict::Pass } else { Verdict::Fail };
    Check::new(code, verdict, evidence)
}

fn is_property(a: &Analyses, unit: usize, decl: &FunctionDecl) -> bool {
    decl.decorators.iter().any(|d| match &d.expr {
        Expr::Attribute(attr) if matches!(attr.attr.as_str(), "setter" | "getter" | "deleter") => true,
        expr => a
            .program
            .resolve_path(unit, expr, d.span.start)
            .is_some_and(|qn| matches!(qn.to_string().as_str(), "builtins.property" | "functools.cached_property")),
    })
}

fn checks(a: &Analyses, node: NodeId, f: &Facts, with_c1: bool) -> (Vec<Check>, Vec<String>) {
    let decl = a.decl(node);
    let unit = a.unit_of(node);
    let mut checks = Vec::with_capacity(8);
    let mut assumptions = Vec::new();

    if with_c1 {
        checks.push(match &f.status {
            HybridizationStatus::NotHybrid => Check::new(PreconditionCode::C1, Verdict::Pass, vec![]),
            HybridizationStatus::Decorated { span, .. } => Check::new(
                PreconditionCode::C1,
                Verdict::Fail,
                vec![Evidence::at(span, "already decorated with the hybridization API")],
            ),
            HybridizationStatus::WrappedFirstClass { span, binding } => Check::new(
                PreconditionCode::C1,
                Verdict::Fail,
                vec![Evidence::at(span, format!("already wrapped as `{binding}`"))],
            ),
        });
    }

    let value_params: Vec<&ParamFact> = f.params.iter().filter(|p| !p.is_receiver).collect();
    let tensors: Vec<&&ParamFact> = value_params
        .iter()
        .filter(|p| p.likeness == TensorLikeness::Tensor)
        .collect();
    let maybe: Vec<&&ParamFact> = value_params
        .iter()
        .filter(|p| p.likeness == TensorLikeness::MaybeTensor)
        .collect();
    checks.push(if !tensors.is_empty() {
        let names: Vec<&str> = tensors.iter().map(|p| p.name.as_str()).collect();
        Check::new(
            PreconditionCode::C2,
            Verdict::Pass,
            vec![Evidence::at(&decl.def_span, format!("tensor parameter(s): {}", names.join(", ")))],
        )
    } else if a.options.speculative && !maybe.is_empty() {
        for p in &maybe {
            assumptions.extend(p.assumptions.iter().cloned());
        }
        Check::new(
            PreconditionCode::C2,
            Verdict::Pass,
            assumptions.iter().map(|s| Evidence::at(&decl.def_span, s.clone())).collect(),
        )
    } else {
        let message = if value_params.is_empty() {
            "no parameters".to_string()
        } else {
            let described: Vec<String> = value_params.iter().map(|p| format!("{}: {}", p.name, p.fact)).collect();
            format!("no tensor parameter ({})", described.join(", "))
        };
        Check::new(PreconditionCode::C2, Verdict::Fail, vec![Evidence::at(&decl.def_span, message)])
    });

    checks.push(effect_check(a, node, PreconditionCode::C3, &SIDE_EFFECTS));
    checks.push(effect_check(a, node, PreconditionCode::C4, &[EffectKind::VariableCreation]));

    checks.push(if a.cg.in_recursive_cycle(node) {
        Check::new(
            PreconditionCode::C5,
            Verdict::Fail,
            vec![Evidence::at(&decl.def_span, "recursive through the call graph")],
        )
    } else {
        Check::new(PreconditionCode::C5, Verdict::Pass, vec![])
    });

    checks.push(effect_check(a, node, PreconditionCode::C6, &[EffectKind::UnknownCallee]));

    checks.push(match f.variability {
        ShapeVariability::Monomorphic => Check::new(PreconditionCode::C7, Verdict::Pass, vec![]),
        ShapeVariability::NoCallSites => Check::new(
            PreconditionCode::C7,
            Verdict::Warn,
            vec![Evidence::note("no resolved call sites; retracing risk unknown")],
        ),
        ShapeVariability::PolymorphicShapes => Check::new(
            PreconditionCode::C7,
            Verdict::Warn,
            vec![Evidence::note("call sites pass tensors of differing shapes")],
        ),
        ShapeVariability::VaryingPrimitives => {
            let evidence = value_params
                .iter()
                .filter(|p| p.literals.len() >= 2)
                .map(|p| {
                    let values: Vec<&str> = p.literals.iter().map(String::as_str).collect();
                    Evidence::note(format!("parameter {} receives literals {}", p.name, values.join(", ")))
                })
                .collect();
            Check::new(PreconditionCode::C7, Verdict::Fail, evidence)
        }
    });

    let mut unsupported = Vec::new();
    if decl.is_generator {
        unsupported.push(Evidence::at(&decl.def_span, "generator function"));
    }
    if decl.is_async {
        unsupported.push(Evidence::at(&decl.def_span, "async function"));
    }
    if decl.is_method && decl.name == "__init__" {
        unsupported.push(Evidence::at(&decl.def_span, "constructor"));
    }
    if is_property(a, unit, decl) {
        unsupported.push(Evidence::at(&decl.def_span, "property accessor"));
    }
    let verdict = if unsupported.is_empty() { Verdict::Pass } else { Verdict::Fail };
    checks.push(Check::new(PreconditionCode::C8, verdict, unsupported));

    (checks, assumptions)
}

/// Convert Eager Function to Hybrid: all of C1 to C8, never short-circuited.
pub fn check_convert(a: &Analyses, node: NodeId) -> PreconditionReport {
    let f = facts(a, node);
    let (checks, assumptions) = checks(a, node, &f, true);
    let decision = if checks.iter().any(|c| c.verdict == Verdict::Fail) {
        Decision::Skip
    } else if !assumptions.is_empty() && !a.options.accept_assumptions {
        Decision::SpeculativeCandidate
    } else {
        Decision::Proceed
    };
    PreconditionReport {
        node,
        fqn: a.fqn(node),
        refactoring: Refactoring::ConvertEagerFunctionToHybrid,
        status: f.status,
        checks,
        assumptions,
        warnings: f.warnings,
        params: f.params,
        shape_variability: f.variability,
        decision,
        action: None,
    }
}

/// Optimize Hybrid Function. The report carries C2 to C8; C1 does not apply.
pub fn decide_optimize(a: &Analyses, node: NodeId) -> (OptimizeAction, PreconditionReport) {
    let f = facts(a, node);
    let (checks, assumptions) = checks(a, node, &f, false);
    let mut warnings = f.warnings.clone();
    let unsafe_as_graph = checks.iter().any(|c| {
        c.verdict == Verdict::Fail
            && matches!(c.code, PreconditionCode::C3 | PreconditionCode::C4 | PreconditionCode::C8)
    });

    let action = match &f.status {
        HybridizationStatus::NotHybrid => OptimizeAction::NoChange,
        HybridizationStatus::WrappedFirstClass { binding, .. } => {
            let wanted = if unsafe_as_graph {
                Some("removing the wrapping")
            } else if retracing_risk(f.variability) {
                Some("generalizing its trace key")
            } else {
                None
            };
            if let Some(wanted) = wanted {
                warnings.push(format!(
                    "first-class wrapping `{binding}` would benefit from {wanted}; wrappings are not edited"
                ));
            }
            OptimizeAction::NoChange
        }
        HybridizationStatus::Decorated { args, span, .. } => {
            if unsafe_as_graph {
                OptimizeAction::RemoveDecorator
            } else if retracing_risk(f.variability) {
                match retracing_already_handled(args) {
                    Err(key) => {
                        warnings.push(format!(
                            "decorator argument `{key}` at line {} is not a constant; left unchanged",
                            span.start_line
                        ));
                        OptimizeAction::NoChange
                    }
                    Ok(true) => OptimizeAction::NoChange,
                    Ok(false) => {
                        let unit = a.unit_of(node);
                        let binding = api_binding(a.program, unit, span.start);
                        retracing_action(&f.params, f.variability, binding.as_ref())
                    }
                }
            } else {
                OptimizeAction::NoChange
            }
        }
    };
    let decision = if action == OptimizeAction::NoChange {
        Decision::Skip
    } else {
        Decision::Proceed
    };
    let report = PreconditionReport {
        node,
        fqn: a.fqn(node),
        refactoring: Refactoring::OptimizeHybridFunction,
        status: f.status,
        checks,
        assumptions,
        warnings,
        params: f.params,
        shape_variability: f.variability,
        decision,
        action: Some(action.clone()),
    };
    (action, report)
}

fn retracing_risk(v: ShapeVariability) -> bool {
    matches!(v, ShapeVariability::VaryingPrimitives | ShapeVariability::PolymorphicShapes)
}

/// Whether the decorator already generalizes its trace key. `Err` names a
/// relevant argument whose value is unknown.
fn retracing_already_handled(args: &ArgEnv) -> Result<bool, String> {
    if args.contains_key(SPLAT_KEY) {
        return Err(SPLAT_KEY.to_string());
    }
    let mut handled = false;
    for key in ["input_signature", "reduce_retracing", "experimental_relax_shapes"] {
        match args.get(key) {
            None | Some(ArgValue::Const(Literal::None)) => {}
            Some(ArgValue::UnknownValue) => return Err(key.to_string()),
            Some(ArgValue::SignatureExpr(_)) => handled = true,
            Some(ArgValue::Const(Literal::Bool(b))) => handled |= *b && key != "input_signature",
            Some(ArgValue::Const(_)) => handled |= key == "input_signature",
        }
    }
    Ok(handled)
}

/// AddInputSignature when every non-receiver parameter is a tensor with a
/// known dtype and rank; otherwise AddReduceRetracing.
pub fn retracing_action(
    params: &[ParamFact],
    variability: ShapeVariability,
    binding: Option<&ApiBinding>,
) -> OptimizeAction {
    if variability == ShapeVariability::PolymorphicShapes {
        if let Some(module) = binding.and_then(|b| b.module_alias.as_deref()) {
            let value_params: Vec<&ParamFact> = params.iter().filter(|p| !p.is_receiver).collect();
            let specs: Option<Vec<(DType, &ShapeFact)>> = value_params
                .iter()
                .map(|p| match &p.fact {
                    TypeFact::Tensor { dtype, shape } if *dtype != DType::Unknown && shape.rank().is_some() => {
                        Some((*dtype, shape))
                    }
                    _ => None,
                })
                .collect();
            if let Some(specs) = specs.filter(|s| !s.is_empty()) {
                return OptimizeAction::AddInputSignature(render_input_signature(module, &specs));
            }
        }
    }
    OptimizeAction::AddReduceRetracing
}

/// Reports for every analyzed function, in call-graph order. With both
/// refactorings enabled, hybrid functions get the optimize report and the
/// rest the convert report; convert alone reports on every function.
pub fn analyze_all(a: &Analyses, convert: bool, optimize: bool) -> Vec<PreconditionReport> {
    let nodes: Vec<NodeId> = a.functions().collect();
    nodes
        .par_iter()
        .filter_map(|&n| {
            let hybrid = a.status(n).0.is_hybrid();
            if hybrid && optimize {
                Some(decide_optimize(a, n).1)
            } else if convert {
                Some(check_convert(a, n))
            } else {
                None
            }
        })
        .collect()
}
