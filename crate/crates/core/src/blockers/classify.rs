use std::collections::BTreeSet;

use serde::Serialize;

use crate::code_db::ProgramDb;
use crate::lang::{EntityId, NodeKind, SourceLocation};
use crate::queries::{query1_at, query3_at, source_text, FlagSuggestion, Query1Options, TaintStatus, TaintVerdict};
use crate::runtime::FuzzOptions;
use crate::static_analysis::{backward_flow_with, const_eval, driver_size, flag_target, FlowNode, TaintConfig};

use super::BlockerRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TaxonomyLabel {
    MagicNumber,
    ExtremeInput,
    MissingArgOption,
    MissingConfigCall,
    MissingFeatureCall,
    Unsupported,
    Unknown,
}

impl TaxonomyLabel {
    pub fn code(self) -> &'static str {
        match self {
            TaxonomyLabel::MagicNumber => "1.1",
            TaxonomyLabel::ExtremeInput => "1.2",
            TaxonomyLabel::MissingArgOption => "2.1",
            TaxonomyLabel::MissingConfigCall => "2.2.3",
            TaxonomyLabel::MissingFeatureCall => "2.2.4",
            TaxonomyLabel::Unsupported => "unsupported",
            TaxonomyLabel::Unknown => "unknown",
        }
    }
}

/// A hard-coded constant in the driver whose sibling the program tests for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArgOption {
    pub expected: String,
    pub driver_value: String,
    pub driver_site: SourceLocation,
    pub snippet: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Evidence {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub taint: Option<TaintVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<SourceLocation>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub suggestions: Vec<FlagSuggestion>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arg_option: Option<ArgOption>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TaxonomyVerdict {
    pub label: TaxonomyLabel,
    pub code: &'static str,
    pub evidence: Evidence,
}

impl TaxonomyVerdict {
    fn new(label: TaxonomyLabel, evidence: Evidence) -> TaxonomyVerdict {
        TaxonomyVerdict { label, code: label.code(), evidence }
    }

    fn unknown(diagnostic: impl Into<String>, taint: Option<TaintVerdict>) -> TaxonomyVerdict {
        TaxonomyVerdict::new(TaxonomyLabel::Unknown, Evidence { taint, diagnostic: Some(diagnostic.into()), ..Evidence::default() })
    }
}

#[derive(Debug, Clone)]
pub struct ClassifyOptions {
    pub query1: Query1Options,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        let fuzz = FuzzOptions { exec_limit: 5_000, ..FuzzOptions::default() };
        ClassifyOptions { query1: Query1Options { fuzz, ..Query1Options::default() } }
    }
}

const EQUALITY: [&str; 2] = ["==", "!="];
const RELATIONAL: [&str; 4] = ["<", "<=", ">", ">="];

fn comparisons(db: &ProgramDb, cond: EntityId, ops: &[&str]) -> Vec<EntityId> {
    db.ast
        .descendants(cond)
        .into_iter()
        .filter(|d| {
            let n = db.ast.node(*d);
            n.kind == NodeKind::BinOp && n.attrs.op.as_deref().is_some_and(|o| ops.contains(&o))
        })
        .collect()
}

/// The operand of `cmp` that is not a constant, if the other one is.
fn against_constant(db: &ProgramDb, cmp: EntityId) -> Option<(EntityId, EntityId)> {
    let c = &db.ast.node(cmp).children;
    match (const_eval(&db.ast, c[0]), const_eval(&db.ast, c[1])) {
        (None, Some(_)) => Some((c[0], c[1])),
        (Some(_), None) => Some((c[1], c[0])),
        _ => None,
    }
}

fn loop_counters(db: &ProgramDb) -> BTreeSet<EntityId> {
    db.ast
        .nodes()
        .iter()
        .filter(|n| n.kind == NodeKind::For)
        .map(|n| n.children[0])
        .filter(|c| db.ast.node(*c).kind == NodeKind::VarDecl)
        .collect()
}

fn tainted_label(db: &ProgramDb, cond: EntityId, access: EntityId, cfg: &TaintConfig, v: TaintVerdict) -> TaxonomyVerdict {
    let involves = |side: EntityId| db.ast.descendants(side).contains(&access);
    for cmp in comparisons(db, cond, &EQUALITY) {
        if against_constant(db, cmp).is_some_and(|(var, _)| involves(var)) {
            let evidence = Evidence { taint: Some(v), comparison: Some(db.ast.node(cmp).loc.clone()), ..Evidence::default() };
            return TaxonomyVerdict::new(TaxonomyLabel::MagicNumber, evidence);
        }
    }
    let mut anchors = loop_counters(db);
    anchors.extend(driver_size(db));
    for cmp in comparisons(db, cond, &RELATIONAL) {
        let Some((var, _)) = against_constant(db, cmp) else { continue };
        let derived = db.ast.descendants(var).into_iter().filter(|d| db.dims.access(*d).is_some()).any(|a| {
            backward_flow_with(db, FlowNode::new(db, a), cfg.extra_rules).iter().any(|n| anchors.contains(&n.access))
        });
        if derived {
            let evidence = Evidence { taint: Some(v), comparison: Some(db.ast.node(cmp).loc.clone()), ..Evidence::default() };
            return TaxonomyVerdict::new(TaxonomyLabel::ExtremeInput, evidence);
        }
    }
    TaxonomyVerdict::unknown("input-dependent condition without a recognised comparison", Some(v))
}

/// Name prefix shared by related constants: everything up to the last `_`.
fn family(name: &str) -> Option<&str> {
    name.rfind('_').map(|i| &name[..=i])
}

fn arg_option(db: &ProgramDb, cond: EntityId) -> Option<ArgOption> {
    for cmp in comparisons(db, cond, &EQUALITY) {
        let Some((var, lit)) = against_constant(db, cmp) else { continue };
        let expected = db.ast.node(lit).attrs.spelling.clone()?;
        if !db.dims.constants.iter().any(|c| c.name == expected) {
            continue;
        }
        let Some(prefix) = family(&expected) else { continue };
        let storage = flag_target(db, var);
        for n in db.ast.descendants(db.driver).into_iter().map(|d| db.ast.node(d)) {
            if n.kind != NodeKind::Assign || n.attrs.op.as_deref() != Some("=") {
                continue;
            }
            let (lhs, rhs) = (n.children[0], db.ast.node(n.children[1]));
            let Some(spelling) = rhs.attrs.spelling.as_deref() else { continue };
            if rhs.kind != NodeKind::Literal || spelling == expected || family(spelling) != Some(prefix) {
                continue;
            }
            if storage.is_some() && flag_target(db, lhs) == storage {
                return Some(ArgOption {
                    expected: expected.clone(),
                    driver_value: spelling.to_string(),
                    driver_site: n.loc.clone(),
                    snippet: format!("{} = {expected};", source_text(db, &db.ast.node(lhs).loc)),
                });
            }
        }
    }
    None
}

/// Walks the taxonomy for one blocker: taint first, then the subtype queries.
pub fn classify(db: &ProgramDb, blocker: &BlockerRecord, cfg: &TaintConfig, opts: &ClassifyOptions) -> TaxonomyVerdict {
    let Some(&source) = cfg.sources.iter().next() else {
        return TaxonomyVerdict::unknown("no taint source configured", None);
    };
    let cond = blocker.condition;
    let accesses: Vec<EntityId> =
        db.ast.descendants(cond).into_iter().filter(|d| db.dims.access(*d).is_some()).collect();
    if accesses.is_empty() {
        return TaxonomyVerdict::unknown("condition reads no variables", None);
    }
    let static_opts = Query1Options { dynamic: false, ..opts.query1.clone() };
    let passes: &[&Query1Options] = if opts.query1.dynamic { &[&static_opts, &opts.query1] } else { &[&static_opts] };
    let mut taint = None;
    for pass in passes {
        for &a in &accesses {
            let v = match query1_at(db, source, FlowNode::new(db, a), cfg, pass) {
                Ok(v) => v,
                Err(e) => return TaxonomyVerdict::unknown(e.to_string(), None),
            };
            if v.status != TaintStatus::NotTainted {
                return tainted_label(db, cond, a, cfg, v);
            }
            if a == accesses[0] {
                taint = Some(v);
            }
        }
    }

    for lit in db.ast.descendants(cond).into_iter().filter(|d| db.ast.node(*d).kind == NodeKind::Literal) {
        let Ok(r) = query3_at(db, lit) else { continue };
        if r.suggestions.is_empty() {
            continue;
        }
        let label = if r.target.contains('.') { TaxonomyLabel::MissingConfigCall } else { TaxonomyLabel::MissingFeatureCall };
        return TaxonomyVerdict::new(label, Evidence { taint, suggestions: r.suggestions, ..Evidence::default() });
    }
    if let Some(a) = arg_option(db, cond) {
        return TaxonomyVerdict::new(TaxonomyLabel::MissingArgOption, Evidence { taint, arg_option: Some(a), ..Evidence::default() });
    }
    TaxonomyVerdict::unknown("no blocker pattern matched", taint)
}
