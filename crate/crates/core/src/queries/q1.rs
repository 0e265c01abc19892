use std::collections::BTreeSet;

use serde::Serialize;

use crate::code_db::ProgramDb;
use crate::lang::{EntityId, NodeKind};
use crate::runtime::{fuzz, Corpus, Exit, FuzzOptions};
use crate::static_analysis::{backward_flow_with, forward_flow, taint_path, FlowGraph, FlowNode, TaintConfig};
use crate::warehouse::FactStoreBuilder;

use super::arg::resolve_location;
use super::infer::{infer_relationship, InferredRelation, TemplatePolicy};
use super::{QueryArg, QueryError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TaintStatus {
    StaticallyTainted,
    LikelyTainted,
    NotTainted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaintWitness {
    /// Static flow path from the source to the sink.
    Path { nodes: Vec<FlowNode> },
    /// A runtime relation tying a tainted point to one feeding the sink.
    Relation { relation: InferredRelation },
    /// Sizes of the explored slices when nothing linked them.
    Explored { forward: usize, backward: usize, execs: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TaintVerdict {
    pub status: TaintStatus,
    pub source: FlowNode,
    pub sink: FlowNode,
    pub witness: TaintWitness,
}

#[derive(Debug, Clone)]
pub struct Query1Options {
    pub fuzz: FuzzOptions,
    pub policy: TemplatePolicy,
    /// Run the monitored campaign when the static check fails.
    pub dynamic: bool,
    pub initial: Vec<Vec<u8>>,
}

impl Default for Query1Options {
    fn default() -> Self {
        Query1Options { fuzz: FuzzOptions::default(), policy: TemplatePolicy::default(), dynamic: true, initial: Vec::new() }
    }
}

/// Is the access at `sink` (a location argument) influenced by `source`?
pub fn query1_hybrid_taint(
    db: &ProgramDb,
    source: FlowNode,
    sink: &QueryArg,
    cfg: &TaintConfig,
    opts: &Query1Options,
) -> Result<TaintVerdict, QueryError> {
    let id = resolve_location(db, &sink.location()?)?;
    let n = db.ast.node(id);
    if db.dims.access(id).is_none() && n.kind != NodeKind::VarDecl {
        return Err(QueryError::NotAnAccess(n.loc.clone()));
    }
    query1_at(db, source, FlowNode::new(db, id), cfg, opts)
}

pub fn query1_at(
    db: &ProgramDb,
    source: FlowNode,
    sink: FlowNode,
    cfg: &TaintConfig,
    opts: &Query1Options,
) -> Result<TaintVerdict, QueryError> {
    let g = FlowGraph::build(db, cfg.extra_rules);
    if let Some(nodes) = taint_path(db, &g, source, sink, cfg) {
        return Ok(TaintVerdict { status: TaintStatus::StaticallyTainted, source, sink, witness: TaintWitness::Path { nodes } });
    }
    let fwd: BTreeSet<EntityId> = forward_flow(db, source, cfg).into_iter().map(|n| n.access).collect();
    let bwd: BTreeSet<EntityId> = backward_flow_with(db, sink, cfg.extra_rules).into_iter().map(|n| n.access).collect();
    let explored = |execs| TaintWitness::Explored { forward: fwd.len(), backward: bwd.len(), execs };
    if !opts.dynamic {
        return Ok(TaintVerdict { status: TaintStatus::NotTainted, source, sink, witness: explored(0) });
    }

    let monitor: BTreeSet<EntityId> = fwd.union(&bwd).copied().collect();
    let mut builder = FactStoreBuilder::new(db.generation());
    let mut failure: Option<String> = None;
    let mut all_failed = true;
    let report = fuzz(db, Corpus::from_seeds(opts.initial.iter().cloned()), &monitor, &opts.fuzz, |t, input| {
        match &t.exit {
            Exit::Error(m) if m != "budget" => {
                failure.get_or_insert_with(|| m.clone());
            }
            _ => all_failed = false,
        }
        builder.push(t, input);
        Ok::<(), std::convert::Infallible>(())
    })
    .unwrap_or_else(|e| match e {});
    if all_failed && report.execs > 0 {
        return Err(QueryError::InstrumentationFailure(failure.unwrap_or_default()));
    }
    let store = builder.finish();

    let tainted: BTreeSet<EntityId> = fwd.iter().copied().filter(|a| store.is_monitored(*a)).collect();
    for &s_prime in bwd.iter().filter(|a| store.is_monitored(**a)) {
        let rows = store.aligned_partial(&tainted, s_prime);
        match infer_relationship(s_prime, &rows, &opts.policy) {
            Ok(Some(relation)) => {
                return Ok(TaintVerdict {
                    status: TaintStatus::LikelyTainted,
                    source,
                    sink,
                    witness: TaintWitness::Relation { relation },
                })
            }
            Ok(None) | Err(QueryError::InsufficientSamples { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(TaintVerdict { status: TaintStatus::NotTainted, source, sink, witness: explored(report.execs) })
}
