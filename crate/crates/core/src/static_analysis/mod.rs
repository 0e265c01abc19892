//! Static dataflow over the program database: slicing, taint, and flag
//! set/unset analysis.

mod flags;
mod taints;

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::code_db::{is_access, prefix_match, ProgramDb};
use crate::lang::{EntityId, MiniCType, NodeKind};

pub use flags::{const_eval, flag_analysis, flag_target, reachable_functions, FlagAnalysis, FlagFact, FlagOp};
pub use taints::{parse_manual_taints, TaintFileError};

/// A value-carrying program point: a variable access, declaration, or
/// expression, tagged with its function (none for globals).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FlowNode {
    pub access: EntityId,
    pub function: EntityId,
}

impl FlowNode {
    pub fn new(db: &ProgramDb, access: EntityId) -> FlowNode {
        FlowNode { access, function: db.sema.enclosing_fn.get(&access).copied().unwrap_or(EntityId::NONE) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExtraRules {
    /// `q = (T*) p` carries taint from `p` to `q`.
    pub address_copy: bool,
    /// `p->f = x` (or `p.f = x`) carries taint from `x` to `p`.
    pub field_to_qualifier: bool,
}

impl Default for ExtraRules {
    fn default() -> Self {
        ExtraRules { address_copy: true, field_to_qualifier: true }
    }
}

impl ExtraRules {
    pub const NONE: ExtraRules = ExtraRules { address_copy: false, field_to_qualifier: false };
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TaintConfig {
    pub sources: BTreeSet<FlowNode>,
    pub extra_rules: ExtraRules,
    pub manual_taints: BTreeSet<FlowNode>,
}

impl TaintConfig {
    /// Default configuration: the driver's input buffer parameter is the source.
    pub fn for_driver(db: &ProgramDb) -> TaintConfig {
        let mut sources = BTreeSet::new();
        if let Some(p) = driver_input(db) {
            sources.insert(FlowNode::new(db, p));
        }
        TaintConfig { sources, extra_rules: ExtraRules::default(), manual_taints: BTreeSet::new() }
    }

    pub fn with_rules(mut self, rules: ExtraRules) -> TaintConfig {
        self.extra_rules = rules;
        self
    }
}

/// The driver parameter holding the input bytes: `data` if present, else the
/// first pointer parameter.
pub fn driver_input(db: &ProgramDb) -> Option<EntityId> {
    let params = &db.dims.function(db.driver)?.params;
    let named = |n: &str| params.iter().copied().find(|p| db.ast.node(*p).attrs.name.as_deref() == Some(n));
    named("data").or_else(|| {
        params.iter().copied().find(|p| db.ast.node(*p).attrs.ty.as_ref().is_some_and(MiniCType::is_pointer))
    })
}

/// The driver parameter holding the input length: `size` if present, else
/// the first integer parameter.
pub fn driver_size(db: &ProgramDb) -> Option<EntityId> {
    let params = &db.dims.function(db.driver)?.params;
    let named = |n: &str| params.iter().copied().find(|p| db.ast.node(*p).attrs.name.as_deref() == Some(n));
    named("size").or_else(|| {
        params.iter().copied().find(|p| db.ast.node(*p).attrs.ty.as_ref().is_some_and(MiniCType::is_integer))
    })
}

/// Dataflow edges between program points under one rule set.
#[derive(Debug, Clone)]
pub struct FlowGraph {
    pub rules: ExtraRules,
    succ: HashMap<EntityId, Vec<EntityId>>,
    pred: HashMap<EntityId, Vec<EntityId>>,
}

struct Read {
    id: EntityId,
    symbol: String,
    function: Option<EntityId>,
}

impl FlowGraph {
    pub fn build(db: &ProgramDb, rules: ExtraRules) -> FlowGraph {
        let mut g = FlowGraph { rules, succ: HashMap::new(), pred: HashMap::new() };
        let ast = &db.ast;
        let sema = &db.sema;

        for e in &db.dims.defuse_edges {
            g.add(e.def, e.use_);
        }

        let plain_lhs = |id: EntityId| {
            ast.node(id).parent.is_some_and(|p| {
                let pn = ast.node(p);
                pn.kind == NodeKind::Assign && pn.children[0] == id && pn.attrs.op.as_deref().unwrap_or("=") == "="
            })
        };
        let reads: Vec<Read> = ast
            .nodes()
            .iter()
            .filter(|n| is_access(n.kind) && !plain_lhs(n.id))
            .map(|n| Read {
                id: n.id,
                symbol: sema.paths[&n.id].symbol.clone(),
                function: sema.enclosing_fn.get(&n.id).copied(),
            })
            .collect();
        let is_global_root = |id: EntityId| {
            sema.paths.get(&id).and_then(|p| p.root).is_some_and(|r| sema.vars[&r].is_global())
        };

        // Returned expressions per function.
        let mut returns: HashMap<EntityId, Vec<EntityId>> = HashMap::new();
        for n in ast.nodes() {
            if n.kind == NodeKind::Return {
                if let (Some(e), Some(f)) = (n.children.first(), sema.enclosing_fn.get(&n.id)) {
                    returns.entry(*f).or_default().push(*e);
                }
            }
        }

        for n in ast.nodes() {
            let id = n.id;
            match n.kind {
                NodeKind::BinOp | NodeKind::Index => {
                    for c in &n.children {
                        g.add(*c, id);
                    }
                }
                NodeKind::UnaryOp => {
                    let to_pointer = n.attrs.op.as_deref() == Some("cast")
                        && n.attrs.ty.as_ref().is_some_and(MiniCType::is_pointer);
                    if !to_pointer || rules.address_copy {
                        g.add(n.children[0], id);
                    }
                }
                NodeKind::FieldAccess | NodeKind::Deref | NodeKind::AddressOf => g.add(n.children[0], id),
                NodeKind::VarDecl => {
                    if let Some(init) = n.children.first() {
                        g.add(*init, id);
                    }
                }
                NodeKind::Assign => {
                    let (lhs, rhs) = (n.children[0], n.children[1]);
                    g.add(rhs, lhs);
                    let l = ast.node(lhs);
                    if rules.field_to_qualifier && l.kind == NodeKind::FieldAccess {
                        let q = l.children[0];
                        g.add(lhs, q);
                        if let Some(qp) = sema.paths.get(&q) {
                            let global = is_global_root(q);
                            let f = sema.enclosing_fn.get(&q).copied();
                            for r in &reads {
                                if r.id != q && (global || r.function == f) && prefix_match(&qp.symbol, &r.symbol) {
                                    g.add(q, r.id);
                                }
                            }
                        }
                    }
                }
                NodeKind::Call => {
                    if let Some(callee) = sema.callee.get(&id) {
                        let cf = ast.node(*callee);
                        for (a, p) in n.children.iter().zip(&cf.children) {
                            g.add(*a, *p);
                        }
                        for e in returns.get(callee).into_iter().flatten() {
                            g.add(*e, id);
                        }
                    }
                }
                _ => {}
            }
        }

        // Globals flow between functions: every write reaches every matching read.
        for w in &db.dims.variable_accesses {
            if !w.is_write {
                continue;
            }
            let direct = is_global_root(w.id);
            let via_pointer = ast.node(w.id).kind == NodeKind::Deref;
            if !direct && !via_pointer {
                continue;
            }
            let pointee = sema.types.get(&w.id);
            for r in &reads {
                let hit = if direct {
                    prefix_match(&w.symbol, &r.symbol)
                } else {
                    sema.paths[&r.id].root.is_some_and(|root| {
                        let v = &sema.vars[&root];
                        v.is_global()
                            && v.address_taken
                            && Some(&v.ty) == pointee
                            && prefix_match(&format!("{}@{}", v.name, v.decl), &r.symbol)
                    })
                };
                if hit {
                    g.add(w.id, r.id);
                }
            }
        }

        for v in g.succ.values_mut() {
            v.sort();
            v.dedup();
        }
        for v in g.pred.values_mut() {
            v.sort();
            v.dedup();
        }
        g
    }

    fn add(&mut self, from: EntityId, to: EntityId) {
        self.succ.entry(from).or_default().push(to);
        self.pred.entry(to).or_default().push(from);
    }

    pub fn successors(&self, id: EntityId) -> &[EntityId] {
        self.succ.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn predecessors(&self, id: EntityId) -> &[EntityId] {
        self.pred.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    fn closure(&self, starts: impl IntoIterator<Item = EntityId>, forward: bool) -> BTreeSet<EntityId> {
        let mut seen: BTreeSet<EntityId> = BTreeSet::new();
        let mut queue: VecDeque<EntityId> = VecDeque::new();
        for s in starts {
            if seen.insert(s) {
                queue.push_back(s);
            }
        }
        while let Some(x) = queue.pop_front() {
            let next = if forward { self.successors(x) } else { self.predecessors(x) };
            for y in next {
                if seen.insert(*y) {
                    queue.push_back(*y);
                }
            }
        }
        seen
    }

    pub fn forward(&self, starts: impl IntoIterator<Item = EntityId>) -> BTreeSet<EntityId> {
        self.closure(starts, true)
    }

    pub fn backward(&self, starts: impl IntoIterator<Item = EntityId>) -> BTreeSet<EntityId> {
        self.closure(starts, false)
    }

    /// Shortest path from any start to `target`, both ends included.
    pub fn path(&self, starts: impl IntoIterator<Item = EntityId>, target: EntityId) -> Option<Vec<EntityId>> {
        let mut parent: HashMap<EntityId, Option<EntityId>> = HashMap::new();
        let mut queue = VecDeque::new();
        let mut starts: Vec<EntityId> = starts.into_iter().collect();
        starts.sort();
        for s in starts {
            if parent.insert(s, None).is_none() {
                queue.push_back(s);
            }
        }
        while let Some(x) = queue.pop_front() {
            if x == target {
                let mut out = vec![x];
                let mut cur = x;
                while let Some(Some(p)) = parent.get(&cur) {
                    out.push(*p);
                    cur = *p;
                }
                out.reverse();
                return Some(out);
            }
            for y in self.successors(x) {
                if !parent.contains_key(y) {
                    parent.insert(*y, Some(x));
                    queue.push_back(*y);
                }
            }
        }
        None
    }
}

fn to_nodes(db: &ProgramDb, ids: BTreeSet<EntityId>) -> BTreeSet<FlowNode> {
    ids.into_iter().map(|i| FlowNode::new(db, i)).collect()
}

/// Everything `source` (and any manual taint marks) can flow to.
pub fn forward_flow(db: &ProgramDb, source: FlowNode, cfg: &TaintConfig) -> BTreeSet<FlowNode> {
    let g = FlowGraph::build(db, cfg.extra_rules);
    let starts = std::iter::once(source.access).chain(cfg.manual_taints.iter().map(|n| n.access));
    to_nodes(db, g.forward(starts))
}

/// Everything that can flow to `sink`, under the default rule set.
pub fn backward_flow(db: &ProgramDb, sink: FlowNode) -> BTreeSet<FlowNode> {
    backward_flow_with(db, sink, ExtraRules::default())
}

pub fn backward_flow_with(db: &ProgramDb, sink: FlowNode, rules: ExtraRules) -> BTreeSet<FlowNode> {
    let g = FlowGraph::build(db, rules);
    to_nodes(db, g.backward([sink.access]))
}

pub fn is_statically_tainted(db: &ProgramDb, source: FlowNode, sink: FlowNode, cfg: &TaintConfig) -> bool {
    forward_flow(db, source, cfg).contains(&sink)
}

/// Witness for a static taint: shortest flow path from the source or a
/// manual mark to the sink.
pub fn taint_path(db: &ProgramDb, g: &FlowGraph, source: FlowNode, sink: FlowNode, cfg: &TaintConfig) -> Option<Vec<FlowNode>> {
    let starts = std::iter::once(source.access).chain(cfg.manual_taints.iter().map(|n| n.access));
    g.path(starts, sink.access).map(|p| p.into_iter().map(|i| FlowNode::new(db, i)).collect())
}

#[cfg(test)]
mod tests;
