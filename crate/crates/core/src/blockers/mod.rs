//! Fuzz blocker extraction, ranking and taxonomy classification.

mod classify;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::Serialize;

use crate::code_db::{BranchLabel, CfgEdge, Layout, ProgramDb};
use crate::lang::{EntityId, NodeKind, SourceLocation};
use crate::queries::source_text;
use crate::warehouse::FactStore;

pub use classify::{classify, ClassifyOptions, Evidence, TaxonomyLabel, TaxonomyVerdict};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockerRecord {
    /// The `if`, `while` or `for` statement.
    pub branch_stmt: EntityId,
    pub function: String,
    pub location: SourceLocation,
    pub condition: EntityId,
    pub condition_text: String,
    pub blocked_edge: CfgEdge,
    /// Statements reachable only through the blocked edge, callee bodies included.
    pub score: usize,
    /// Runs that reached the branch.
    pub times_hit: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub taxonomy: Option<TaxonomyVerdict>,
}

/// Branch statement and the block ending in its condition test.
pub fn branch_sites(db: &ProgramDb) -> Vec<(EntityId, EntityId, EntityId)> {
    let mut out = Vec::new();
    for s in &db.dims.statements {
        let node = db.ast.node(s.id);
        let (block, cond) = match db.layout(s.id) {
            Some(Layout::If { .. }) => (db.block_of(s.id), node.children[0]),
            Some(Layout::While { header, .. }) => (Some(*header), node.children[0]),
            Some(Layout::For { header, .. }) => (Some(*header), node.children[1]),
            None => continue,
        };
        if let Some(b) = block {
            out.push((s.id, b, cond));
        }
    }
    out
}

fn counted_statements(db: &ProgramDb, blocks: &BTreeSet<EntityId>) -> usize {
    blocks
        .iter()
        .filter_map(|b| db.dims.block(*b))
        .flat_map(|b| b.statements.iter())
        .filter(|s| db.ast.node(**s).kind != NodeKind::Block)
        .count()
}

fn reach<T: Ord + Copy>(start: T, next: impl Fn(T) -> Vec<T>) -> BTreeSet<T> {
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(x) = queue.pop_front() {
        for y in next(x) {
            if seen.insert(y) {
                queue.push_back(y);
            }
        }
    }
    seen
}

/// Statements that become unreachable when `edge` is removed: blocks of the
/// function cut off from its entry, plus functions no longer reachable from
/// the driver because their only calls sit in those blocks.
pub fn blocked_statements(db: &ProgramDb, edge: &CfgEdge) -> usize {
    let func = db.dims.block(edge.src).map(|b| b.function).unwrap_or(EntityId::NONE);
    let mut succ: HashMap<EntityId, Vec<EntityId>> = HashMap::new();
    for e in &db.dims.cfg_edges {
        succ.entry(e.src).or_default().push(e.dst);
    }
    let entry = db.entry_block(func);
    let all = reach(entry, |b| succ.get(&b).cloned().unwrap_or_default());
    let kept = reach(entry, |b| {
        succ.get(&b).into_iter().flatten().copied().filter(|d| !(b == edge.src && *d == edge.dst)).collect()
    });
    let lost: BTreeSet<EntityId> = all.difference(&kept).copied().collect();

    let lost_calls: BTreeSet<EntityId> = db
        .dims
        .call_edges
        .iter()
        .filter(|c| db.statement_of(c.call).and_then(|s| db.block_of(s)).is_some_and(|b| lost.contains(&b)))
        .map(|c| c.call)
        .collect();
    let callees = |keep_all: bool| {
        reach(db.driver, |f| {
            db.dims
                .call_edges
                .iter()
                .filter(|c| c.caller == f && (keep_all || !lost_calls.contains(&c.call)))
                .map(|c| c.callee)
                .collect()
        })
    };
    let gone: BTreeSet<EntityId> = callees(true).difference(&callees(false)).copied().collect();
    let gone_blocks: BTreeSet<EntityId> =
        db.dims.basic_blocks.iter().filter(|b| gone.contains(&b.function)).map(|b| b.id).collect();
    counted_statements(db, &lost) + counted_statements(db, &gone_blocks)
}

/// One record per conditional reached at least once with an outgoing edge
/// never taken. Sorted by descending score, then by location.
pub fn extract_blockers(db: &ProgramDb, store: &FactStore) -> Vec<BlockerRecord> {
    let traversed = store.edge_counts(db);
    let mut runs_at: BTreeMap<EntityId, u64> = BTreeMap::new();
    for seq in store.block_sequences().values() {
        let distinct: BTreeSet<&EntityId> = seq.iter().collect();
        for b in distinct {
            *runs_at.entry(*b).or_default() += 1;
        }
    }
    let mut out = Vec::new();
    for (stmt, block, cond) in branch_sites(db) {
        let times_hit = runs_at.get(&block).copied().unwrap_or(0);
        if times_hit == 0 {
            continue;
        }
        for e in db.dims.cfg_edges.iter().filter(|e| e.src == block && e.label != BranchLabel::Fallthrough) {
            if traversed.contains_key(&(e.src, e.dst)) {
                continue;
            }
            let node = db.ast.node(stmt);
            out.push(BlockerRecord {
                branch_stmt: stmt,
                function: db.function_of(stmt).map(|f| db.function_name(f).to_string()).unwrap_or_default(),
                location: node.loc.clone(),
                condition: cond,
                condition_text: source_text(db, &db.ast.node(cond).loc),
                blocked_edge: e.clone(),
                score: blocked_statements(db, e),
                times_hit,
                taxonomy: None,
            });
        }
    }
    out.sort_by(|a, b| {
        b.score.cmp(&a.score).then_with(|| (&a.location.file, a.location.start()).cmp(&(&b.location.file, b.location.start())))
    });
    out
}
