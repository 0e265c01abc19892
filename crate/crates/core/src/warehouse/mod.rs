//! Fact tables loaded next to the dimension tables, with grain-aware
//! lookups. Facts are loaded as-is; every transformation happens at query
//! time.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::code_db::{DimensionDb, ProgramDb};
use crate::lang::{EntityId, NodeKind};
use crate::runtime::{input_sha256, ExecTrace, RuntimeValue, BLOCK_FACTS_HEADER, RUNS_HEADER, VALUE_FACTS_HEADER};

#[derive(Debug, thiserror::Error)]
pub enum WarehouseError {
    #[error("{file}: bad header, expected `{expected}`")]
    Schema { file: String, expected: String },
    #[error("{file}: row {row}: {message}")]
    Parse { file: String, row: usize, message: String },
    #[error("{file}: row {row}: unknown {what} {id}")]
    ForeignKey { file: String, row: usize, what: &'static str, id: u64 },
    #[error("facts were produced for dimension generation {found}, loaded dimensions are {expected}")]
    GenerationMismatch { expected: String, found: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("access {0} has no recorded values")]
    UnmonitoredAccess(EntityId),
    #[error("access {0} has no values matching the filter")]
    EmptySeries(EntityId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunRow {
    pub run_id: u64,
    pub input_sha256: String,
    pub exit: String,
    pub blocks_executed: u64,
    pub dim_generation: String,
}

impl RunRow {
    pub fn truncated(&self) -> bool {
        self.exit.ends_with(";truncated")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockFactRow {
    pub run_id: u64,
    pub tick: u64,
    pub block: EntityId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValueFactRow {
    pub run_id: u64,
    pub tick: u64,
    pub access: EntityId,
    pub value: RuntimeValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct GrainKey {
    pub run_id: u64,
    pub tick: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    Exact,
    LatestBefore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RunFilter {
    #[default]
    All,
    /// Inclusive run-id range.
    Range(u64, u64),
}

impl RunFilter {
    pub fn accepts(self, run: u64) -> bool {
        match self {
            RunFilter::All => true,
            RunFilter::Range(lo, hi) => (lo..=hi).contains(&run),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AlignedRow {
    pub run_id: u64,
    pub tick: u64,
    pub rhs: RuntimeValue,
    pub lhs: BTreeMap<EntityId, RuntimeValue>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AlignedPairs {
    pub rows: Vec<AlignedRow>,
    /// Observations of the right-hand side that lacked some left-hand value.
    pub dropped: usize,
}

/// The loaded fact tables. Immutable once built.
#[derive(Debug, Clone, Default)]
pub struct FactStore {
    pub block_facts: Vec<BlockFactRow>,
    pub value_facts: Vec<ValueFactRow>,
    pub runs: Vec<RunRow>,
    pub dim_generation: String,
    /// Per access, per run: indices into `value_facts` in emission order.
    index: HashMap<EntityId, BTreeMap<u64, Vec<usize>>>,
}

/// Accumulates traces into a store without keeping the traces themselves.
#[derive(Debug, Default)]
pub struct FactStoreBuilder {
    generation: String,
    blocks: Vec<BlockFactRow>,
    values: Vec<ValueFactRow>,
    runs: Vec<RunRow>,
}

impl FactStoreBuilder {
    pub fn new(generation: &str) -> FactStoreBuilder {
        FactStoreBuilder { generation: generation.to_string(), ..FactStoreBuilder::default() }
    }

    pub fn push(&mut self, t: &ExecTrace, input: &[u8]) {
        self.blocks.extend(t.block_facts.iter().map(|&(tick, block)| BlockFactRow { run_id: t.run_id, tick, block }));
        self.values.extend(t.value_facts.iter().map(|f| ValueFactRow {
            run_id: t.run_id,
            tick: f.tick,
            access: f.access,
            value: f.value,
        }));
        self.runs.push(RunRow {
            run_id: t.run_id,
            input_sha256: input_sha256(input),
            exit: t.exit_label(),
            blocks_executed: t.blocks_executed,
            dim_generation: self.generation.clone(),
        });
    }

    pub fn finish(self) -> FactStore {
        FactStore::assemble(self.blocks, self.values, self.runs, self.generation)
    }
}

struct Reader {
    file: String,
    rows: Vec<csv::StringRecord>,
}

impl Reader {
    fn open(dir: &Path, name: &str, header: &[&str]) -> Result<Reader, WarehouseError> {
        let path = dir.join(name);
        let bytes = fs::read(&path).map_err(|source| WarehouseError::Io { path: path.clone(), source })?;
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes.as_slice());
        let schema = || WarehouseError::Schema { file: name.to_string(), expected: header.join(",") };
        let head = r.headers().map_err(|_| schema())?;
        if head.iter().ne(header.iter().copied()) {
            return Err(schema());
        }
        let rows = r
            .records()
            .enumerate()
            .map(|(i, rec)| {
                rec.map_err(|e| WarehouseError::Parse { file: name.to_string(), row: i + 2, message: e.to_string() })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Reader { file: name.to_string(), rows })
    }

    fn field<T: std::str::FromStr>(&self, i: usize, col: usize) -> Result<T, WarehouseError> {
        self.rows[i].get(col).and_then(|s| s.parse().ok()).ok_or_else(|| WarehouseError::Parse {
            file: self.file.clone(),
            row: i + 2,
            message: format!("bad value in column {}", col + 1),
        })
    }

    fn fk(&self, i: usize, what: &'static str, id: u64) -> WarehouseError {
        WarehouseError::ForeignKey { file: self.file.clone(), row: i + 2, what, id }
    }
}

/// Reads `block_facts.csv`, `value_facts.csv` and `runs.csv` from `dir`,
/// validating headers, foreign keys and the dimension generation. Row numbers
/// in errors are file line numbers.
pub fn load_facts(dim: &DimensionDb, dir: &Path) -> Result<FactStore, WarehouseError> {
    let blocks: HashSet<EntityId> = dim.basic_blocks.iter().map(|b| b.id).collect();
    let accesses: HashSet<EntityId> = dim.variable_accesses.iter().map(|a| a.id).collect();

    let r = Reader::open(dir, "runs.csv", &RUNS_HEADER)?;
    let mut runs = Vec::with_capacity(r.rows.len());
    for i in 0..r.rows.len() {
        let row = RunRow {
            run_id: r.field(i, 0)?,
            input_sha256: r.rows[i][1].to_string(),
            exit: r.rows[i][2].to_string(),
            blocks_executed: r.field(i, 3)?,
            dim_generation: r.rows[i][4].to_string(),
        };
        if row.dim_generation != dim.generation {
            return Err(WarehouseError::GenerationMismatch {
                expected: dim.generation.clone(),
                found: row.dim_generation,
            });
        }
        runs.push(row);
    }
    let run_ids: HashSet<u64> = runs.iter().map(|r| r.run_id).collect();

    let r = Reader::open(dir, "block_facts.csv", &BLOCK_FACTS_HEADER)?;
    let mut block_facts = Vec::with_capacity(r.rows.len());
    for i in 0..r.rows.len() {
        let row = BlockFactRow { run_id: r.field(i, 0)?, tick: r.field(i, 1)?, block: EntityId(r.field(i, 2)?) };
        if !run_ids.contains(&row.run_id) {
            return Err(r.fk(i, "run", row.run_id));
        }
        if !blocks.contains(&row.block) {
            return Err(r.fk(i, "block", row.block.0));
        }
        block_facts.push(row);
    }

    let r = Reader::open(dir, "value_facts.csv", &VALUE_FACTS_HEADER)?;
    let mut value_facts = Vec::with_capacity(r.rows.len());
    for i in 0..r.rows.len() {
        let row = ValueFactRow {
            run_id: r.field(i, 0)?,
            tick: r.field(i, 1)?,
            access: EntityId(r.field(i, 2)?),
            value: r.field(i, 3)?,
        };
        if !run_ids.contains(&row.run_id) {
            return Err(r.fk(i, "run", row.run_id));
        }
        if !accesses.contains(&row.access) {
            return Err(r.fk(i, "access", row.access.0));
        }
        value_facts.push(row);
    }
    Ok(FactStore::assemble(block_facts, value_facts, runs, dim.generation.clone()))
}

impl FactStore {
    fn assemble(
        block_facts: Vec<BlockFactRow>,
        value_facts: Vec<ValueFactRow>,
        runs: Vec<RunRow>,
        dim_generation: String,
    ) -> FactStore {
        let mut index: HashMap<EntityId, BTreeMap<u64, Vec<usize>>> = HashMap::new();
        for (i, f) in value_facts.iter().enumerate() {
            index.entry(f.access).or_default().entry(f.run_id).or_default().push(i);
        }
        FactStore { block_facts, value_facts, runs, dim_generation, index }
    }

    /// Builds a store from in-memory traces, exactly as if they had been
    /// written with the fact writer and loaded back.
    pub fn from_traces<'a>(
        generation: &str,
        traces: impl IntoIterator<Item = (&'a ExecTrace, &'a [u8])>,
    ) -> FactStore {
        let mut b = FactStoreBuilder::new(generation);
        for (t, input) in traces {
            b.push(t, input);
        }
        b.finish()
    }

    /// Writes the three tables back to `dir` in their loaded order.
    pub fn export(&self, dir: &Path) -> Result<Vec<PathBuf>, WarehouseError> {
        fs::create_dir_all(dir).map_err(|source| WarehouseError::Io { path: dir.to_path_buf(), source })?;
        let write = |name: &str, header: &[&str], rows: Vec<Vec<String>>| -> Result<PathBuf, WarehouseError> {
            let path = dir.join(name);
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
            let bad = |e: csv::Error| WarehouseError::Parse { file: name.to_string(), row: 0, message: e.to_string() };
            w.write_record(header).map_err(bad)?;
            for r in rows {
                w.write_record(&r).map_err(bad)?;
            }
            let bytes = w.into_inner().map_err(|e| WarehouseError::Parse {
                file: name.to_string(),
                row: 0,
                message: e.to_string(),
            })?;
            fs::write(&path, bytes).map_err(|source| WarehouseError::Io { path: path.clone(), source })?;
            Ok(path)
        };
        Ok(vec![
            write(
                "block_facts.csv",
                &BLOCK_FACTS_HEADER,
                self.block_facts
                    .iter()
                    .map(|f| vec![f.run_id.to_string(), f.tick.to_string(), f.block.0.to_string()])
                    .collect(),
            )?,
            write(
                "value_facts.csv",
                &VALUE_FACTS_HEADER,
                self.value_facts
                    .iter()
                    .map(|f| vec![f.run_id.to_string(), f.tick.to_string(), f.access.0.to_string(), f.value.to_string()])
                    .collect(),
            )?,
            write(
                "runs.csv",
                &RUNS_HEADER,
                self.runs
                    .iter()
                    .map(|r| {
                        vec![
                            r.run_id.to_string(),
                            r.input_sha256.clone(),
                            r.exit.clone(),
                            r.blocks_executed.to_string(),
                            r.dim_generation.clone(),
                        ]
                    })
                    .collect(),
            )?,
        ])
    }

    fn rows_of(&self, access: EntityId, run: u64) -> &[usize] {
        self.index.get(&access).and_then(|m| m.get(&run)).map_or(&[], Vec::as_slice)
    }

    /// Whether any value was ever recorded for `access`.
    pub fn is_monitored(&self, access: EntityId) -> bool {
        self.index.contains_key(&access)
    }

    /// Monitored accesses present in the store.
    pub fn monitored(&self) -> BTreeSet<EntityId> {
        self.index.keys().copied().collect()
    }

    /// Value of `access` at a grain point. When several evaluations share a
    /// tick the latest one wins.
    pub fn value_at(&self, access: EntityId, at: GrainKey, policy: Policy) -> Option<RuntimeValue> {
        let rows = self.rows_of(access, at.run_id);
        let upto = rows.partition_point(|&i| self.value_facts[i].tick <= at.tick);
        let last = &self.value_facts[*rows[..upto].last()?];
        match policy {
            Policy::LatestBefore => Some(last.value),
            Policy::Exact => (last.tick == at.tick).then_some(last.value),
        }
    }

    /// All values of `access` in (run, emission) order.
    pub fn series(&self, access: EntityId, runs: RunFilter, numeric_only: bool) -> Result<Vec<RuntimeValue>, WarehouseError> {
        let per_run = self.index.get(&access).ok_or(WarehouseError::UnmonitoredAccess(access))?;
        let out: Vec<RuntimeValue> = per_run
            .iter()
            .filter(|(run, _)| runs.accepts(**run))
            .flat_map(|(_, rows)| rows.iter().map(|&i| self.value_facts[i].value))
            .filter(|v| !numeric_only || !v.is_addr())
            .collect();
        if out.is_empty() {
            return Err(WarehouseError::EmptySeries(access));
        }
        Ok(out)
    }

    /// One row per observation of `rhs`, each `lhs` access filled with its
    /// most recent value in the same run. "Most recent" follows evaluation
    /// order, which refines tick order within a block.
    pub fn aligned_pairs(&self, lhs: &BTreeSet<EntityId>, rhs: EntityId) -> AlignedPairs {
        let mut out = AlignedPairs::default();
        for row in self.aligned_partial(lhs, rhs) {
            if row.lhs.len() == lhs.len() {
                out.rows.push(row);
            } else {
                out.dropped += 1;
            }
        }
        out
    }

    /// Like [`FactStore::aligned_pairs`] but keeps rows where only some of
    /// the `lhs` accesses have a value.
    pub fn aligned_partial(&self, lhs: &BTreeSet<EntityId>, rhs: EntityId) -> Vec<AlignedRow> {
        let mut out = Vec::new();
        let Some(per_run) = self.index.get(&rhs) else {
            return out;
        };
        for (&run, rows) in per_run {
            let lhs_rows: Vec<(EntityId, &[usize])> = lhs.iter().map(|a| (*a, self.rows_of(*a, run))).collect();
            for &i in rows {
                let obs = &self.value_facts[i];
                let mut vals = BTreeMap::new();
                for (a, lr) in &lhs_rows {
                    let upto = lr.partition_point(|&j| j <= i);
                    if upto > 0 {
                        vals.insert(*a, self.value_facts[lr[upto - 1]].value);
                    }
                }
                out.push(AlignedRow { run_id: run, tick: obs.tick, rhs: obs.value, lhs: vals });
            }
        }
        out
    }

    /// Per-run block sequences in tick order.
    pub fn block_sequences(&self) -> BTreeMap<u64, Vec<EntityId>> {
        let mut out: BTreeMap<u64, Vec<(u64, EntityId)>> = BTreeMap::new();
        for f in &self.block_facts {
            out.entry(f.run_id).or_default().push((f.tick, f.block));
        }
        out.into_iter()
            .map(|(r, mut v)| {
                v.sort_unstable();
                (r, v.into_iter().map(|(_, b)| b).collect())
            })
            .collect()
    }

    pub fn block_counts(&self) -> BTreeMap<EntityId, u64> {
        let mut out = BTreeMap::new();
        for f in &self.block_facts {
            *out.entry(f.block).or_insert(0) += 1;
        }
        out
    }

    /// Traversal counts of CFG edges, reconstructed from block sequences with
    /// a call stack: entering a function's entry block pushes a frame and a
    /// block that does not continue the current frame returns to a caller.
    pub fn edge_counts(&self, db: &ProgramDb) -> BTreeMap<(EntityId, EntityId), u64> {
        let edges: HashSet<(EntityId, EntityId)> = db.dims.cfg_edges.iter().map(|e| (e.src, e.dst)).collect();
        let entries: HashSet<EntityId> = db.dims.functions.iter().map(|f| db.entry_block(f.id)).collect();
        let mut out = BTreeMap::new();
        for seq in self.block_sequences().values() {
            let mut stack: Vec<EntityId> = Vec::new();
            for &b in seq {
                if entries.contains(&b) {
                    stack.push(b);
                    continue;
                }
                while let Some(top) = stack.last() {
                    if edges.contains(&(*top, b)) {
                        *out.entry((*top, b)).or_insert(0) += 1;
                        break;
                    }
                    stack.pop();
                }
                match stack.last_mut() {
                    Some(top) => *top = b,
                    None => stack.push(b),
                }
            }
        }
        out
    }

    /// Execution counts per source line of every statement in an executed
    /// block, and zero for statements never reached.
    pub fn line_hits(&self, db: &ProgramDb) -> BTreeMap<(String, u32), u64> {
        line_hits(db, &self.block_counts())
    }
}

/// Lines that hold a simple statement (blocks themselves are excluded).
pub fn coverable_lines(db: &ProgramDb) -> BTreeSet<(String, u32)> {
    line_hits(db, &BTreeMap::new()).into_keys().collect()
}

fn line_hits(db: &ProgramDb, counts: &BTreeMap<EntityId, u64>) -> BTreeMap<(String, u32), u64> {
    let mut out: BTreeMap<(String, u32), u64> = BTreeMap::new();
    for b in &db.dims.basic_blocks {
        let n = counts.get(&b.id).copied().unwrap_or(0);
        for s in &b.statements {
            let node = db.ast.node(*s);
            if node.kind == NodeKind::Block {
                continue;
            }
            let e = out.entry((node.loc.file.clone(), node.loc.start_line)).or_insert(0);
            *e = (*e).max(n);
        }
    }
    out
}

/// Fraction of coverable lines executed at least once.
pub fn line_coverage(db: &ProgramDb, store: &FactStore) -> f64 {
    let hits = store.line_hits(db);
    if hits.is_empty() {
        return 0.0;
    }
    hits.values().filter(|n| **n > 0).count() as f64 / hits.len() as f64
}

#[cfg(test)]
mod tests;
