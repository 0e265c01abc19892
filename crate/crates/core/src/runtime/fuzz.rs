//! Mutation-based, coverage-guided fuzzing loop.
//!
//! Inputs for a batch are derived sequentially from the PRNG, executed
//! (possibly in parallel) and merged back in run-id order, so a campaign
//! depends only on its seed and never on thread scheduling.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::code_db::ProgramDb;
use crate::lang::EntityId;
use crate::par::{self, ExecMode};

use super::{input_sha256, ExecTrace, Program, DEFAULT_BUDGET, DEFAULT_EXEC_LIMIT};

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub seeds: Vec<Vec<u8>>,
    /// Covered CFG edges as `(src_block, dst_block)`.
    pub coverage: BTreeSet<(EntityId, EntityId)>,
    hashes: HashSet<String>,
}

impl Corpus {
    pub fn new() -> Corpus {
        Corpus::default()
    }

    pub fn from_seeds(seeds: impl IntoIterator<Item = Vec<u8>>) -> Corpus {
        let mut c = Corpus::new();
        for s in seeds {
            c.insert(s);
        }
        c
    }

    /// Adds a seed unless an identical one is present.
    pub fn insert(&mut self, input: Vec<u8>) -> bool {
        if self.hashes.insert(input_sha256(&input)) {
            self.seeds.push(input);
            true
        } else {
            false
        }
    }

    pub fn len(&self) -> usize {
        self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct FuzzOptions {
    pub exec_limit: u64,
    pub seed: u64,
    /// Block budget per execution.
    pub budget: u64,
    pub max_len: usize,
    pub batch_size: usize,
    pub mode: ExecMode,
    pub first_run_id: u64,
}

impl Default for FuzzOptions {
    fn default() -> Self {
        FuzzOptions {
            exec_limit: DEFAULT_EXEC_LIMIT,
            seed: 0,
            budget: DEFAULT_BUDGET,
            max_len: 1024,
            batch_size: 256,
            mode: ExecMode::Parallel,
            first_run_id: 0,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct FuzzReport {
    pub corpus: Corpus,
    pub execs: u64,
    pub next_run_id: u64,
    /// Non-`ok` runs with their inputs.
    pub crashes: Vec<(u64, Vec<u8>)>,
    /// Run ids whose input joined the corpus.
    pub admitted: Vec<u64>,
    /// Execution count (1-based) at which each edge was first covered.
    pub first_hit: BTreeMap<(EntityId, EntityId), u64>,
}

/// Distinct literal and `#define` values, the dictionary for constant
/// substitution.
pub fn harvest_constants(db: &ProgramDb) -> Vec<u64> {
    let set: BTreeSet<u64> =
        db.dims.literals.iter().map(|l| l.value).chain(db.dims.constants.iter().map(|c| c.value)).collect();
    set.into_iter().collect()
}

fn mutate(rng: &mut ChaCha8Rng, parent: &[u8], corpus: &[Vec<u8>], pool: &[u64], max_len: usize) -> Vec<u8> {
    let mut d = parent.to_vec();
    let rounds = rng.random_range(1..=4);
    for _ in 0..rounds {
        match rng.random_range(0..6) {
            0 if !d.is_empty() => {
                let i = rng.random_range(0..d.len());
                d[i] ^= 1 << rng.random_range(0..8);
            }
            1 if !d.is_empty() => {
                let i = rng.random_range(0..d.len());
                d[i] = rng.random();
            }
            2 if !d.is_empty() => {
                let i = rng.random_range(0..d.len());
                let delta = rng.random_range(1..=35u8);
                d[i] = if rng.random_bool(0.5) { d[i].wrapping_add(delta) } else { d[i].wrapping_sub(delta) };
            }
            3 if !pool.is_empty() => {
                let v = pool[rng.random_range(0..pool.len())];
                let w = if rng.random_bool(0.5) { 2 } else { 4 };
                if d.len() < w {
                    d.resize(w, 0);
                }
                let i = rng.random_range(0..=d.len() - w);
                d[i..i + w].copy_from_slice(&v.to_le_bytes()[..w]);
            }
            4 => {
                if !d.is_empty() && rng.random_bool(0.5) {
                    d.truncate(rng.random_range(0..d.len()));
                } else {
                    for _ in 0..rng.random_range(1..=16) {
                        d.push(rng.random());
                    }
                }
            }
            5 => {
                let other = &corpus[rng.random_range(0..corpus.len())];
                let cut = rng.random_range(0..=d.len());
                let from = rng.random_range(0..=other.len());
                d.truncate(cut);
                d.extend_from_slice(&other[from..]);
            }
            _ => {
                let i = rng.random_range(0..=d.len());
                d.insert(i, rng.random());
            }
        }
    }
    d.truncate(max_len);
    d
}

/// Runs a campaign of `opts.exec_limit` executions. Every trace is passed to
/// `sink` together with its input, in run-id order; an error from the sink
/// stops the campaign.
pub fn fuzz<E>(
    db: &ProgramDb,
    initial: Corpus,
    monitor: &BTreeSet<EntityId>,
    opts: &FuzzOptions,
    mut sink: impl FnMut(&ExecTrace, &[u8]) -> Result<(), E>,
) -> Result<FuzzReport, E> {
    let prog = Program::new(db);
    let mask = prog.monitor_mask(monitor);
    let pool = harvest_constants(db);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut corpus = if initial.is_empty() { Corpus::from_seeds([vec![0u8; 16]]) } else { initial };
    let mut report = FuzzReport { next_run_id: opts.first_run_id, ..FuzzReport::default() };

    // Initial seeds run first and stay in the corpus regardless of coverage.
    let mut pending: Vec<Vec<u8>> = corpus.seeds.clone();
    let mut seeding = true;
    while report.execs < opts.exec_limit {
        let room = (opts.exec_limit - report.execs) as usize;
        if !seeding {
            let n = room.min(opts.batch_size.max(1));
            pending = (0..n)
                .map(|_| {
                    let parent = &corpus.seeds[rng.random_range(0..corpus.seeds.len())];
                    mutate(&mut rng, parent, &corpus.seeds, &pool, opts.max_len)
                })
                .collect();
        }
        pending.truncate(room);
        let batch: Vec<(u64, Vec<u8>)> =
            pending.drain(..).enumerate().map(|(i, input)| (report.next_run_id + i as u64, input)).collect();
        let traces = par::map(opts.mode, &batch, |(run, input)| prog.execute(input, &mask, *run, opts.budget));
        for ((run, input), trace) in batch.into_iter().zip(traces) {
            report.execs += 1;
            report.next_run_id = run + 1;
            let mut new_edge = false;
            for &e in &trace.edges {
                let edge = &db.dims.cfg_edges[e as usize];
                if corpus.coverage.insert((edge.src, edge.dst)) {
                    report.first_hit.insert((edge.src, edge.dst), report.execs);
                    new_edge = true;
                }
            }
            sink(&trace, &input)?;
            if trace.exit.is_crash() {
                report.crashes.push((run, input.clone()));
            }
            if !seeding && new_edge && corpus.insert(input) {
                report.admitted.push(run);
            }
        }
        seeding = false;
    }
    report.corpus = corpus;
    Ok(report)
}
