#![allow(dead_code)]

//! Grain lookups checked against a linear replay of the raw traces.

use std::collections::BTreeSet;

use fuzzlens_core::code_db::ProgramDb;
use fuzzlens_core::runtime::{execute, ExecTrace, RuntimeValue};
use fuzzlens_core::warehouse::{load_facts, FactStore, GrainKey, Policy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Loops long enough to pass tick 1000 on most inputs.
pub const LOOPING: &str = "u32 acc;
u32 hi;
void main(u8* data, u64 n) {
  u64 i = 0;
  while (i < n) {
    acc = acc + data[i];
    if (data[i] > 200) {
      hi = hi + 1;
    }
    i = i + 1;
  }
}
";

/// Value the replay assigns to `access` at `tick`: the last evaluation whose
/// tick is not later, required to be at exactly `tick` under `Exact`.
pub fn replay(t: &ExecTrace, access: u64, tick: u64, policy: Policy) -> Option<RuntimeValue> {
    let mut last = None;
    for f in &t.value_facts {
        if f.access.0 == access && f.tick <= tick {
            last = Some(f);
        }
    }
    let f = last?;
    match policy {
        Policy::LatestBefore => Some(f.value),
        Policy::Exact => (f.tick == tick).then_some(f.value),
    }
}

/// Random inputs of 200 to 500 bytes, long enough to drive [`LOOPING`]
/// past tick 1000.
pub fn long_inputs(seed: u64, runs: u64) -> Vec<Vec<u8>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..runs).map(|_| (0..rng.random_range(200..500)).map(|_| rng.random()).collect()).collect()
}

/// Runs `inputs` with every access monitored, round-trips the facts through
/// CSV and probes `probes` random grain points plus tick 1000 in every run.
/// Returns the number of probes checked.
pub fn probe(db: &ProgramDb, inputs: &[Vec<u8>], probes: usize, seed: u64, dir: &std::path::Path) -> Result<usize, String> {
    let monitor: BTreeSet<_> = db.dims.variable_accesses.iter().map(|a| a.id).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let traces: Vec<ExecTrace> =
        inputs.iter().enumerate().map(|(i, x)| execute(db, x, &monitor, i as u64, 100_000)).collect();
    FactStore::from_traces(db.generation(), traces.iter().zip(inputs.iter().map(Vec::as_slice)))
        .export(dir)
        .map_err(|e| e.to_string())?;
    let store = load_facts(&db.dims, dir).map_err(|e| e.to_string())?;

    let accesses: Vec<_> = monitor.iter().copied().collect();
    let mut checked = 0;
    for t in &traces {
        let max_tick = t.block_facts.last().map_or(1, |b| b.0);
        // Half the probes land on a recorded evaluation so `Exact` gets hits.
        let mut points: Vec<(u64, _)> = (0..probes)
            .map(|_| match t.value_facts.is_empty() || rng.random_bool(0.5) {
                true => (rng.random_range(1..=max_tick + 5), accesses[rng.random_range(0..accesses.len())]),
                false => {
                    let f = &t.value_facts[rng.random_range(0..t.value_facts.len())];
                    (f.tick, f.access)
                }
            })
            .collect();
        points.push((1000, accesses[rng.random_range(0..accesses.len())]));
        for (tick, access) in points {
            let at = GrainKey { run_id: t.run_id, tick };
            for policy in [Policy::Exact, Policy::LatestBefore] {
                let got = store.value_at(access, at, policy);
                let want = replay(t, access.0, tick, policy);
                if got != want {
                    return Err(format!("run {} tick {tick} access {access} {policy:?}: got {got:?}, want {want:?}", t.run_id));
                }
            }
            let exact = store.value_at(access, at, Policy::Exact);
            if exact.is_some() && exact != store.value_at(access, at, Policy::LatestBefore) {
                return Err(format!("Exact is not refined by LatestBefore at run {} tick {tick}", t.run_id));
            }
            checked += 1;
        }
    }
    Ok(checked)
}
