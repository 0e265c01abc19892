use std::collections::{BTreeSet, HashMap};

use super::*;
use crate::corpus;
use crate::lang::NodeKind;
use crate::par::ExecMode;

fn decl(db: &ProgramDb, name: &str) -> EntityId {
    db.ast.nodes().iter().find(|n| n.kind == NodeKind::VarDecl && n.attrs.name.as_deref() == Some(name)).unwrap().id
}

fn crafted() -> Vec<u8> {
    let x = 0x5555_5555u32 ^ 0xA5A5_A5A5;
    let mut v = x.to_le_bytes().to_vec();
    v.extend([3, 0, 1, 0]);
    v
}

/// Checks that every block transition is a CFG edge, a call into an entry
/// block, or a return to a caller's successor block.
fn conforms(db: &ProgramDb, trace: &ExecTrace) -> bool {
    let edges: BTreeSet<(EntityId, EntityId)> = db.dims.cfg_edges.iter().map(|e| (e.src, e.dst)).collect();
    let entries: BTreeSet<EntityId> = db.dims.functions.iter().map(|f| db.entry_block(f.id)).collect();
    let mut stack: Vec<EntityId> = Vec::new();
    for &(_, b) in &trace.block_facts {
        if entries.contains(&b) {
            stack.push(b);
            continue;
        }
        loop {
            match stack.last() {
                Some(top) if edges.contains(&(*top, b)) => break,
                Some(_) => {
                    stack.pop();
                }
                None => return false,
            }
        }
        *stack.last_mut().unwrap() = b;
    }
    true
}

#[test]
fn crafted_input_reaches_the_abort() {
    let db = corpus::program("motivating").unwrap().db().unwrap();
    let t = decl(&db, "t");
    let trace = execute(&db, &crafted(), &BTreeSet::from([t]), 0, DEFAULT_BUDGET);
    assert_eq!(trace.exit, Exit::Abort);
    assert_eq!(trace.value_facts.len(), 1);
    assert_eq!(trace.value_facts[0].value, RuntimeValue::Int(0xFFFF_FFFF));
    assert!(conforms(&db, &trace));
}

#[test]
fn short_input_takes_only_the_early_return() {
    let db = corpus::program("motivating").unwrap().db().unwrap();
    let trace = execute(&db, &[1, 2, 3], &BTreeSet::new(), 0, DEFAULT_BUDGET);
    assert_eq!(trace.exit, Exit::Ok);
    assert_eq!(trace.blocks_executed, 2);
    let driver_blocks: BTreeSet<EntityId> =
        db.dims.basic_blocks.iter().filter(|b| b.function == db.driver).map(|b| b.id).collect();
    assert!(trace.block_facts.iter().all(|(_, b)| driver_blocks.contains(b)));
    assert!(trace.value_facts.is_empty());
    let ticks: Vec<u64> = trace.block_facts.iter().map(|(t, _)| *t).collect();
    assert_eq!(ticks, vec![1, 2]);
}

#[test]
fn pointers_to_the_same_object_compare_equal() {
    let db = corpus::program("motivating").unwrap().db().unwrap();
    let img = decl(&db, "img");
    let imgp = decl(&db, "imgp");
    let trace = execute(&db, &[0; 8], &BTreeSet::from([img, imgp]), 0, DEFAULT_BUDGET);
    let vals: Vec<RuntimeValue> = trace.value_facts.iter().map(|f| f.value).collect();
    assert_eq!(vals.len(), 2);
    assert_eq!(vals[0], vals[1]);
    assert!(vals[0].is_addr());
    assert!(trace.value_facts[0].tick <= trace.value_facts[1].tick);
}

#[test]
fn budget_stops_runaway_loops() {
    let db = ProgramDb::from_source("l.mc", "void main(u8* d, u64 n) {\n  while (1) { n = n + 1; }\n}", "main").unwrap();
    let trace = execute(&db, &[], &BTreeSet::new(), 0, 500);
    assert_eq!(trace.exit, Exit::Error("budget".into()));
    assert_eq!(trace.blocks_executed, 500);
    assert!(conforms(&db, &trace));
}

#[test]
fn runtime_faults_carry_locations() {
    let db = ProgramDb::from_source("f.mc", "u32 main(u8* d, u64 n) {\n  u32 z = 0;\n  return 7 / z;\n}", "main").unwrap();
    match execute(&db, &[], &BTreeSet::new(), 0, 100).exit {
        Exit::Error(m) => assert!(m.starts_with("f.mc:3:10") && m.contains("division by zero"), "{m}"),
        e => panic!("{e:?}"),
    }
    let db = ProgramDb::from_source("f.mc", "u32 main(u8* d, u64 n) {\n  return d[n];\n}", "main").unwrap();
    match execute(&db, &[1, 2], &BTreeSet::new(), 0, 100).exit {
        Exit::Error(m) => assert!(m.contains("out-of-bounds"), "{m}"),
        e => panic!("{e:?}"),
    }
}

#[test]
fn widths_wrap_and_u64_compares_unsigned() {
    let src = "u32 out;\nu64 big;\ni32 neg;\nvoid main(u8* d, u64 n) {\n  u8 b = 250;\n  b = b + 10;\n  out = b;\n  big = 0 - 1;\n  if (big > 5) { out = out + 100; }\n  neg = 0 - 1;\n  if (neg < 5) { out = out + 1000; }\n}";
    let db = ProgramDb::from_source("w.mc", src, "main").unwrap();
    let ids: BTreeSet<EntityId> = ["out", "big", "neg"].iter().map(|n| decl(&db, n)).collect();
    let prog = Program::new(&db);
    let writes: BTreeSet<EntityId> = db
        .dims
        .variable_accesses
        .iter()
        .filter(|a| a.is_write && ids.iter().any(|d| a.symbol == format!("{}@{}", db.ast.node(*d).attrs.name.as_ref().unwrap(), d)))
        .map(|a| a.id)
        .collect();
    let trace = prog.execute(&[], &prog.monitor_mask(&writes), 0, 100);
    let last: Vec<String> = trace.value_facts.iter().map(|f| f.value.to_string()).collect();
    assert_eq!(last, vec!["4", "18446744073709551615", "104", "-1", "1104"]);
}

#[test]
fn identical_runs_give_identical_traces() {
    let db = corpus::program("config_flags").unwrap().db().unwrap();
    let all: BTreeSet<EntityId> = db.dims.variable_accesses.iter().map(|a| a.id).collect();
    let input: Vec<u8> = (0..40u8).map(|i| i.wrapping_mul(37)).collect();
    let a = execute(&db, &input, &all, 3, DEFAULT_BUDGET);
    let b = execute(&db, &input, &all, 3, DEFAULT_BUDGET);
    assert_eq!(a, b);
    assert!(conforms(&db, &a));
    let empty = execute(&db, &input, &BTreeSet::new(), 3, DEFAULT_BUDGET);
    assert!(empty.value_facts.is_empty());
    assert_eq!(empty.block_facts, a.block_facts);
}

#[test]
fn fact_files_have_one_row_per_event() {
    let db = ProgramDb::from_source("o.mc", "u32 g;\nvoid main(u8* d, u64 n) {\n  if (n) { g = 1; }\n}", "main").unwrap();
    let g_write = db.dims.variable_accesses.iter().find(|a| a.is_write && a.loc.start_line == 3).unwrap().id;
    let trace = execute(&db, &[9], &BTreeSet::from([g_write]), 0, 100);
    assert_eq!(trace.block_facts.len(), 3);
    let dir = tempfile::tempdir().unwrap();
    write_fact_csv([(&trace, &[9u8][..])], dir.path(), db.generation()).unwrap();
    let read = |n: &str| std::fs::read_to_string(dir.path().join(n)).unwrap();
    assert_eq!(read("block_facts.csv").lines().count(), 4);
    assert_eq!(read("value_facts.csv"), format!("run_id,tick,access_id,value\n0,2,{},1\n", g_write.0));
    let runs = read("runs.csv");
    assert!(runs.lines().nth(1).unwrap().ends_with(&format!(",ok,3,{}", db.generation())));
    // A second writer appends without repeating the header.
    write_fact_csv([(&trace, &[9u8][..])], dir.path(), db.generation()).unwrap();
    assert_eq!(read("runs.csv").lines().count(), 3);
}

fn campaign(name: &str, execs: u64, seed: u64, mode: ExecMode) -> (FuzzReport, Vec<ExecTrace>) {
    let db = corpus::program(name).unwrap().db().unwrap();
    let mut traces = Vec::new();
    let opts = FuzzOptions { exec_limit: execs, seed, mode, ..FuzzOptions::default() };
    let report = fuzz(&db, Corpus::new(), &BTreeSet::new(), &opts, |t, _| {
        traces.push(t.clone());
        Ok::<(), ()>(())
    })
    .unwrap();
    (report, traces)
}

#[test]
fn single_block_program_keeps_one_seed() {
    let db = ProgramDb::from_source("s.mc", "u32 g;\nvoid main(u8* d, u64 n) {\n  g = n;\n}", "main").unwrap();
    let opts = FuzzOptions { exec_limit: 2000, ..FuzzOptions::default() };
    let r = fuzz(&db, Corpus::new(), &BTreeSet::new(), &opts, |_, _| Ok::<(), ()>(())).unwrap();
    assert_eq!(r.corpus.len(), 1);
    assert_eq!(r.execs, 2000);
}

#[test]
fn byte_gate_opens_and_corpus_grows() {
    let src = "u32 hits;\nvoid main(u8* data, u64 size) {\n  if (size < 1) return;\n  if (data[0] == 'A') { hits = hits + 1; }\n}";
    let db = ProgramDb::from_source("a.mc", src, "main").unwrap();
    let gate = db.ast.nodes().iter().filter(|n| n.kind == NodeKind::If).nth(1).unwrap().id;
    let Some(&crate::code_db::Layout::If { then_block, .. }) = db.layout(gate) else { panic!() };
    let true_edge = (db.block_of(gate).unwrap(), then_block);
    let opts = FuzzOptions { exec_limit: 50_000, seed: 1, ..FuzzOptions::default() };
    let r = fuzz(&db, Corpus::new(), &BTreeSet::new(), &opts, |_, _| Ok::<(), ()>(())).unwrap();
    assert!(r.corpus.coverage.contains(&true_edge));
    assert!(r.corpus.len() >= 2);
    assert!(r.first_hit[&true_edge] <= 50_000);
}

#[test]
fn input_independent_flag_gate_is_never_covered() {
    let db = corpus::program("motivating").unwrap().db().unwrap();
    let (r, traces) = campaign("motivating", 3000, 7, ExecMode::Parallel);
    let if33 = db.entity_at("motivating.mc", 33, 3).unwrap();
    let Some(&crate::code_db::Layout::If { then_block, .. }) = db.layout(if33) else { panic!() };
    assert!(!r.corpus.coverage.contains(&(db.block_of(if33).unwrap(), then_block)));
    assert!(traces.iter().all(|t| !t.block_facts.iter().any(|(_, b)| *b == then_block)));
    // Every corpus seed replays to coverage already in the map.
    let prog = Program::new(&db);
    for s in &r.corpus.seeds {
        let t = prog.execute(s, &[], 0, DEFAULT_BUDGET);
        for e in t.edges {
            let e = &db.dims.cfg_edges[e as usize];
            assert!(r.corpus.coverage.contains(&(e.src, e.dst)));
        }
    }
}

#[test]
fn parallel_and_sequential_campaigns_agree() {
    let (a, ta) = campaign("magic_gate", 1500, 11, ExecMode::Parallel);
    let (b, tb) = campaign("magic_gate", 1500, 11, ExecMode::Sequential);
    assert_eq!(a.corpus.seeds, b.corpus.seeds);
    assert_eq!(a.corpus.coverage, b.corpus.coverage);
    assert_eq!(ta, tb);
    let runs: Vec<u64> = ta.iter().map(|t| t.run_id).collect();
    assert_eq!(runs, (0..1500).collect::<Vec<_>>());
    // Coverage only grows: first-hit counters are within the campaign.
    let mut seen: HashMap<(EntityId, EntityId), u64> = HashMap::new();
    for (e, n) in &a.first_hit {
        seen.insert(*e, *n);
    }
    assert_eq!(seen.len(), a.corpus.coverage.len());
}
