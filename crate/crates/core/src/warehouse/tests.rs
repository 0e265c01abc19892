use std::collections::BTreeSet;

use super::*;
use crate::corpus;
use crate::runtime::{execute, fuzz, write_fact_csv, Corpus, FuzzOptions, DEFAULT_BUDGET};

fn decl(db: &ProgramDb, name: &str) -> EntityId {
    db.ast.nodes().iter().find(|n| n.kind == NodeKind::VarDecl && n.attrs.name.as_deref() == Some(name)).unwrap().id
}

fn campaign_to_dir(db: &ProgramDb, monitor: &BTreeSet<EntityId>, execs: u64, dir: &Path) -> Vec<Vec<u8>> {
    let mut w = crate::runtime::FactWriter::open(dir, db.generation()).unwrap();
    let mut inputs = Vec::new();
    let opts = FuzzOptions { exec_limit: execs, seed: 5, ..FuzzOptions::default() };
    fuzz(db, Corpus::new(), monitor, &opts, |t, input| {
        inputs.push(input.to_vec());
        w.write(t, input)
    })
    .unwrap();
    w.flush().unwrap();
    inputs
}

fn t_of(input: &[u8]) -> Option<u32> {
    if input.len() < 8 {
        return None;
    }
    let x = u32::from_le_bytes(input[..4].try_into().unwrap()) ^ 0xA5A5_A5A5;
    let y = input[4] as u32 | (input[5] as u32) << 8;
    Some(x.wrapping_mul(y).wrapping_mul(input[6] as u32))
}

#[test]
fn motivating_campaign_loads_and_answers_grain_queries() {
    let db = corpus::program("motivating").unwrap().db().unwrap();
    let t = decl(&db, "t");
    let dir = tempfile::tempdir().unwrap();
    let inputs = campaign_to_dir(&db, &BTreeSet::from([t]), 100, dir.path());
    let store = load_facts(&db.dims, dir.path()).unwrap();
    let lines = |n: &str| std::fs::read_to_string(dir.path().join(n)).unwrap().lines().count() - 1;
    assert_eq!(store.block_facts.len(), lines("block_facts.csv"));
    assert_eq!(store.value_facts.len(), lines("value_facts.csv"));
    assert_eq!(store.runs.len(), 100);

    let process_entry = db.entry_block(db.ast.function_named("process").unwrap().id);
    let mut checked = 0;
    for f in store.block_facts.iter().filter(|f| f.block == process_entry) {
        let at = GrainKey { run_id: f.run_id, tick: f.tick };
        let expected = t_of(&inputs[f.run_id as usize]).unwrap();
        assert_eq!(store.value_at(t, at, Policy::Exact), Some(RuntimeValue::Int(expected as i128)));
        assert_eq!(store.value_at(t, at, Policy::LatestBefore), store.value_at(t, at, Policy::Exact));
        assert_eq!(store.value_at(t, GrainKey { tick: f.tick - 1, ..at }, Policy::LatestBefore), None);
        checked += 1;
    }
    assert!(checked > 50);
    // The series of `t` is exactly the oracle multiset, in run order.
    let oracle: Vec<RuntimeValue> =
        inputs.iter().filter_map(|i| t_of(i)).map(|v| RuntimeValue::Int(v as i128)).collect();
    assert_eq!(store.series(t, RunFilter::All, true).unwrap(), oracle);
}

#[test]
fn export_reproduces_loaded_files() {
    let db = corpus::program("magic_gate").unwrap().db().unwrap();
    let all: BTreeSet<EntityId> = db.dims.variable_accesses.iter().map(|a| a.id).collect();
    let dir = tempfile::tempdir().unwrap();
    campaign_to_dir(&db, &all, 60, dir.path());
    let store = load_facts(&db.dims, dir.path()).unwrap();
    let out = tempfile::tempdir().unwrap();
    store.export(out.path()).unwrap();
    for n in ["block_facts.csv", "value_facts.csv", "runs.csv"] {
        assert_eq!(std::fs::read(dir.path().join(n)).unwrap(), std::fs::read(out.path().join(n)).unwrap(), "{n}");
    }
}

#[test]
fn unknown_access_is_a_foreign_key_error_with_row() {
    let db = corpus::program("motivating").unwrap().db().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let trace = execute(&db, &[0; 8], &BTreeSet::new(), 0, DEFAULT_BUDGET);
    write_fact_csv([(&trace, &[0u8; 8][..])], dir.path(), db.generation()).unwrap();
    std::fs::write(dir.path().join("value_facts.csv"), "run_id,tick,access_id,value\n0,1,999999,5\n").unwrap();
    match load_facts(&db.dims, dir.path()) {
        Err(WarehouseError::ForeignKey { row: 2, id: 999999, .. }) => {}
        other => panic!("{other:?}"),
    }
    std::fs::write(dir.path().join("value_facts.csv"), "run,tick,access_id,value\n").unwrap();
    assert!(matches!(load_facts(&db.dims, dir.path()), Err(WarehouseError::Schema { .. })));
}

#[test]
fn facts_from_an_older_source_are_rejected() {
    let prog = corpus::program("motivating").unwrap();
    let db = prog.db().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let trace = execute(&db, &[0; 8], &BTreeSet::new(), 0, DEFAULT_BUDGET);
    write_fact_csv([(&trace, &[0u8; 8][..])], dir.path(), db.generation()).unwrap();
    let mut text = prog.source().to_string();
    text = text.replacen("// do something", "// do somethinG", 1);
    let edited = ProgramDb::from_source("motivating.mc", &text, "LLVMFuzzerTestOneInput").unwrap();
    assert!(matches!(load_facts(&edited.dims, dir.path()), Err(WarehouseError::GenerationMismatch { .. })));
}

#[test]
fn series_and_alignment_contracts() {
    let src = "u32 x;\nu32 y;\nvoid main(u8* d, u64 n) {\n  y = 7;\n  for (u32 i = 0; i < 5; i += 1) {\n    x = i * 3;\n    y = x;\n  }\n}";
    let db = ProgramDb::from_source("s.mc", src, "main").unwrap();
    let acc = |line: u32, col: u32| db.entity_at("s.mc", line, col).unwrap();
    let (x_w, y_w, y_first) = (acc(6, 5), acc(7, 5), acc(4, 3));
    let mon = BTreeSet::from([x_w, y_w, y_first]);
    let t0 = execute(&db, &[], &mon, 0, 1000);
    let t1 = execute(&db, &[1], &mon, 1, 1000);
    let store = FactStore::from_traces(db.generation(), [(&t0, &[][..]), (&t1, &[1u8][..])]);
    let s = store.series(x_w, RunFilter::Range(0, 0), false).unwrap();
    assert_eq!(s, (0..5).map(|i| RuntimeValue::Int(i * 3)).collect::<Vec<_>>());
    assert_eq!(store.series(x_w, RunFilter::All, false).unwrap().len(), 10);
    assert!(matches!(store.series(x_w, RunFilter::Range(5, 9), false), Err(WarehouseError::EmptySeries(_))));
    assert!(matches!(store.series(acc(5, 12), RunFilter::All, false), Err(WarehouseError::UnmonitoredAccess(_))));

    let pairs = store.aligned_pairs(&BTreeSet::from([x_w]), y_w);
    assert_eq!(pairs.rows.len(), 10);
    assert!(pairs.rows.iter().all(|r| r.lhs[&x_w] == r.rhs));
    // The first `y` write happens before any `x` write.
    let pairs = store.aligned_pairs(&BTreeSet::from([x_w]), y_first);
    assert_eq!((pairs.rows.len(), pairs.dropped), (0, 2));
}

#[test]
fn image_pointer_aligns_with_parameter() {
    let db = corpus::program("motivating").unwrap().db().unwrap();
    let (img, imgp) = (decl(&db, "img"), decl(&db, "imgp"));
    let inputs: Vec<Vec<u8>> = (0..20u8).map(|i| vec![i; 8 + i as usize]).collect();
    let traces: Vec<_> = inputs
        .iter()
        .enumerate()
        .map(|(r, i)| execute(&db, i, &BTreeSet::from([img, imgp]), r as u64, DEFAULT_BUDGET))
        .collect();
    let store = FactStore::from_traces(db.generation(), traces.iter().zip(inputs.iter().map(Vec::as_slice)));
    let pairs = store.aligned_pairs(&BTreeSet::from([img]), imgp);
    assert_eq!(pairs.rows.len(), 20);
    assert!(pairs.rows.iter().all(|r| r.rhs.is_addr() && r.lhs[&img] == r.rhs));
}

#[test]
fn edge_counts_match_interpreter_coverage() {
    let db = corpus::program("config_flags").unwrap().db().unwrap();
    let inputs: Vec<Vec<u8>> = (0..30u8).map(|i| (0..i * 3).map(|k| k.wrapping_mul(i) ^ 0x5A).collect()).collect();
    let traces: Vec<_> =
        inputs.iter().enumerate().map(|(r, i)| execute(&db, i, &BTreeSet::new(), r as u64, DEFAULT_BUDGET)).collect();
    let store = FactStore::from_traces(db.generation(), traces.iter().zip(inputs.iter().map(Vec::as_slice)));
    let counted: BTreeSet<(EntityId, EntityId)> = store.edge_counts(&db).into_keys().collect();
    let covered: BTreeSet<(EntityId, EntityId)> = traces
        .iter()
        .flat_map(|t| t.edges.iter().map(|e| (db.dims.cfg_edges[*e as usize].src, db.dims.cfg_edges[*e as usize].dst)))
        .collect();
    assert_eq!(counted, covered);
    let cov = line_coverage(&db, &store);
    assert!(cov > 0.2 && cov < 1.0, "{cov}");
}
