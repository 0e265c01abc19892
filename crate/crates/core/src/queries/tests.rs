use std::collections::BTreeSet;

use super::*;
use crate::corpus;
use crate::runtime::{fuzz, Corpus, FuzzOptions};
use crate::static_analysis::{driver_input, FlowNode, TaintConfig};
use crate::warehouse::FactStoreBuilder;

fn loc_arg(s: &str) -> QueryArg {
    QueryArg::parse(s, ArgShape::Location).unwrap()
}

#[test]
fn argument_shapes() {
    let a = loc_arg("process@@motivating.mc@@16@@7");
    assert_eq!(a.location().unwrap().line, 16);
    for (bad, index) in [("", 0), ("a@@@@3@@4", 1), ("a@@f.mc@@x@@4", 2), ("a@@f.mc@@3", 3), ("a@@f@@1@@2@@3", 4)] {
        match QueryArg::parse(bad, ArgShape::Location) {
            Err(QueryError::ArgShape { index: i, .. }) => assert_eq!(i, index, "{bad}"),
            other => panic!("{bad}: {other:?}"),
        }
    }
    let s = QueryArg::parse("\"var1 * var2\"@@process@@15@@11@@process@@15@@21", ArgShape::ExprSchema).unwrap();
    assert_eq!(s.schema(), "var1 * var2");
    let ops = s.operand_locations().unwrap();
    assert_eq!((ops.len(), ops[1].file.clone(), ops[1].col), (2, None, 21));
    let q = QueryArg::parse("var1@@process@@motivating.mc@@15@@11", ArgShape::ExprSchema).unwrap();
    assert_eq!(q.operand_locations().unwrap()[0].file.as_deref(), Some("motivating.mc"));
    assert!(QueryArg::parse("var1@@process@@15", ArgShape::ExprSchema).is_err());
}

#[test]
fn synthesized_arguments_resolve_to_the_clicked_entity() {
    let db = corpus::program("motivating").unwrap().db().unwrap();
    let arg = synthesize_arg(&db, "motivating.mc", 16, 7, QueryKind::Q1).unwrap();
    assert_eq!(arg, "process@@motivating.mc@@16@@7");
    let id = resolve_location(&db, &loc_arg(&arg).location().unwrap()).unwrap();
    assert_eq!(Some(id), db.entity_at("motivating.mc", 16, 7));
    let q2 = synthesize_arg(&db, "motivating.mc", 16, 7, QueryKind::Q2).unwrap();
    assert_eq!(q2, "\"var1\"@@process@@motivating.mc@@16@@7");
    assert!(matches!(synthesize_arg(&db, "motivating.mc", 14, 1, QueryKind::Q1), Err(QueryError::NoEntityAtLocation { .. })));
    assert!(matches!(
        resolve_location(&db, &loc_arg("parse@@motivating.mc@@16@@7").location().unwrap()),
        Err(QueryError::FunctionMismatch { .. })
    ));
}

#[test]
fn option_b_needs_its_setter() {
    let db = corpus::program("motivating").unwrap().db().unwrap();
    let r = query3_flag_suggestions(&db, &loc_arg("LLVMFuzzerTestOneInput@@motivating.mc@@33@@16")).unwrap();
    assert_eq!((r.flag_value, r.target.as_str()), (0x10, "flags"));
    assert_eq!(r.suggestions.len(), 1);
    let s = &r.suggestions[0];
    assert_eq!((s.setter.as_str(), s.snippet.as_str()), ("set_option_B", "set_option_B();"));
    assert_eq!((s.insertion_hint.start_line, s.insertion_hint.start_col), (29, 18));
    // OPTION_A is already set by the driver.
    let r = query3_flag_suggestions(&db, &loc_arg("LLVMFuzzerTestOneInput@@motivating.mc@@30@@16")).unwrap();
    assert!(r.suggestions.is_empty());
    assert!(matches!(
        query3_flag_suggestions(&db, &loc_arg("LLVMFuzzerTestOneInput@@motivating.mc@@33@@8")),
        Err(QueryError::NotALiteral(_))
    ));
    assert!(matches!(
        query3_flag_suggestions(&db, &loc_arg("process@@motivating.mc@@16@@12")),
        Err(QueryError::NoFlagPattern(_))
    ));
}

#[test]
fn config_setters_reuse_driver_arguments() {
    let db = corpus::program("config_flags").unwrap().db().unwrap();
    let r = query3_flag_suggestions(&db, &loc_arg("png_read_transformations@@config_flags.mc@@90@@29")).unwrap();
    assert_eq!(r.target, "Png.transformations");
    let names: Vec<&str> = r.suggestions.iter().map(|s| s.snippet.as_str()).collect();
    assert_eq!(names, ["png_set_rgb_to_gray(&png);"]);
    let h = &r.suggestions[0].insertion_hint;
    assert_eq!((h.start_line, h.start_col), (113, 24));
    let r = query3_flag_suggestions(&db, &loc_arg("png_read_transformations@@config_flags.mc@@99@@20")).unwrap();
    assert_eq!(r.suggestions.iter().map(|s| s.snippet.as_str()).collect::<Vec<_>>(), ["png_enable_crc();"]);
}

fn source(db: &crate::code_db::ProgramDb) -> FlowNode {
    FlowNode::new(db, driver_input(db).unwrap())
}

fn q1_opts(execs: u64) -> Query1Options {
    Query1Options { fuzz: FuzzOptions { exec_limit: execs, seed: 3, ..FuzzOptions::default() }, ..Query1Options::default() }
}

#[test]
fn product_is_linked_through_the_image_pointer() {
    let db = corpus::program("motivating").unwrap().db().unwrap();
    let cfg = TaintConfig::for_driver(&db);
    let v = query1_hybrid_taint(&db, source(&db), &loc_arg("process@@motivating.mc@@16@@7"), &cfg, &q1_opts(2000)).unwrap();
    assert_eq!(v.status, TaintStatus::LikelyTainted);
    let TaintWitness::Relation { relation } = &v.witness else { panic!("{v:?}") };
    assert!(matches!(relation.relation, Relation::AddrEquality { .. }));
    assert!(relation.support >= 8);

    let v = query1_hybrid_taint(&db, source(&db), &loc_arg("LLVMFuzzerTestOneInput@@motivating.mc@@33@@8"), &cfg, &q1_opts(2000))
        .unwrap();
    assert_eq!(v.status, TaintStatus::NotTainted);
}

#[test]
fn direct_flows_are_static() {
    let db = corpus::program("magic_gate").unwrap().db().unwrap();
    let cfg = TaintConfig::for_driver(&db);
    let v = query1_hybrid_taint(&db, source(&db), &loc_arg("check_header@@magic_gate.mc@@19@@7"), &cfg, &q1_opts(0)).unwrap();
    assert_eq!(v.status, TaintStatus::StaticallyTainted);
    let TaintWitness::Path { nodes } = &v.witness else { panic!() };
    assert_eq!((nodes[0], *nodes.last().unwrap()), (source(&db), v.sink));
    assert!(matches!(
        query1_hybrid_taint(&db, source(&db), &loc_arg("check_header@@magic_gate.mc@@19@@3"), &cfg, &q1_opts(0)),
        Err(QueryError::NotAnAccess(_))
    ));
}

#[test]
fn product_distribution_from_a_campaign() {
    let db = corpus::program("motivating").unwrap().db().unwrap();
    let t = db.entity_at("motivating.mc", 16, 7).unwrap();
    let mut b = FactStoreBuilder::new(db.generation());
    let opts = FuzzOptions { exec_limit: 500, seed: 9, ..FuzzOptions::default() };
    fuzz(&db, Corpus::new(), &BTreeSet::from([t]), &opts, |tr, i| {
        b.push(tr, i);
        Ok::<(), ()>(())
    })
    .unwrap();
    let store = b.finish();
    let arg = QueryArg::parse("\"var1\"@@process@@motivating.mc@@16@@7", ArgShape::ExprSchema).unwrap();
    let d = query2_distribution(&db, &store, &arg, &Query2Options::default()).unwrap();
    assert_eq!(d.samples, store.series(t, crate::warehouse::RunFilter::All, true).unwrap().len());
    assert!((trapezoid(&d.grid, &d.density) - 1.0).abs() < 1e-9);
    let arg = QueryArg::parse("\"var1 >> 16\"@@process@@motivating.mc@@16@@7", ArgShape::ExprSchema).unwrap();
    let hi = query2_distribution(&db, &store, &arg, &Query2Options::default()).unwrap();
    assert!(hi.values.iter().all(|v| *v <= 0xFFFF));

    let other = QueryArg::parse("var1@@process@@motivating.mc@@15@@11", ArgShape::ExprSchema).unwrap();
    assert!(matches!(query2_distribution(&db, &store, &other, &Query2Options::default()), Err(QueryError::UnmonitoredAccess(_))));
    let bad = QueryArg::parse("var2@@process@@motivating.mc@@16@@7", ArgShape::ExprSchema).unwrap();
    assert!(matches!(query2_distribution(&db, &store, &bad, &Query2Options::default()), Err(QueryError::BadSchema(_))));
}

#[test]
fn two_operand_schema_aligns_on_the_first() {
    let src = "u32 x;\nu32 y;\nvoid main(u8* d, u64 n) {\n  for (u32 i = 0; i < 5; i += 1) {\n    x = i * 3;\n    y = x + 1;\n  }\n}";
    let db = crate::code_db::ProgramDb::from_source("s.mc", src, "main").unwrap();
    let (x, y) = (db.entity_at("s.mc", 5, 5).unwrap(), db.entity_at("s.mc", 6, 5).unwrap());
    let tr = crate::runtime::execute(&db, &[], &BTreeSet::from([x, y]), 0, 1000);
    let store = crate::warehouse::FactStore::from_traces(db.generation(), [(&tr, &[][..])]);
    let arg = QueryArg::parse("\"var1 - var2\"@@main@@6@@5@@main@@5@@5", ArgShape::ExprSchema).unwrap();
    let d = query2_distribution(&db, &store, &arg, &Query2Options::default()).unwrap();
    assert_eq!(d.values, vec![1; 5]);
    assert_eq!(d.bandwidth, 1.0);
}
