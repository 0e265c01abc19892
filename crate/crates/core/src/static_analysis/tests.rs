use super::*;
use crate::corpus;

fn motivating() -> ProgramDb {
    corpus::program("motivating").unwrap().db().unwrap()
}

fn at(db: &ProgramDb, line: u32, col: u32) -> FlowNode {
    FlowNode::new(db, db.entity_at("motivating.mc", line, col).unwrap())
}

fn col_of(db: &ProgramDb, line: u32, needle: &str) -> u32 {
    let text = db.project.sources[0].1.lines().nth(line as usize - 1).unwrap();
    text.find(needle).unwrap() as u32 + 1
}

fn named_decl(db: &ProgramDb, name: &str) -> FlowNode {
    let id = db.sema.vars.values().find(|v| v.name == name).unwrap().decl;
    FlowNode::new(db, id)
}

#[test]
fn data_reaches_img_but_not_t_or_flags() {
    let db = motivating();
    let cfg = TaintConfig::for_driver(&db);
    let source = *cfg.sources.iter().next().unwrap();
    assert_eq!(db.ast.node(source.access).attrs.name.as_deref(), Some("data"));
    let fwd = forward_flow(&db, source, &cfg);
    assert!(fwd.contains(&named_decl(&db, "img")));
    let t = at(&db, 16, col_of(&db, 16, "t =="));
    assert!(!fwd.contains(&t));
    assert!(!fwd.contains(&named_decl(&db, "imgp")));
    let flags = at(&db, 33, col_of(&db, 33, "flags"));
    assert!(!is_statically_tainted(&db, source, flags, &cfg));
    assert!(is_statically_tainted(&db, source, source, &cfg));
}

#[test]
fn backward_from_t_reaches_image_fields() {
    let db = motivating();
    let t = at(&db, 16, col_of(&db, 16, "t =="));
    let back = backward_flow(&db, t);
    for field in ["imgp->x", "imgp->y", "imgp->z"] {
        let n = at(&db, 15, col_of(&db, 15, field) + 6);
        assert_eq!(db.ast.node(n.access).kind, NodeKind::FieldAccess);
        assert!(back.contains(&n), "{field}");
    }
    assert!(back.contains(&named_decl(&db, "imgp")));
}

#[test]
fn forward_of_unused_source_is_singleton() {
    let db = ProgramDb::from_source("t.mc", "void main(u32 a) { }", "main").unwrap();
    let a = named_decl(&db, "a");
    assert_eq!(forward_flow(&db, a, &TaintConfig::default()), BTreeSet::from([a]));
}

#[test]
fn flags_partition_by_driver_reachability() {
    let db = motivating();
    let fa = flag_analysis(&db, db.driver);
    let set: Vec<_> = fa.set_flags.iter().map(|f| (f.flag_bit, db.function_name(f.setter_function), f.called_from_driver)).collect();
    let unset: Vec<_> = fa.unset_flags.iter().map(|f| (f.flag_bit, db.function_name(f.setter_function), f.called_from_driver)).collect();
    assert_eq!(set, vec![(0x01, "set_option_A", true)]);
    assert_eq!(unset, vec![(0x10, "set_option_B", false)]);
    assert_eq!(fa.set_flags[0].target, "flags");
}

#[test]
fn transitive_setter_counts_as_called() {
    let src = "u32 f;\nvoid s() { f |= 4; }\nvoid helper() { s(); }\nvoid main() { helper(); }";
    let db = ProgramDb::from_source("t.mc", src, "main").unwrap();
    let fa = flag_analysis(&db, db.driver);
    assert_eq!(fa.set_flags.len(), 1);
    assert!(fa.unset_flags.is_empty());
}

#[test]
fn field_setters_name_struct_field() {
    let db = corpus::program("config_flags").unwrap().db().unwrap();
    let fa = flag_analysis(&db, db.driver);
    assert_eq!(fa.set_flags.len(), 1);
    assert_eq!(fa.set_flags[0].target, "Png.transformations");
    let names: Vec<&str> = fa.unset_flags.iter().map(|f| db.function_name(f.setter_function)).collect();
    assert_eq!(names, vec!["png_set_rgb_to_gray", "png_set_strip_alpha", "png_set_invert_mono", "png_enable_crc"]);
}

#[test]
fn extra_rules_each_unlock_one_entry_point() {
    let db = corpus::program("entry_indirect").unwrap().db().unwrap();
    let src = |line: u32, needle: &str| {
        let text = db.project.sources[0].1.lines().nth(line as usize - 1).unwrap();
        FlowNode::new(&db, db.entity_at("entry_indirect.mc", line, text.find(needle).unwrap() as u32 + 1).unwrap())
    };
    let first = src(8, "first");
    let lead = src(20, "lead");
    let base = TaintConfig::for_driver(&db);
    let source = *base.sources.iter().next().unwrap();
    let check = |rules: ExtraRules, sink: FlowNode| is_statically_tainted(&db, source, sink, &base.clone().with_rules(rules));
    let f2q = ExtraRules { address_copy: false, field_to_qualifier: true };
    let copy = ExtraRules { address_copy: true, field_to_qualifier: false };
    assert!(!check(ExtraRules::NONE, first));
    assert!(check(f2q, first));
    assert!(!check(copy, first));
    assert!(!check(ExtraRules::NONE, lead));
    assert!(check(copy, lead));
    assert!(!check(f2q, lead));
}

#[test]
fn manual_marks_act_as_sources() {
    let db = corpus::program("entry_indirect").unwrap().db().unwrap();
    let mut cfg = TaintConfig::for_driver(&db).with_rules(ExtraRules::NONE);
    cfg.manual_taints = parse_manual_taints(&db, "# reader object\nentry_indirect.mc:7:6\n").unwrap();
    let source = *cfg.sources.iter().next().unwrap();
    let text = db.project.sources[0].1.lines().nth(7).unwrap();
    let first = FlowNode::new(&db, db.entity_at("entry_indirect.mc", 8, text.find("first").unwrap() as u32 + 1).unwrap());
    assert!(is_statically_tainted(&db, source, first, &cfg));
    assert!(parse_manual_taints(&db, "entry_indirect.mc:7").is_err());
    assert_eq!(parse_manual_taints(&db, "entry_indirect.mc:1:50").unwrap_err().line, 1);
}
