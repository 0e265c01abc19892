//! Intraprocedural def-use edges.
//!
//! Within a basic block a use links to the latest earlier definition of its
//! path; a strong definition stops the search. Otherwise the use links to
//! every definition of the path elsewhere in the function. Writes through a
//! pointer may define any address-taken variable of the pointee type.

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::lang::{Ast, EntityId, NodeKind};

use super::cfg::CfgOutput;
use super::sema::Semantics;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Use,
    Def,
    UseDef,
}

#[derive(Debug, Clone)]
struct Event {
    node: EntityId,
    role: Role,
}

pub(crate) fn is_access(kind: NodeKind) -> bool {
    matches!(
        kind,
        NodeKind::VarRef | NodeKind::FieldAccess | NodeKind::Index | NodeKind::Deref
    )
}

/// Whether a write to `def` may produce the value read at `use_`.
pub(crate) fn prefix_match(def: &str, use_: &str) -> bool {
    use_ == def
        || (use_.len() > def.len()
            && use_.starts_with(def)
            && matches!(use_.as_bytes()[def.len()], b'.' | b'['))
}

/// Writes to array elements and through bare pointers do not overwrite a
/// whole path, so they never hide earlier definitions.
pub(crate) fn is_strong(symbol: &str) -> bool {
    !symbol.contains("[]") && !symbol.starts_with("*(")
}

fn reads(ast: &Ast, id: EntityId, out: &mut Vec<Event>) {
    for d in ast.descendants(id) {
        if is_access(ast.node(d).kind) {
            out.push(Event { node: d, role: Role::Use });
        }
    }
}

/// Access events of one statement in evaluation order.
fn statement_events(ast: &Ast, stmt: EntityId, out: &mut Vec<Event>) {
    let n = ast.node(stmt);
    match n.kind {
        NodeKind::VarDecl => {
            if let Some(init) = n.children.first() {
                reads(ast, *init, out);
            }
            out.push(Event { node: stmt, role: Role::Def });
        }
        NodeKind::Assign => {
            let (lhs, rhs) = (n.children[0], n.children[1]);
            reads(ast, rhs, out);
            for c in &ast.node(lhs).children {
                reads(ast, *c, out);
            }
            let compound = n.attrs.op.as_deref().is_some_and(|op| op != "=");
            out.push(Event { node: lhs, role: if compound { Role::UseDef } else { Role::Def } });
        }
        NodeKind::If | NodeKind::While | NodeKind::Return => {
            if let Some(c) = n.children.first() {
                reads(ast, *c, out);
            }
        }
        NodeKind::For => reads(ast, n.children[1], out),
        NodeKind::Call => reads(ast, stmt, out),
        _ => {}
    }
}

struct Matcher<'a> {
    ast: &'a Ast,
    sema: &'a Semantics,
}

impl Matcher<'_> {
    fn symbol(&self, id: EntityId) -> &str {
        &self.sema.paths[&id].symbol
    }

    /// `(matches, kills)` for a definition against a use.
    fn check(&self, def: EntityId, use_: EntityId) -> (bool, bool) {
        let (ds, us) = (self.symbol(def), self.symbol(use_));
        if prefix_match(ds, us) {
            return (true, is_strong(ds));
        }
        if self.ast.node(def).kind == NodeKind::Deref {
            let pointee = self.sema.types.get(&def);
            if let Some(root) = self.sema.paths[&use_].root {
                let v = &self.sema.vars[&root];
                let base = format!("{}@{}", v.name, v.decl);
                if v.address_taken && Some(&v.ty) == pointee && prefix_match(&base, us) {
                    return (true, false);
                }
            }
        }
        (false, false)
    }
}

fn blocks_in_cycles(blocks: &[EntityId], cfg: &CfgOutput) -> HashSet<EntityId> {
    let mut succ: HashMap<EntityId, Vec<EntityId>> = HashMap::new();
    for e in &cfg.edges {
        succ.entry(e.src).or_default().push(e.dst);
    }
    let mut cyclic = HashSet::new();
    for &b in blocks {
        let mut seen = HashSet::new();
        let mut stack: Vec<EntityId> = succ.get(&b).cloned().unwrap_or_default();
        while let Some(x) = stack.pop() {
            if x == b {
                cyclic.insert(b);
                break;
            }
            if seen.insert(x) {
                stack.extend(succ.get(&x).into_iter().flatten().copied());
            }
        }
    }
    cyclic
}

pub(super) fn build(ast: &Ast, sema: &Semantics, cfg: &CfgOutput) -> BTreeSet<(EntityId, EntityId)> {
    let m = Matcher { ast, sema };
    let mut edges = BTreeSet::new();
    for f in ast.functions() {
        let blocks: Vec<_> = cfg.blocks.iter().filter(|b| b.function == f.id).collect();
        let ids: Vec<EntityId> = blocks.iter().map(|b| b.id).collect();
        let cyclic = blocks_in_cycles(&ids, cfg);
        let entry = cfg.entry[&f.id];

        let mut events: Vec<Vec<Event>> = Vec::with_capacity(blocks.len());
        for b in &blocks {
            let mut ev = Vec::new();
            if b.id == entry {
                for p in &f.children[..f.children.len() - 1] {
                    ev.push(Event { node: *p, role: Role::Def });
                }
            }
            for s in &b.statements {
                statement_events(ast, *s, &mut ev);
            }
            events.push(ev);
        }

        for (bi, ev) in events.iter().enumerate() {
            for (i, e) in ev.iter().enumerate() {
                if e.role == Role::Def {
                    continue;
                }
                let mut killed = false;
                for d in ev[..i].iter().rev().filter(|d| d.role != Role::Use) {
                    let (hit, kills) = m.check(d.node, e.node);
                    if hit {
                        edges.insert((d.node, e.node));
                        if kills {
                            killed = true;
                            break;
                        }
                    }
                }
                if killed {
                    continue;
                }
                for (bj, other) in events.iter().enumerate() {
                    let start = if bj != bi {
                        0
                    } else if cyclic.contains(&blocks[bi].id) {
                        i
                    } else {
                        continue;
                    };
                    for d in other[start..].iter().filter(|d| d.role != Role::Use) {
                        if m.check(d.node, e.node).0 {
                            edges.insert((d.node, e.node));
                        }
                    }
                }
            }
        }
    }
    edges
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_rules() {
        assert!(prefix_match("s@3", "s@3.f"));
        assert!(prefix_match("b@3", "b@3[]"));
        assert!(!prefix_match("s@3", "s@30"));
        assert!(!prefix_match("p@3", "p@3->f"));
        assert!(is_strong("p@3->f"));
        assert!(!is_strong("b@3[]"));
        assert!(!is_strong("*(p@3)"));
    }
}
