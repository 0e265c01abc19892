//! Recognizes flag setters: statements of the form `<lvalue> |= <constant>`
//! where the lvalue is a global or a field reached through a parameter.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::code_db::ProgramDb;
use crate::lang::{Ast, EntityId, MiniCType, NodeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlagOp {
    Set,
    Clear,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FlagFact {
    pub flag_bit: u64,
    pub setter_function: EntityId,
    pub called_from_driver: bool,
    /// Flag storage: a global name (`flags`) or `Struct.field`.
    pub target: String,
    pub statement: EntityId,
    pub op: FlagOp,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagAnalysis {
    pub set_flags: Vec<FlagFact>,
    pub unset_flags: Vec<FlagFact>,
    /// `&= ~C` clears, reported but not used for matching.
    pub clears: Vec<FlagFact>,
}

/// Value of an expression built only from literals.
pub fn const_eval(ast: &Ast, id: EntityId) -> Option<u64> {
    let n = ast.node(id);
    match n.kind {
        NodeKind::Literal => n.attrs.value,
        NodeKind::UnaryOp => {
            let v = const_eval(ast, n.children[0])?;
            match n.attrs.op.as_deref()? {
                "~" => Some(!v),
                "-" => Some(v.wrapping_neg()),
                "cast" => Some(v),
                _ => None,
            }
        }
        NodeKind::BinOp => {
            let (a, b) = (const_eval(ast, n.children[0])?, const_eval(ast, n.children[1])?);
            match n.attrs.op.as_deref()? {
                "|" => Some(a | b),
                "&" => Some(a & b),
                "^" => Some(a ^ b),
                "<<" => Some(a.checked_shl(b as u32).unwrap_or(0)),
                "+" => Some(a.wrapping_add(b)),
                _ => None,
            }
        }
        _ => None,
    }
}

/// Name of the storage an lvalue designates, if it is a global or a field
/// (`Struct.field`) whose base is a global or a parameter.
pub fn flag_target(db: &ProgramDb, lvalue: EntityId) -> Option<String> {
    let ast = &db.ast;
    let n = ast.node(lvalue);
    let root = db.sema.paths.get(&lvalue)?.root?;
    let var = &db.sema.vars[&root];
    match n.kind {
        NodeKind::VarRef if var.is_global() => Some(var.name.clone()),
        NodeKind::FieldAccess if var.is_global() || var.is_param => {
            let qt = db.sema.types.get(&n.children[0])?;
            let sname = match qt {
                MiniCType::Ptr(inner) => inner.struct_name()?,
                t => t.struct_name()?,
            };
            Some(format!("{sname}.{}", n.attrs.name.as_deref()?))
        }
        _ => None,
    }
}

/// Functions reachable from `from` over call edges, `from` included.
pub fn reachable_functions(db: &ProgramDb, from: EntityId) -> BTreeSet<EntityId> {
    let mut seen = BTreeSet::from([from]);
    let mut queue = VecDeque::from([from]);
    while let Some(f) = queue.pop_front() {
        for e in db.dims.call_edges.iter().filter(|e| e.caller == f) {
            if seen.insert(e.callee) {
                queue.push_back(e.callee);
            }
        }
    }
    seen
}

pub fn flag_analysis(db: &ProgramDb, driver: EntityId) -> FlagAnalysis {
    let ast = &db.ast;
    let reachable = reachable_functions(db, driver);
    let mut out = FlagAnalysis::default();
    for n in ast.nodes() {
        if n.kind != NodeKind::Assign {
            continue;
        }
        let op = match n.attrs.op.as_deref() {
            Some("|=") => FlagOp::Set,
            Some("&=") => FlagOp::Clear,
            _ => continue,
        };
        let (lhs, rhs) = (n.children[0], n.children[1]);
        let (Some(value), Some(target)) = (const_eval(ast, rhs), flag_target(db, lhs)) else {
            continue;
        };
        let width = db.sema.types.get(&lhs).and_then(MiniCType::width);
        let mask = width.map_or(u64::MAX, |w| if w.bits() == 64 { u64::MAX } else { (1u64 << w.bits()) - 1 });
        let flag_bit = match op {
            FlagOp::Set => value & mask,
            FlagOp::Clear => !value & mask,
        };
        if flag_bit == 0 {
            continue;
        }
        let setter = db.sema.enclosing_fn[&n.id];
        let fact = FlagFact {
            flag_bit,
            setter_function: setter,
            called_from_driver: reachable.contains(&setter),
            target,
            statement: n.id,
            op,
        };
        match (op, fact.called_from_driver) {
            (FlagOp::Clear, _) => out.clears.push(fact),
            (FlagOp::Set, true) => out.set_flags.push(fact),
            (FlagOp::Set, false) => out.unset_flags.push(fact),
        }
    }
    out
}
