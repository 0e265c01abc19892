use std::collections::BTreeSet;

use serde::Serialize;

use crate::code_db::ProgramDb;
use crate::lang::{EntityId, MiniCType, NodeKind, SourceLocation};
use crate::static_analysis::{flag_analysis, flag_target, reachable_functions, FlagFact};

use super::arg::resolve_location;
use super::{source_text, QueryArg, QueryError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlagSuggestion {
    pub setter: String,
    pub setter_function: EntityId,
    pub flag_bit: u64,
    pub target: String,
    /// A call to paste into the driver.
    pub snippet: String,
    pub insertion_hint: SourceLocation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Query3Result {
    pub literal: EntityId,
    pub flag_value: u64,
    pub target: String,
    pub suggestions: Vec<FlagSuggestion>,
}

fn calls_in(db: &ProgramDb, root: EntityId) -> impl Iterator<Item = EntityId> + '_ {
    db.ast.descendants(root).into_iter().filter(|d| db.ast.node(*d).kind == NodeKind::Call)
}

fn callee(db: &ProgramDb, call: EntityId) -> Option<EntityId> {
    db.dims.call_edges.iter().find(|e| e.call == call).map(|e| e.callee)
}

/// Point just past a statement, after its `;` if it has one on the same line.
fn after(db: &ProgramDb, loc: &SourceLocation) -> SourceLocation {
    let mut col = loc.end_col + 1;
    let line = db
        .project
        .sources
        .iter()
        .find(|(n, _)| *n == loc.file)
        .and_then(|(_, t)| t.lines().nth(loc.end_line as usize - 1))
        .unwrap_or("");
    if line.chars().nth(col as usize - 1) == Some(';') {
        col += 1;
    }
    SourceLocation::point(loc.file.clone(), loc.end_line, col)
}

/// Where new setter calls go: right after the last driver statement that
/// (transitively) calls one of `setters`, else at the top of the driver body.
pub fn insertion_hint(db: &ProgramDb, setters: &BTreeSet<EntityId>) -> SourceLocation {
    let driver = db.ast.node(db.driver);
    let last = db
        .dims
        .statements
        .iter()
        .filter(|s| s.function == db.driver && s.kind != NodeKind::Block)
        .filter(|s| {
            calls_in(db, s.id).any(|c| {
                callee(db, c).is_some_and(|f| !reachable_functions(db, f).is_disjoint(setters))
            })
        })
        .max_by_key(|s| s.loc.end());
    match last {
        Some(s) => after(db, &s.loc),
        None => {
            let body = driver.children.iter().map(|c| db.ast.node(*c)).find(|n| n.kind == NodeKind::Block);
            let loc = body.map_or(&driver.loc, |b| &b.loc);
            SourceLocation::point(loc.file.clone(), loc.start_line, loc.start_col + 1)
        }
    }
}

fn param_type(db: &ProgramDb, p: EntityId) -> Option<&MiniCType> {
    db.ast.node(p).attrs.ty.as_ref()
}

/// Argument text for a parameter of type `ty`, borrowed from an existing
/// driver call with a parameter of the same type when possible.
fn argument_for(db: &ProgramDb, ty: &MiniCType) -> String {
    for call in calls_in(db, db.driver) {
        let Some(f) = callee(db, call).and_then(|f| db.dims.function(f)) else { continue };
        for (i, p) in f.params.iter().enumerate() {
            if param_type(db, *p) == Some(ty) {
                if let Some(arg) = db.ast.node(call).children.get(i) {
                    return source_text(db, &db.ast.node(*arg).loc);
                }
            }
        }
    }
    // Otherwise take the address of a driver local of the pointee type.
    if let Some(pointee) = ty.pointee() {
        let local = db.ast.descendants(db.driver).into_iter().map(|d| db.ast.node(d)).find(|n| {
            n.kind == NodeKind::VarDecl && !n.attrs.param && n.attrs.ty.as_ref() == Some(pointee)
        });
        if let Some(n) = local {
            return format!("&{}", n.attrs.name.as_deref().unwrap_or_default());
        }
    }
    "0".to_string()
}

fn snippet(db: &ProgramDb, setter: EntityId) -> String {
    let f = db.dims.function(setter).expect("setter is a function");
    let args: Vec<String> =
        f.params.iter().map(|p| param_type(db, *p).map_or("0".to_string(), |t| argument_for(db, t))).collect();
    format!("{}({});", f.name, args.join(", "))
}

/// Suggests uncalled setters for the flag literal under the cursor.
pub fn query3_flag_suggestions(db: &ProgramDb, arg: &QueryArg) -> Result<Query3Result, QueryError> {
    query3_at(db, resolve_location(db, &arg.location()?)?)
}

pub fn query3_at(db: &ProgramDb, id: EntityId) -> Result<Query3Result, QueryError> {
    let n = db.ast.node(id);
    if n.kind != NodeKind::Literal {
        return Err(QueryError::NotALiteral(n.loc.clone()));
    }
    let no_pattern = || QueryError::NoFlagPattern(n.loc.clone());
    let parent = db.ast.node(n.parent.ok_or_else(no_pattern)?);
    if parent.kind != NodeKind::BinOp || parent.attrs.op.as_deref() != Some("&") {
        return Err(no_pattern());
    }
    let other = *parent.children.iter().find(|c| **c != id).ok_or_else(no_pattern)?;
    let target = flag_target(db, other).ok_or_else(no_pattern)?;
    let value = n.attrs.value.unwrap_or(0);

    let fa = flag_analysis(db, db.driver);
    let set_bits = fa.set_flags.iter().filter(|f| f.target == target).fold(0u64, |acc, f| acc | f.flag_bit);
    let mut setters: BTreeSet<EntityId> =
        fa.set_flags.iter().filter(|f| f.target == target).map(|f| f.setter_function).collect();
    if setters.is_empty() {
        setters = fa.set_flags.iter().map(|f| f.setter_function).collect();
    }
    let hint = insertion_hint(db, &setters);

    let mut picked: Vec<&FlagFact> = fa
        .unset_flags
        .iter()
        .filter(|f| f.target == target && f.flag_bit & value != 0 && f.flag_bit & set_bits == 0)
        .collect();
    picked.sort_by(|a, b| db.function_name(a.setter_function).cmp(db.function_name(b.setter_function)));
    picked.dedup_by_key(|f| f.setter_function);
    let suggestions = picked
        .into_iter()
        .map(|f| FlagSuggestion {
            setter: db.function_name(f.setter_function).to_string(),
            setter_function: f.setter_function,
            flag_bit: f.flag_bit,
            target: f.target.clone(),
            snippet: snippet(db, f.setter_function),
            insertion_hint: hint.clone(),
        })
        .collect();
    Ok(Query3Result { literal: id, flag_value: value, target, suggestions })
}
