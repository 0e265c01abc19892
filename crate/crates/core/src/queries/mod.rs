//! The three interactive queries: hybrid taint (q1), value distribution of
//! an expression (q2) and flag suggestions (q3).

mod arg;
mod infer;
mod kde;
mod q1;
mod q2;
mod q3;

use thiserror::Error;

use crate::code_db::ProgramDb;
use crate::lang::{EntityId, SourceLocation};
use crate::warehouse::WarehouseError;

pub use arg::{resolve_location, synthesize_arg, ArgLocation, ArgShape, QueryArg, QueryKind, SEP};
pub use infer::{infer_relationship, is_integral, InferredRelation, Relation, TemplatePolicy, Term};
pub use kde::{kde, silverman_bandwidth, trapezoid, Density, DEFAULT_GRID_POINTS};
pub use q1::{query1_at, query1_hybrid_taint, Query1Options, TaintStatus, TaintVerdict, TaintWitness};
pub use q2::{parse_schema, query2_distribution, Distribution, Query2Options, Schema};
pub use q3::{insertion_hint, query3_at, query3_flag_suggestions, FlagSuggestion, Query3Result};

#[derive(Debug, Error)]
pub enum QueryError {
    #[error("malformed argument at field {index}: {message}")]
    ArgShape { index: usize, message: String },
    #[error("no entity at {file}:{line}:{col}")]
    NoEntityAtLocation { file: String, line: u32, col: u32 },
    #[error("location belongs to `{found}`, not `{expected}`")]
    FunctionMismatch { expected: String, found: String },
    #[error("{0}: not a variable access")]
    NotAnAccess(SourceLocation),
    #[error("{0}: not a literal")]
    NotALiteral(SourceLocation),
    #[error("{0}: literal is not a flag test operand")]
    NoFlagPattern(SourceLocation),
    #[error("only {have} aligned samples, {need} needed")]
    InsufficientSamples { have: usize, need: usize },
    #[error("access {0} was not monitored")]
    UnmonitoredAccess(EntityId),
    #[error("access {0} has no recorded values")]
    EmptySeries(EntityId),
    #[error("access {0} holds addresses, not numbers")]
    NonNumericOperand(EntityId),
    #[error("bad expression schema: {0}")]
    BadSchema(String),
    #[error("instrumentation failure: {0}")]
    InstrumentationFailure(String),
    #[error(transparent)]
    Warehouse(WarehouseError),
}

impl From<WarehouseError> for QueryError {
    fn from(e: WarehouseError) -> Self {
        match e {
            WarehouseError::UnmonitoredAccess(a) => QueryError::UnmonitoredAccess(a),
            WarehouseError::EmptySeries(a) => QueryError::EmptySeries(a),
            e => QueryError::Warehouse(e),
        }
    }
}

impl QueryError {
    /// Stable machine-readable name.
    pub fn kind(&self) -> &'static str {
        match self {
            QueryError::ArgShape { .. } => "ArgShapeError",
            QueryError::NoEntityAtLocation { .. } => "NoEntityAtLocation",
            QueryError::FunctionMismatch { .. } => "FunctionMismatch",
            QueryError::NotAnAccess(_) => "NotAnAccess",
            QueryError::NotALiteral(_) => "NotALiteral",
            QueryError::NoFlagPattern(_) => "NoFlagPattern",
            QueryError::InsufficientSamples { .. } => "InsufficientSamples",
            QueryError::UnmonitoredAccess(_) => "UnmonitoredAccess",
            QueryError::EmptySeries(_) => "EmptySeries",
            QueryError::NonNumericOperand(_) => "NonNumericOperand",
            QueryError::BadSchema(_) => "BadSchema",
            QueryError::InstrumentationFailure(_) => "InstrumentationFailure",
            QueryError::Warehouse(_) => "WarehouseError",
        }
    }

    /// Errors caused by the request rather than by the system.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, QueryError::InstrumentationFailure(_) | QueryError::Warehouse(_))
    }
}

/// Source text covered by a location (single-line spans only need one line).
pub fn source_text(db: &ProgramDb, loc: &SourceLocation) -> String {
    let Some((_, text)) = db.project.sources.iter().find(|(n, _)| *n == loc.file) else {
        return String::new();
    };
    let lines: Vec<&str> = text.lines().collect();
    let mut out = String::new();
    for l in loc.start_line..=loc.end_line {
        let Some(line) = lines.get(l as usize - 1) else { break };
        let chars: Vec<char> = line.chars().collect();
        let from = if l == loc.start_line { loc.start_col as usize - 1 } else { 0 };
        let to = if l == loc.end_line { (loc.end_col as usize).min(chars.len()) } else { chars.len() };
        if from < to {
            out.extend(&chars[from..to]);
        }
        if l != loc.end_line {
            out.push('\n');
        }
    }
    out
}

/// Short display name of an entity: its source text and position.
pub fn entity_label(db: &ProgramDb, id: EntityId) -> String {
    match db.ast.get(id) {
        Some(n) => {
            let text = match n.attrs.name.as_deref() {
                Some(name) if n.kind == crate::lang::NodeKind::VarDecl => name.to_string(),
                _ => source_text(db, &n.loc),
            };
            format!("{text}@{}:{}", n.loc.start_line, n.loc.start_col)
        }
        None => id.to_string(),
    }
}

#[cfg(test)]
mod tests;
