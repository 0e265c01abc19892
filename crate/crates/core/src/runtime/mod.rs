//! Deterministic execution, coverage-guided fuzzing and fact emission.

mod facts;
mod fuzz;
mod interp;
mod value;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::code_db::ProgramDb;
use crate::lang::EntityId;

pub use facts::{write_fact_csv, FactWriter, BLOCK_FACTS_HEADER, RUNS_HEADER, VALUE_FACTS_HEADER};
pub use fuzz::{fuzz, harvest_constants, Corpus, FuzzOptions, FuzzReport};
pub use interp::Program;
pub use value::{RuntimeValue, ValueParseError};

pub const DEFAULT_BUDGET: u64 = 1_000_000;
pub const DEFAULT_EXEC_LIMIT: u64 = 100_000;
/// Per (run, access) limit on recorded values.
pub const VALUE_FACT_CAP: u32 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Exit {
    Ok,
    Abort,
    Error(String),
}

impl Exit {
    pub fn parse(s: &str) -> Option<Exit> {
        match s {
            "ok" => Some(Exit::Ok),
            "abort" => Some(Exit::Abort),
            _ => s.strip_prefix("error: ").map(|m| Exit::Error(m.to_string())),
        }
    }

    pub fn is_crash(&self) -> bool {
        !matches!(self, Exit::Ok)
    }
}

impl fmt::Display for Exit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exit::Ok => f.write_str("ok"),
            Exit::Abort => f.write_str("abort"),
            Exit::Error(m) => write!(f, "error: {m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueFact {
    pub tick: u64,
    pub access: EntityId,
    pub value: RuntimeValue,
}

/// Everything observed during one execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecTrace {
    pub run_id: u64,
    /// `(tick, block)` per block entry; ticks are 1, 2, 3, ...
    pub block_facts: Vec<(u64, EntityId)>,
    /// Monitored values in evaluation order. A value carries the tick of the
    /// most recent block entry at the time it was evaluated.
    pub value_facts: Vec<ValueFact>,
    pub exit: Exit,
    pub blocks_executed: u64,
    /// Set when some access hit [`VALUE_FACT_CAP`].
    pub truncated: bool,
    /// Indices into `cfg_edges` traversed by this run.
    pub edges: Vec<u32>,
}

impl ExecTrace {
    /// Exit column of `runs.csv`.
    pub fn exit_label(&self) -> String {
        if self.truncated {
            format!("{};truncated", self.exit)
        } else {
            self.exit.to_string()
        }
    }
}

pub fn input_sha256(input: &[u8]) -> String {
    hex::encode(Sha256::digest(input))
}

/// Runs the program's driver once on `input`.
pub fn execute(db: &ProgramDb, input: &[u8], monitor: &BTreeSet<EntityId>, run_id: u64, budget: u64) -> ExecTrace {
    let prog = Program::new(db);
    let mask = prog.monitor_mask(monitor);
    prog.execute(input, &mask, run_id, budget)
}

#[cfg(test)]
mod tests;
