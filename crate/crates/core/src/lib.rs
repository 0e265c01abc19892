//! Fuzz-blocker analysis for MiniC programs.

pub mod blockers;
pub mod code_db;
pub mod corpus;
pub mod lang;
pub mod par;
pub mod queries;
pub mod runtime;
pub mod static_analysis;
pub mod warehouse;
