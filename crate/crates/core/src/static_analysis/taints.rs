//! `taints.txt`: one `file:line:col` per line marking an extra taint source.
//! Blank lines and `#` comments are ignored.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::code_db::ProgramDb;

use super::FlowNode;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("taints line {line}: {message}")]
pub struct TaintFileError {
    pub line: usize,
    pub message: String,
}

pub fn parse_manual_taints(db: &ProgramDb, text: &str) -> Result<BTreeSet<FlowNode>, TaintFileError> {
    let mut out = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| TaintFileError { line: i + 1, message };
        let mut parts = line.rsplitn(3, ':');
        let (col, ln, file) = match (parts.next(), parts.next(), parts.next()) {
            (Some(c), Some(l), Some(f)) if !f.is_empty() => (c, l, f),
            _ => return Err(err(format!("expected file:line:col, got `{line}`"))),
        };
        let ln: u32 = ln.parse().map_err(|_| err(format!("bad line number `{ln}`")))?;
        let col: u32 = col.parse().map_err(|_| err(format!("bad column `{col}`")))?;
        let id = db.entity_at(file, ln, col).ok_or_else(|| err(format!("no entity at {file}:{ln}:{col}")))?;
        out.insert(FlowNode::new(db, id));
    }
    Ok(out)
}
