//! Basic blocks and control-flow edges.
//!
//! Blocks are laid out by walking each function body in order: a conditional
//! statement ends its block, every branch target starts a new one, and a
//! `for` loop splits into init (previous block), header, body, latch, and exit.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::lang::{Ast, EntityId, NodeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchLabel {
    Fallthrough,
    True,
    False,
}

impl BranchLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            BranchLabel::Fallthrough => "fallthrough",
            BranchLabel::True => "true",
            BranchLabel::False => "false",
        }
    }

    pub fn parse(s: &str) -> Option<BranchLabel> {
        match s {
            "fallthrough" => Some(BranchLabel::Fallthrough),
            "true" => Some(BranchLabel::True),
            "false" => Some(BranchLabel::False),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CfgEdge {
    pub src: EntityId,
    pub dst: EntityId,
    pub label: BranchLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasicBlock {
    pub id: EntityId,
    pub function: EntityId,
    pub statements: Vec<EntityId>,
}

/// Where control goes for each structured statement. The interpreter follows
/// this to emit block entries; `None` marks a block pruned as unreachable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    If { then_block: EntityId, else_block: Option<EntityId>, join: Option<EntityId> },
    While { header: EntityId, body: EntityId, exit: EntityId },
    For { header: EntityId, body: EntityId, latch: EntityId, exit: EntityId },
}

#[derive(Debug, Default)]
pub(super) struct CfgOutput {
    pub blocks: Vec<BasicBlock>,
    pub edges: Vec<CfgEdge>,
    pub layout: HashMap<EntityId, Layout>,
    pub entry: HashMap<EntityId, EntityId>,
}

#[derive(Default)]
struct FnBuilder {
    blocks: Vec<Vec<EntityId>>,
    edges: Vec<(usize, usize, BranchLabel)>,
    layout: Vec<(EntityId, TmpLayout)>,
    cur: Option<usize>,
}

enum TmpLayout {
    If(usize, Option<usize>, usize),
    While(usize, usize, usize),
    For(usize, usize, usize, usize),
}

impl FnBuilder {
    fn new_block(&mut self) -> usize {
        self.blocks.push(Vec::new());
        self.blocks.len() - 1
    }

    fn current(&mut self) -> usize {
        match self.cur {
            Some(b) => b,
            None => {
                let b = self.new_block();
                self.cur = Some(b);
                b
            }
        }
    }

    fn push(&mut self, stmt: EntityId) {
        let b = self.current();
        self.blocks[b].push(stmt);
    }

    fn edge(&mut self, from: Option<usize>, to: usize, label: BranchLabel) {
        if let Some(f) = from {
            self.edges.push((f, to, label));
        }
    }

    fn walk(&mut self, ast: &Ast, id: EntityId) {
        let n = ast.node(id);
        match n.kind {
            NodeKind::Block => {
                self.push(id);
                for c in &n.children {
                    self.walk(ast, *c);
                }
            }
            NodeKind::Return | NodeKind::Abort => {
                self.push(id);
                self.cur = None;
            }
            NodeKind::If => {
                self.push(id);
                let cond = self.cur;
                let then_b = self.new_block();
                self.edge(cond, then_b, BranchLabel::True);
                self.cur = Some(then_b);
                self.walk(ast, n.children[1]);
                let then_end = self.cur;
                let (else_b, else_end) = match n.children.get(2) {
                    Some(e) => {
                        let b = self.new_block();
                        self.edge(cond, b, BranchLabel::False);
                        self.cur = Some(b);
                        self.walk(ast, *e);
                        (Some(b), Some(self.cur))
                    }
                    None => (None, None),
                };
                let join = self.new_block();
                self.edge(then_end, join, BranchLabel::Fallthrough);
                match else_end {
                    Some(end) => self.edge(end, join, BranchLabel::Fallthrough),
                    None => self.edge(cond, join, BranchLabel::False),
                }
                self.layout.push((id, TmpLayout::If(then_b, else_b, join)));
                self.cur = Some(join);
            }
            NodeKind::While => {
                let header = self.new_block();
                self.edge(self.cur, header, BranchLabel::Fallthrough);
                self.blocks[header].push(id);
                let body = self.new_block();
                self.edge(Some(header), body, BranchLabel::True);
                self.cur = Some(body);
                self.walk(ast, n.children[1]);
                self.edge(self.cur, header, BranchLabel::Fallthrough);
                let exit = self.new_block();
                self.edge(Some(header), exit, BranchLabel::False);
                self.layout.push((id, TmpLayout::While(header, body, exit)));
                self.cur = Some(exit);
            }
            NodeKind::For => {
                self.walk(ast, n.children[0]);
                let header = self.new_block();
                self.edge(self.cur, header, BranchLabel::Fallthrough);
                self.blocks[header].push(id);
                let body = self.new_block();
                self.edge(Some(header), body, BranchLabel::True);
                self.cur = Some(body);
                self.walk(ast, n.children[3]);
                let latch = self.new_block();
                self.edge(self.cur, latch, BranchLabel::Fallthrough);
                self.blocks[latch].push(n.children[2]);
                self.edge(Some(latch), header, BranchLabel::Fallthrough);
                let exit = self.new_block();
                self.edge(Some(header), exit, BranchLabel::False);
                self.layout.push((id, TmpLayout::For(header, body, latch, exit)));
                self.cur = Some(exit);
            }
            _ => self.push(id),
        }
    }
}

pub(super) fn build(ast: &Ast, first_id: u64) -> CfgOutput {
    let mut out = CfgOutput::default();
    let mut next_id = first_id;
    for f in ast.functions() {
        let mut b = FnBuilder::default();
        let entry = b.new_block();
        b.cur = Some(entry);
        b.walk(ast, *f.children.last().unwrap());

        // Drop empty blocks nothing jumps to (except the entry).
        let mut has_incoming = vec![false; b.blocks.len()];
        for (_, to, _) in &b.edges {
            has_incoming[*to] = true;
        }
        let keep: Vec<bool> = (0..b.blocks.len())
            .map(|i| i == entry || has_incoming[i] || !b.blocks[i].is_empty())
            .collect();
        let mut ids = vec![EntityId::NONE; b.blocks.len()];
        for (i, stmts) in b.blocks.iter().enumerate() {
            if !keep[i] {
                continue;
            }
            ids[i] = EntityId(next_id);
            next_id += 1;
            out.blocks.push(BasicBlock { id: ids[i], function: f.id, statements: stmts.clone() });
        }
        for (from, to, label) in &b.edges {
            if keep[*from] && keep[*to] {
                out.edges.push(CfgEdge { src: ids[*from], dst: ids[*to], label: *label });
            }
        }
        let opt = |i: usize| (!ids[i].is_none()).then_some(ids[i]);
        for (stmt, l) in b.layout {
            let layout = match l {
                TmpLayout::If(t, e, j) => Layout::If {
                    then_block: ids[t],
                    else_block: e.map(|e| ids[e]),
                    join: opt(j),
                },
                TmpLayout::While(h, bd, x) => Layout::While { header: ids[h], body: ids[bd], exit: ids[x] },
                TmpLayout::For(h, bd, l, x) => Layout::For { header: ids[h], body: ids[bd], latch: ids[l], exit: ids[x] },
            };
            out.layout.insert(stmt, layout);
        }
        out.entry.insert(f.id, ids[entry]);
    }
    out.edges.sort();
    out
}
