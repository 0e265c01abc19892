#![allow(dead_code)]

//! Random scalar MiniC programs with an independently built flow relation.
//!
//! The oracle is derived from the generator's own statement tree, never from
//! the code database: blocks come from the if/while nesting, def-use follows
//! "latest write in the same block, else every write elsewhere (and later
//! writes of the same block when it sits inside a loop)", and every value read
//! on a right-hand side flows into the written variable.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use fuzzlens_core::code_db::ProgramDb;
use fuzzlens_core::lang::{EntityId, NodeKind};
use fuzzlens_core::static_analysis::{ExtraRules, FlowGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FILE: &str = "gen.mc";
const PARAMS: [&str; 2] = ["data", "n"];

#[derive(Debug, Clone)]
enum Expr {
    Var(String),
    Lit(u32),
    Data(u8),
    Bin(&'static str, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone)]
enum Stmt {
    Assign { var: String, compound: bool, rhs: Expr },
    If { var: String, lit: u32, then: Vec<Stmt>, els: Option<Vec<Stmt>> },
    While { var: String, lit: u32, body: Vec<Stmt> },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Site {
    Decl(String),
    /// Line and column of a variable reference token.
    Ref(u32, u32),
    /// `data[k]` whose `data` token sits at this line and column.
    Index(u32, u32),
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Role {
    Use,
    Def,
    UseDef,
}

struct Block {
    events: Vec<(usize, Role, String)>,
    cyclic: bool,
}

#[derive(Default)]
struct Builder {
    lines: Vec<String>,
    sites: Vec<Site>,
    edges: Vec<(usize, usize)>,
    blocks: Vec<Block>,
}

impl Builder {
    fn site(&mut self, s: Site) -> usize {
        self.sites.push(s);
        self.sites.len() - 1
    }

    fn line_no(&self) -> u32 {
        self.lines.len() as u32 + 1
    }

    fn new_block(&mut self, cyclic: bool) -> usize {
        self.blocks.push(Block { events: Vec::new(), cyclic });
        self.blocks.len() - 1
    }

    /// Appends `e` to `line` and collects the accesses it reads, flagging the
    /// ones whose value feeds the enclosing statement directly.
    fn expr(&mut self, line: &mut String, e: &Expr, out: &mut Vec<(usize, String, bool)>) {
        let ln = self.line_no();
        match e {
            Expr::Var(v) => {
                let s = self.site(Site::Ref(ln, line.len() as u32 + 1));
                out.push((s, v.clone(), true));
                line.push_str(v);
            }
            Expr::Lit(x) => line.push_str(&x.to_string()),
            Expr::Data(k) => {
                let col = line.len() as u32 + 1;
                let r = self.site(Site::Ref(ln, col));
                let ix = self.site(Site::Index(ln, col));
                self.edges.push((r, ix));
                out.push((r, "data".into(), false));
                out.push((ix, "data".into(), true));
                line.push_str(&format!("data[{k}]"));
            }
            Expr::Bin(op, l, r) => {
                line.push('(');
                self.expr(line, l, out);
                line.push_str(&format!(" {op} "));
                self.expr(line, r, out);
                line.push(')');
            }
        }
    }

    fn stmts(&mut self, body: &[Stmt], depth: usize, mut cur: usize, in_loop: bool) -> usize {
        for s in body {
            let pad = "  ".repeat(depth);
            match s {
                Stmt::Assign { var, compound, rhs } => {
                    let mut line = pad.clone();
                    let lhs = self.site(Site::Ref(self.line_no(), line.len() as u32 + 1));
                    line.push_str(var);
                    line.push_str(if *compound { " += " } else { " = " });
                    let mut leaves = Vec::new();
                    self.expr(&mut line, rhs, &mut leaves);
                    line.push(';');
                    self.lines.push(line);
                    for (leaf, v, feeds) in leaves {
                        self.blocks[cur].events.push((leaf, Role::Use, v));
                        if feeds {
                            self.edges.push((leaf, lhs));
                        }
                    }
                    let role = if *compound { Role::UseDef } else { Role::Def };
                    self.blocks[cur].events.push((lhs, role, var.clone()));
                }
                Stmt::If { var, lit, then, els } => {
                    let mut line = format!("{pad}if (");
                    let c = self.site(Site::Ref(self.line_no(), line.len() as u32 + 1));
                    line.push_str(&format!("{var} < {lit}) {{"));
                    self.lines.push(line);
                    self.blocks[cur].events.push((c, Role::Use, var.clone()));
                    let t = self.new_block(in_loop);
                    self.stmts(then, depth + 1, t, in_loop);
                    if let Some(els) = els {
                        self.lines.push(format!("{pad}}} else {{"));
                        let e = self.new_block(in_loop);
                        self.stmts(els, depth + 1, e, in_loop);
                    }
                    self.lines.push(format!("{pad}}}"));
                    cur = self.new_block(in_loop);
                }
                Stmt::While { var, lit, body } => {
                    let mut line = format!("{pad}while (");
                    let c = self.site(Site::Ref(self.line_no(), line.len() as u32 + 1));
                    line.push_str(&format!("{var} < {lit}) {{"));
                    self.lines.push(line);
                    let h = self.new_block(true);
                    self.blocks[h].events.push((c, Role::Use, var.clone()));
                    let b = self.new_block(true);
                    self.stmts(body, depth + 1, b, true);
                    self.lines.push(format!("{pad}}}"));
                    cur = self.new_block(in_loop);
                }
            }
        }
        cur
    }
}

/// A generated program and its expected flow relation.
pub struct Generated {
    pub source: String,
    pub statements: usize,
    sites: Vec<Site>,
    succ: Vec<BTreeSet<usize>>,
}

struct Gen<'a> {
    rng: &'a mut ChaCha8Rng,
    budget: usize,
    vars: Vec<String>,
}

impl Gen<'_> {
    fn leaf(&mut self, scope: &[String]) -> Expr {
        match self.rng.random_range(0..4) {
            0 if !scope.is_empty() => Expr::Var(scope[self.rng.random_range(0..scope.len())].clone()),
            1 => Expr::Data(self.rng.random_range(0..4)),
            2 => Expr::Var("n".into()),
            _ => Expr::Lit(self.rng.random_range(0..100)),
        }
    }

    fn expr(&mut self, scope: &[String], depth: u32) -> Expr {
        if depth == 0 || self.rng.random_bool(0.5) {
            return self.leaf(scope);
        }
        let op = ["+", "-", "^", "&"][self.rng.random_range(0..4)];
        Expr::Bin(op, Box::new(self.expr(scope, depth - 1)), Box::new(self.expr(scope, depth - 1)))
    }

    fn pick(&mut self) -> String {
        self.vars[self.rng.random_range(0..self.vars.len())].clone()
    }

    fn body(&mut self, depth: u32) -> Vec<Stmt> {
        let mut out = Vec::new();
        let want = self.rng.random_range(0..5);
        for _ in 0..want {
            if self.budget == 0 {
                break;
            }
            self.budget -= 1;
            let roll = self.rng.random_range(0..10);
            let vars = self.vars.clone();
            let s = if roll < 6 || depth >= 3 {
                Stmt::Assign { var: self.pick(), compound: self.rng.random_bool(0.25), rhs: self.expr(&vars, 2) }
            } else if roll < 8 {
                let (var, lit) = (self.pick(), self.rng.random_range(0..50));
                let then = self.body(depth + 1);
                let els = self.rng.random_bool(0.5).then(|| self.body(depth + 1));
                Stmt::If { var, lit, then, els }
            } else {
                let (var, lit) = (self.pick(), self.rng.random_range(0..50));
                Stmt::While { var, lit, body: self.body(depth + 1) }
            };
            out.push(s);
        }
        out
    }
}

/// Generates a program of at most `max_statements` statements.
pub fn generate(seed: u64, max_statements: usize) -> Generated {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let decls = rng.random_range(2..=4).min(max_statements);
    let mut g = Gen { rng: &mut rng, budget: max_statements - decls, vars: Vec::new() };
    let mut inits = Vec::new();
    for i in 0..decls {
        let scope = g.vars.clone();
        inits.push(g.expr(&scope, 2));
        g.vars.push(format!("v{i}"));
    }
    let mut body = Vec::new();
    while g.budget > 0 {
        let more = g.body(0);
        if more.is_empty() && g.rng.random_bool(0.3) {
            break;
        }
        body.extend(more);
    }
    let statements = max_statements - g.budget;

    let mut b = Builder::default();
    b.lines.push("void main(u8* data, u64 n) {".into());
    let entry = b.new_block(false);
    for p in PARAMS {
        let s = b.site(Site::Decl(p.into()));
        b.blocks[entry].events.push((s, Role::Def, p.into()));
    }
    for (i, init) in inits.iter().enumerate() {
        let name = format!("v{i}");
        let decl = b.site(Site::Decl(name.clone()));
        let mut line = format!("  u32 {name} = ");
        let mut leaves = Vec::new();
        b.expr(&mut line, init, &mut leaves);
        line.push(';');
        b.lines.push(line);
        for (leaf, v, feeds) in leaves {
            b.blocks[entry].events.push((leaf, Role::Use, v));
            if feeds {
                b.edges.push((leaf, decl));
            }
        }
        b.blocks[entry].events.push((decl, Role::Def, name));
    }
    b.stmts(&body, 1, entry, false);
    b.lines.push("}".into());

    // Def-use over the block events.
    let mut edges = b.edges.clone();
    for (bi, blk) in b.blocks.iter().enumerate() {
        for (i, (node, role, var)) in blk.events.iter().enumerate() {
            if *role == Role::Def {
                continue;
            }
            if let Some((d, _, _)) = blk.events[..i].iter().rev().find(|(_, r, v)| *r != Role::Use && v == var) {
                edges.push((*d, *node));
                continue;
            }
            for (bj, other) in b.blocks.iter().enumerate() {
                let from = match (bj == bi, blk.cyclic) {
                    (false, _) => 0,
                    (true, true) => i,
                    (true, false) => continue,
                };
                for (d, _, _) in other.events[from..].iter().filter(|(_, r, v)| *r != Role::Use && v == var) {
                    edges.push((*d, *node));
                }
            }
        }
    }
    let mut succ = vec![BTreeSet::new(); b.sites.len()];
    for (x, y) in edges {
        succ[x].insert(y);
    }
    let mut source = b.lines.join("\n");
    source.push('\n');
    Generated { source, statements, sites: b.sites, succ }
}

fn closure(adj: &[BTreeSet<usize>], start: usize) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(x) = queue.pop_front() {
        for &y in &adj[x] {
            if seen.insert(y) {
                queue.push_back(y);
            }
        }
    }
    seen
}

fn entity(db: &ProgramDb, site: &Site) -> Result<EntityId, String> {
    let by_pos = |l: u32, c: u32| db.entity_at(FILE, l, c).ok_or(format!("nothing at {l}:{c}"));
    match site {
        Site::Decl(name) => db
            .ast
            .nodes()
            .iter()
            .find(|n| n.kind == NodeKind::VarDecl && n.attrs.name.as_deref() == Some(name))
            .map(|n| n.id)
            .ok_or(format!("no declaration of {name}")),
        Site::Ref(l, c) => by_pos(*l, *c),
        Site::Index(l, c) => {
            let r = by_pos(*l, *c)?;
            db.ast.node(r).parent.ok_or(format!("index at {l}:{c} has no parent"))
        }
    }
}

/// Compares the flow graph against the oracle for every site, in both
/// directions, and checks that forward and backward slices are dual.
pub fn check(g: &Generated) -> Result<(), String> {
    let db = ProgramDb::from_source(FILE, &g.source, "main").map_err(|e| format!("{e}\n{}", g.source))?;
    let ids: Vec<EntityId> = g.sites.iter().map(|s| entity(&db, s)).collect::<Result<_, _>>()?;
    let index: BTreeMap<EntityId, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let mut pred = vec![BTreeSet::new(); g.succ.len()];
    for (x, ys) in g.succ.iter().enumerate() {
        for &y in ys {
            pred[y].insert(x);
        }
    }
    let flow = FlowGraph::build(&db, ExtraRules::NONE);
    let project = |set: BTreeSet<EntityId>| -> BTreeSet<usize> { set.iter().filter_map(|id| index.get(id).copied()).collect() };

    let mut fwd = Vec::with_capacity(ids.len());
    for (i, id) in ids.iter().enumerate() {
        let got_f = project(flow.forward([*id]));
        let want_f = closure(&g.succ, i);
        if got_f != want_f {
            return Err(format!("forward slice of {:?} differs: got {got_f:?}, want {want_f:?}\n{}", g.sites[i], g.source));
        }
        let got_b = project(flow.backward([*id]));
        let want_b = closure(&pred, i);
        if got_b != want_b {
            return Err(format!("backward slice of {:?} differs: got {got_b:?}, want {want_b:?}\n{}", g.sites[i], g.source));
        }
        fwd.push((got_f, got_b));
    }
    for x in 0..ids.len() {
        for y in 0..ids.len() {
            if fwd[x].0.contains(&y) != fwd[y].1.contains(&x) {
                return Err(format!("duality broken between {:?} and {:?}", g.sites[x], g.sites[y]));
            }
        }
    }
    Ok(())
}
