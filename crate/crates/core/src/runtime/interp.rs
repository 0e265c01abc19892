//! Tree-walking interpreter that follows the CFG layout so every block entry
//! is observable.

use std::collections::HashMap;

use crate::code_db::{Layout, ProgramDb};
use crate::lang::{EntityId, IntWidth, MiniCType, NodeKind};

use super::value::RuntimeValue;
use super::{Exit, ExecTrace, ValueFact, VALUE_FACT_CAP};

const MAX_CALL_DEPTH: usize = 200;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
enum Ty {
    #[default]
    Void,
    Int(IntWidth),
    /// Pointer with the cell size of its pointee.
    Ptr(i64),
    Array(i64),
    Struct(i64),
}

impl Ty {
    fn cells(self) -> i64 {
        match self {
            Ty::Void => 0,
            Ty::Int(_) | Ty::Ptr(_) => 1,
            Ty::Array(n) | Ty::Struct(n) => n,
        }
    }

    fn scalar(self) -> bool {
        matches!(self, Ty::Int(_) | Ty::Ptr(_))
    }

    fn unsigned64(self) -> bool {
        self == Ty::Int(IntWidth::U64)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
enum Op {
    #[default]
    None,
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Shl,
    Shr,
    And,
    Or,
    Xor,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    LAnd,
    LOr,
    BitNot,
    LNot,
    Cast,
}

impl Op {
    fn parse(s: &str) -> Op {
        match s.trim_end_matches('=') {
            "+" => Op::Add,
            "-" => Op::Sub,
            "*" => Op::Mul,
            "/" => Op::Div,
            "%" => Op::Mod,
            "<<" => Op::Shl,
            ">>" => Op::Shr,
            "&" => Op::And,
            "|" => Op::Or,
            "^" => Op::Xor,
            "&&" => Op::LAnd,
            "||" => Op::LOr,
            "~" => Op::BitNot,
            "cast" => Op::Cast,
            _ => match s {
                "==" => Op::Eq,
                "!=" => Op::Ne,
                "<" => Op::Lt,
                "<=" => Op::Le,
                ">" => Op::Gt,
                ">=" => Op::Ge,
                "!" => Op::LNot,
                _ => Op::None,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
enum VarLoc {
    #[default]
    None,
    Global(u32),
    Local(u32),
}

#[derive(Debug, Clone, Default)]
struct NodeInfo {
    ty: Ty,
    op: Op,
    var: VarLoc,
    field_offset: i64,
    /// Index into `Program::functions` for calls.
    callee: u32,
}

#[derive(Debug, Clone)]
struct FnInfo {
    id: EntityId,
    params: Vec<EntityId>,
    body: EntityId,
    entry: EntityId,
    locals: u32,
    ret: Ty,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Val {
    Int(i64),
    Addr(u32, i64),
}

const NULL: Val = Val::Addr(0, 0);

/// Program prepared for repeated execution: static types, variable slots and
/// field offsets resolved once.
#[derive(Debug)]
pub struct Program<'a> {
    db: &'a ProgramDb,
    info: Vec<NodeInfo>,
    functions: Vec<FnInfo>,
    globals: Vec<(EntityId, Ty)>,
    driver: u32,
    first_block: u64,
    /// Per block (offset by `first_block`): successor block and edge index.
    succ: Vec<Vec<(EntityId, u32)>>,
    edge_count: usize,
}

fn cells_of(db: &ProgramDb, ty: &MiniCType) -> i64 {
    match ty {
        MiniCType::Void => 0,
        MiniCType::ByteArray(n) => *n as i64,
        MiniCType::Struct(name) => db.sema.structs.get(name).map_or(0, |fs| fs.iter().map(|(_, t)| cells_of(db, t)).sum()),
        _ => 1,
    }
}

fn ty_of(db: &ProgramDb, ty: &MiniCType) -> Ty {
    match ty {
        MiniCType::Void => Ty::Void,
        MiniCType::Ptr(inner) => Ty::Ptr(cells_of(db, inner).max(1)),
        MiniCType::ByteArray(n) => Ty::Array(*n as i64),
        MiniCType::Struct(_) => Ty::Struct(cells_of(db, ty)),
        t => Ty::Int(t.width().expect("integer type")),
    }
}

impl<'a> Program<'a> {
    pub fn new(db: &'a ProgramDb) -> Program<'a> {
        let ast = &db.ast;
        let mut info = vec![NodeInfo::default(); ast.len() + 1];
        for n in ast.nodes() {
            let i = &mut info[n.id.0 as usize];
            if let Some(t) = db.sema.types.get(&n.id) {
                i.ty = ty_of(db, t);
            } else if n.kind == NodeKind::VarDecl {
                i.ty = ty_of(db, n.attrs.ty.as_ref().unwrap());
            }
            if let Some(op) = n.attrs.op.as_deref() {
                i.op = Op::parse(op);
            }
            if n.kind == NodeKind::FieldAccess {
                let base = db.sema.types.get(&n.children[0]).unwrap();
                let sname = if n.attrs.arrow { base.pointee().unwrap().struct_name() } else { base.struct_name() };
                let fields = &db.sema.structs[sname.unwrap()];
                let field = n.attrs.name.as_deref().unwrap();
                i.field_offset =
                    fields.iter().take_while(|(f, _)| f != field).map(|(_, t)| cells_of(db, t)).sum();
            }
        }

        let mut globals = Vec::new();
        for item in ast.children(ast.root()) {
            if item.kind == NodeKind::VarDecl {
                globals.push((item.id, info[item.id.0 as usize].ty));
                // Allocation ids: 0 is null, globals start at 1.
                info[item.id.0 as usize].var = VarLoc::Global(globals.len() as u32);
            }
        }

        let mut functions = Vec::new();
        let mut fn_index = HashMap::new();
        for f in ast.functions() {
            let params = f.children[..f.children.len() - 1].to_vec();
            let body = *f.children.last().unwrap();
            let mut locals = 0u32;
            for d in ast.descendants(f.id) {
                if ast.node(d).kind == NodeKind::VarDecl {
                    info[d.0 as usize].var = VarLoc::Local(locals);
                    locals += 1;
                }
            }
            fn_index.insert(f.id, functions.len() as u32);
            functions.push(FnInfo {
                id: f.id,
                params,
                body,
                entry: db.entry_block(f.id),
                locals,
                ret: ty_of(db, f.attrs.ty.as_ref().unwrap()),
            });
        }
        for n in ast.nodes() {
            match n.kind {
                NodeKind::VarRef => {
                    let decl = db.sema.var_ref[&n.id];
                    info[n.id.0 as usize].var = info[decl.0 as usize].var;
                }
                NodeKind::Call => info[n.id.0 as usize].callee = fn_index[&db.sema.callee[&n.id]],
                _ => {}
            }
        }

        let first_block = ast.len() as u64 + 1;
        let block_count = db.dims.basic_blocks.iter().map(|b| b.id.0 + 1 - first_block).max().unwrap_or(0) as usize;
        let mut succ = vec![Vec::new(); block_count];
        for (k, e) in db.dims.cfg_edges.iter().enumerate() {
            succ[(e.src.0 - first_block) as usize].push((e.dst, k as u32));
        }
        Program {
            db,
            info,
            functions,
            globals,
            driver: fn_index[&db.driver],
            first_block,
            succ,
            edge_count: db.dims.cfg_edges.len(),
        }
    }

    pub fn db(&self) -> &'a ProgramDb {
        self.db
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    fn info(&self, id: EntityId) -> &NodeInfo {
        &self.info[id.0 as usize]
    }

    /// A monitor mask indexed by entity id.
    pub fn monitor_mask(&self, monitor: &std::collections::BTreeSet<EntityId>) -> Vec<bool> {
        let mut mask = vec![false; self.info.len()];
        for m in monitor {
            if let Some(slot) = mask.get_mut(m.0 as usize) {
                *slot = true;
            }
        }
        mask
    }

    /// Runs the driver on `input`.
    pub fn execute(&self, input: &[u8], monitor: &[bool], run_id: u64, budget: u64) -> ExecTrace {
        let mut m = Machine {
            prog: self,
            mem: vec![Vec::new()],
            tick: 0,
            budget,
            monitor,
            trace: ExecTrace {
                run_id,
                block_facts: Vec::new(),
                value_facts: Vec::new(),
                exit: Exit::Ok,
                blocks_executed: 0,
                truncated: false,
                edges: Vec::new(),
            },
            counts: HashMap::new(),
            covered: vec![false; self.edge_count],
            frames: Vec::new(),
        };
        let exit = match m.run(input) {
            Ok(()) => Exit::Ok,
            Err(Stop::Abort) => Exit::Abort,
            Err(Stop::Error(msg)) => Exit::Error(msg),
        };
        m.trace.exit = exit;
        m.trace.blocks_executed = m.tick;
        m.trace.edges = m.covered.iter().enumerate().filter(|(_, c)| **c).map(|(i, _)| i as u32).collect();
        m.trace
    }
}

#[derive(Debug)]
enum Stop {
    Abort,
    Error(String),
}

enum Flow {
    Normal,
    Return(Val),
}

struct Frame {
    locals: Vec<u32>,
    last_block: Option<EntityId>,
}

struct Machine<'p, 'a> {
    prog: &'p Program<'a>,
    mem: Vec<Vec<Val>>,
    tick: u64,
    budget: u64,
    monitor: &'p [bool],
    trace: ExecTrace,
    counts: HashMap<EntityId, u32>,
    covered: Vec<bool>,
    frames: Vec<Frame>,
}

type R<T> = Result<T, Stop>;

fn truthy(v: Val) -> bool {
    match v {
        Val::Int(x) => x != 0,
        Val::Addr(a, _) => a != 0,
    }
}

fn wrap(v: Val, ty: Ty) -> Val {
    match (v, ty) {
        (Val::Int(x), Ty::Int(w)) => Val::Int(w.wrap(x)),
        (Val::Int(0), Ty::Ptr(_)) => NULL,
        _ => v,
    }
}

fn render(v: Val, ty: Ty) -> RuntimeValue {
    match v {
        Val::Int(x) if ty.unsigned64() => RuntimeValue::Int(x as u64 as i128),
        Val::Int(x) if matches!(ty, Ty::Ptr(_)) && x == 0 => RuntimeValue::Addr { alloc: 0, offset: 0 },
        Val::Int(x) => RuntimeValue::Int(x as i128),
        Val::Addr(a, o) => RuntimeValue::Addr { alloc: a as u64, offset: o },
    }
}

impl Machine<'_, '_> {
    fn fault(&self, at: EntityId, msg: &str) -> Stop {
        Stop::Error(format!("{}: {msg}", self.prog.db.ast.node(at).loc))
    }

    fn alloc(&mut self, cells: i64) -> u32 {
        self.mem.push(vec![Val::Int(0); cells.max(0) as usize]);
        (self.mem.len() - 1) as u32
    }

    fn run(&mut self, input: &[u8]) -> R<()> {
        let prog = self.prog;
        for &(decl, ty) in &prog.globals {
            let a = self.alloc(ty.cells());
            if let Some(&init) = prog.db.ast.node(decl).children.first() {
                let v = self.eval(init)?;
                self.mem[a as usize][0] = wrap(v, ty);
            }
        }
        let buf = self.alloc(input.len() as i64);
        for (i, b) in input.iter().enumerate() {
            self.mem[buf as usize][i] = Val::Int(*b as i64);
        }
        let driver = &prog.functions[prog.driver as usize];
        let (mut gave_ptr, mut gave_len) = (false, false);
        let args: Vec<Val> = driver
            .params
            .iter()
            .map(|p| match prog.info(*p).ty {
                Ty::Ptr(_) if !gave_ptr => {
                    gave_ptr = true;
                    Val::Addr(buf, 0)
                }
                Ty::Int(_) if !gave_len => {
                    gave_len = true;
                    Val::Int(input.len() as i64)
                }
                Ty::Ptr(_) => NULL,
                _ => Val::Int(0),
            })
            .collect();
        self.call(prog.driver, args, prog.functions[prog.driver as usize].id)?;
        Ok(())
    }

    fn enter(&mut self, block: EntityId) -> R<()> {
        if self.tick >= self.budget {
            return Err(Stop::Error("budget".into()));
        }
        self.tick += 1;
        self.trace.block_facts.push((self.tick, block));
        let frame = self.frames.last_mut().unwrap();
        if let Some(prev) = frame.last_block {
            let idx = (prev.0 - self.prog.first_block) as usize;
            if let Some(&(_, e)) = self.prog.succ[idx].iter().find(|(d, _)| *d == block) {
                self.covered[e as usize] = true;
            }
        }
        frame.last_block = Some(block);
        Ok(())
    }

    fn fact(&mut self, access: EntityId, v: Val, ty: Ty) {
        if !ty.scalar() || !self.monitor.get(access.0 as usize).copied().unwrap_or(false) {
            return;
        }
        let c = self.counts.entry(access).or_insert(0);
        if *c >= VALUE_FACT_CAP {
            self.trace.truncated = true;
            return;
        }
        *c += 1;
        self.trace.value_facts.push(ValueFact { tick: self.tick, access, value: render(v, ty) });
    }

    fn call(&mut self, func: u32, args: Vec<Val>, at: EntityId) -> R<Val> {
        if self.frames.len() >= MAX_CALL_DEPTH {
            return Err(self.fault(at, "call depth exceeded"));
        }
        let prog = self.prog;
        let f = &prog.functions[func as usize];
        self.frames.push(Frame { locals: vec![0; f.locals as usize], last_block: None });
        self.enter(f.entry)?;
        for (p, v) in f.params.iter().zip(args) {
            let ty = prog.info(*p).ty;
            let a = self.alloc(ty.cells());
            let v = wrap(v, ty);
            self.mem[a as usize][0] = v;
            if let VarLoc::Local(slot) = prog.info(*p).var {
                self.frames.last_mut().unwrap().locals[slot as usize] = a;
            }
            self.fact(*p, v, ty);
        }
        let flow = self.exec(f.body)?;
        self.frames.pop();
        Ok(match flow {
            Flow::Return(v) => wrap(v, f.ret),
            Flow::Normal => Val::Int(0),
        })
    }

    fn exec(&mut self, id: EntityId) -> R<Flow> {
        let prog = self.prog;
        let n = prog.db.ast.node(id);
        match n.kind {
            NodeKind::Block => {
                for c in &n.children {
                    if let Flow::Return(v) = self.exec(*c)? {
                        return Ok(Flow::Return(v));
                    }
                }
            }
            NodeKind::VarDecl => {
                let ty = prog.info(id).ty;
                let VarLoc::Local(slot) = prog.info(id).var else { unreachable!("local declaration") };
                let v = match n.children.first() {
                    Some(&init) => Some(wrap(self.eval(init)?, ty)),
                    None => None,
                };
                let frame = self.frames.last_mut().unwrap();
                let mut a = frame.locals[slot as usize];
                if a == 0 {
                    a = self.alloc(ty.cells());
                    self.frames.last_mut().unwrap().locals[slot as usize] = a;
                } else {
                    self.mem[a as usize].iter_mut().for_each(|c| *c = Val::Int(0));
                }
                if let Some(v) = v {
                    self.mem[a as usize][0] = v;
                    self.fact(id, v, ty);
                }
            }
            NodeKind::Assign => {
                let (lhs, rhs) = (n.children[0], n.children[1]);
                let lt = prog.info(lhs).ty;
                let r = self.eval(rhs)?;
                let place = self.place(lhs)?;
                let v = match prog.info(id).op {
                    Op::None => r,
                    op => {
                        let cur = self.load(place, lt, lhs)?;
                        self.arith(op, cur, r, lt, prog.info(rhs).ty, lt, id)?
                    }
                };
                let v = wrap(v, lt);
                self.store(place, v, lhs)?;
                self.fact(lhs, v, lt);
            }
            NodeKind::If => {
                let Some(&Layout::If { then_block, else_block, join }) = prog.db.layout(id) else {
                    unreachable!("if layout")
                };
                let c = self.eval(n.children[0])?;
                let flow = if truthy(c) {
                    self.enter(then_block)?;
                    self.exec(n.children[1])?
                } else if let (Some(&e), Some(b)) = (n.children.get(2), else_block) {
                    self.enter(b)?;
                    self.exec(e)?
                } else {
                    Flow::Normal
                };
                if let Flow::Normal = flow {
                    if let Some(j) = join {
                        self.enter(j)?;
                    }
                }
                return Ok(flow);
            }
            NodeKind::While => {
                let Some(&Layout::While { header, body, exit }) = prog.db.layout(id) else {
                    unreachable!("while layout")
                };
                self.enter(header)?;
                loop {
                    let c = self.eval(n.children[0])?;
                    if !truthy(c) {
                        self.enter(exit)?;
                        break;
                    }
                    self.enter(body)?;
                    if let Flow::Return(v) = self.exec(n.children[1])? {
                        return Ok(Flow::Return(v));
                    }
                    self.enter(header)?;
                }
            }
            NodeKind::For => {
                let Some(&Layout::For { header, body, latch, exit }) = prog.db.layout(id) else {
                    unreachable!("for layout")
                };
                self.exec(n.children[0])?;
                self.enter(header)?;
                loop {
                    let c = self.eval(n.children[1])?;
                    if !truthy(c) {
                        self.enter(exit)?;
                        break;
                    }
                    self.enter(body)?;
                    if let Flow::Return(v) = self.exec(n.children[3])? {
                        return Ok(Flow::Return(v));
                    }
                    self.enter(latch)?;
                    self.exec(n.children[2])?;
                    self.enter(header)?;
                }
            }
            NodeKind::Return => {
                let v = match n.children.first() {
                    Some(&e) => self.eval(e)?,
                    None => Val::Int(0),
                };
                return Ok(Flow::Return(v));
            }
            NodeKind::Abort => return Err(Stop::Abort),
            NodeKind::Call => {
                self.eval(id)?;
            }
            _ => {}
        }
        Ok(Flow::Normal)
    }

    fn var_alloc(&mut self, id: EntityId) -> u32 {
        match self.prog.info(id).var {
            VarLoc::Global(a) => a,
            VarLoc::Local(slot) => {
                let a = self.frames.last().unwrap().locals[slot as usize];
                if a != 0 {
                    return a;
                }
                // Declared in a scope that has not run yet in this frame.
                let decl = self.prog.db.sema.var_ref.get(&id).copied().unwrap_or(id);
                let a = self.alloc(self.prog.info(decl).ty.cells());
                self.frames.last_mut().unwrap().locals[slot as usize] = a;
                a
            }
            VarLoc::None => 0,
        }
    }

    /// Address of an lvalue-shaped expression.
    fn place(&mut self, id: EntityId) -> R<(u32, i64)> {
        let prog = self.prog;
        let n = prog.db.ast.node(id);
        match n.kind {
            NodeKind::VarRef => Ok((self.var_alloc(id), 0)),
            NodeKind::FieldAccess => {
                let off = prog.info(id).field_offset;
                let (a, o) = if n.attrs.arrow { self.pointer(n.children[0], id)? } else { self.place(n.children[0])? };
                Ok((a, o + off))
            }
            NodeKind::Index => {
                let base = n.children[0];
                let (a, o) = match prog.info(base).ty {
                    Ty::Array(_) => self.place(base)?,
                    _ => self.pointer(base, id)?,
                };
                let i = match self.eval(n.children[1])? {
                    Val::Int(i) => i,
                    Val::Addr(..) => return Err(self.fault(id, "pointer used as index")),
                };
                Ok((a, o.wrapping_add(i)))
            }
            NodeKind::Deref => self.pointer(n.children[0], id),
            _ => Err(self.fault(id, "expression is not addressable")),
        }
    }

    fn pointer(&mut self, expr: EntityId, at: EntityId) -> R<(u32, i64)> {
        match self.eval(expr)? {
            Val::Addr(a, o) if a != 0 => Ok((a, o)),
            _ => Err(self.fault(at, "null pointer dereference")),
        }
    }

    fn cell(&self, (a, o): (u32, i64), at: EntityId) -> R<usize> {
        let len = self.mem[a as usize].len() as i64;
        if a == 0 || o < 0 || o >= len {
            return Err(self.fault(at, "out-of-bounds access"));
        }
        Ok(o as usize)
    }

    fn load(&self, place: (u32, i64), ty: Ty, at: EntityId) -> R<Val> {
        match ty {
            Ty::Array(_) => Ok(Val::Addr(place.0, place.1)),
            Ty::Struct(_) => Err(self.fault(at, "struct used as a value")),
            _ => {
                let i = self.cell(place, at)?;
                Ok(wrap(self.mem[place.0 as usize][i], ty))
            }
        }
    }

    fn store(&mut self, place: (u32, i64), v: Val, at: EntityId) -> R<()> {
        let i = self.cell(place, at)?;
        self.mem[place.0 as usize][i] = v;
        Ok(())
    }

    fn eval(&mut self, id: EntityId) -> R<Val> {
        let prog = self.prog;
        let n = prog.db.ast.node(id);
        let info = prog.info(id);
        let ty = info.ty;
        match n.kind {
            NodeKind::Literal => Ok(Val::Int(n.attrs.value.unwrap() as i64)),
            NodeKind::VarRef | NodeKind::FieldAccess | NodeKind::Index | NodeKind::Deref => {
                let p = self.place(id)?;
                let v = self.load(p, ty, id)?;
                self.fact(id, v, ty);
                Ok(v)
            }
            NodeKind::AddressOf => {
                let (a, o) = self.place(n.children[0])?;
                Ok(Val::Addr(a, o))
            }
            NodeKind::UnaryOp => {
                let v = self.eval(n.children[0])?;
                let r = match (info.op, v) {
                    (Op::Cast, v) => v,
                    (Op::LNot, v) => Val::Int(!truthy(v) as i64),
                    (Op::Sub, Val::Int(x)) => Val::Int(x.wrapping_neg()),
                    (Op::BitNot, Val::Int(x)) => Val::Int(!x),
                    _ => return Err(self.fault(id, "bad unary operand")),
                };
                Ok(wrap(r, ty))
            }
            NodeKind::BinOp => {
                let (l, r) = (n.children[0], n.children[1]);
                match info.op {
                    Op::LAnd => {
                        let lv = truthy(self.eval(l)?);
                        Ok(Val::Int((lv && truthy(self.eval(r)?)) as i64))
                    }
                    Op::LOr => {
                        let lv = truthy(self.eval(l)?);
                        Ok(Val::Int((lv || truthy(self.eval(r)?)) as i64))
                    }
                    op => {
                        let lv = self.eval(l)?;
                        let rv = self.eval(r)?;
                        let v = self.arith(op, lv, rv, prog.info(l).ty, prog.info(r).ty, ty, id)?;
                        Ok(wrap(v, ty))
                    }
                }
            }
            NodeKind::Call => {
                let mut args = Vec::with_capacity(n.children.len());
                for c in &n.children {
                    args.push(self.eval(*c)?);
                }
                self.call(info.callee, args, id)
            }
            _ => Err(self.fault(id, "not an expression")),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn arith(&self, op: Op, l: Val, r: Val, lt: Ty, rt: Ty, res: Ty, at: EntityId) -> R<Val> {
        let stride = |t: Ty| match t {
            Ty::Ptr(s) => s,
            _ => 1,
        };
        let v = match (l, r) {
            (Val::Addr(a, o), Val::Int(k)) if matches!(op, Op::Add | Op::Sub) => {
                let d = k.wrapping_mul(stride(lt));
                Val::Addr(a, if op == Op::Add { o.wrapping_add(d) } else { o.wrapping_sub(d) })
            }
            (Val::Int(k), Val::Addr(a, o)) if op == Op::Add => Val::Addr(a, o.wrapping_add(k.wrapping_mul(stride(rt)))),
            (Val::Addr(a, o), Val::Addr(b, p)) => {
                let c = (a, o).cmp(&(b, p));
                Val::Int(match op {
                    Op::Eq => c.is_eq(),
                    Op::Ne => c.is_ne(),
                    Op::Lt => c.is_lt(),
                    Op::Le => c.is_le(),
                    Op::Gt => c.is_gt(),
                    Op::Ge => c.is_ge(),
                    _ => return Err(self.fault(at, "bad pointer operands")),
                } as i64)
            }
            (Val::Int(x), Val::Int(y)) => {
                let unsigned = lt.unsigned64() || rt.unsigned64();
                let cmp = if unsigned { (x as u64).cmp(&(y as u64)) } else { x.cmp(&y) };
                let res_u = res.unsigned64();
                Val::Int(match op {
                    Op::Add => x.wrapping_add(y),
                    Op::Sub => x.wrapping_sub(y),
                    Op::Mul => x.wrapping_mul(y),
                    Op::Div | Op::Mod if y == 0 => return Err(self.fault(at, "division by zero")),
                    Op::Div if res_u => ((x as u64) / (y as u64)) as i64,
                    Op::Div => x.wrapping_div(y),
                    Op::Mod if res_u => ((x as u64) % (y as u64)) as i64,
                    Op::Mod => x.wrapping_rem(y),
                    Op::Shl => x.wrapping_shl((y & 63) as u32),
                    Op::Shr if res_u => ((x as u64) >> (y & 63)) as i64,
                    Op::Shr => x >> (y & 63),
                    Op::And => x & y,
                    Op::Or => x | y,
                    Op::Xor => x ^ y,
                    Op::Eq => (x == y) as i64,
                    Op::Ne => (x != y) as i64,
                    Op::Lt => cmp.is_lt() as i64,
                    Op::Le => cmp.is_le() as i64,
                    Op::Gt => cmp.is_gt() as i64,
                    Op::Ge => cmp.is_ge() as i64,
                    _ => return Err(self.fault(at, "bad integer operator")),
                })
            }
            _ => return Err(self.fault(at, "bad operands")),
        };
        Ok(v)
    }
}
