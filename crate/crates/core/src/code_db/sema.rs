//! Name resolution and static typing.

use std::collections::{BTreeMap, HashMap};

use crate::lang::{Ast, EntityId, MiniCType, NodeKind, SourceLocation};

use super::DbError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarInfo {
    pub decl: EntityId,
    pub name: String,
    pub ty: MiniCType,
    /// `None` for globals.
    pub function: Option<EntityId>,
    pub is_param: bool,
    pub address_taken: bool,
}

impl VarInfo {
    pub fn is_global(&self) -> bool {
        self.function.is_none()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Semantics {
    /// Declared variables keyed by their VarDecl id.
    pub vars: BTreeMap<EntityId, VarInfo>,
    /// VarRef id to the VarDecl it names.
    pub var_ref: HashMap<EntityId, EntityId>,
    /// Call id to callee FunctionDef id.
    pub callee: HashMap<EntityId, EntityId>,
    /// Static type of every expression node.
    pub types: HashMap<EntityId, MiniCType>,
    pub structs: BTreeMap<String, Vec<(String, MiniCType)>>,
    pub functions: BTreeMap<String, EntityId>,
    /// Enclosing FunctionDef of every node inside a function.
    pub enclosing_fn: HashMap<EntityId, EntityId>,
    /// Access path of every variable-access node (VarRef, FieldAccess, Index,
    /// Deref, VarDecl).
    pub paths: HashMap<EntityId, AccessPath>,
}

/// Memory path read or written by an access, e.g. `imgp->x` or `g.cur`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AccessPath {
    /// Root variable declaration, or `None` when the base is not a variable
    /// (call result, pointer arithmetic).
    pub root: Option<EntityId>,
    /// Rendered symbol, unique per program (`name@decl` plus steps).
    pub symbol: String,
}

impl Semantics {
    pub fn field_index(&self, struct_name: &str, field: &str) -> Option<(usize, &MiniCType)> {
        self.structs
            .get(struct_name)?
            .iter()
            .enumerate()
            .find(|(_, (n, _))| n == field)
            .map(|(i, (_, t))| (i, t))
    }

    pub fn type_of(&self, id: EntityId) -> Option<&MiniCType> {
        self.types.get(&id)
    }

    pub fn var_of_ref(&self, id: EntityId) -> Option<&VarInfo> {
        self.var_ref.get(&id).and_then(|d| self.vars.get(d))
    }
}

pub(super) fn resolve(ast: &Ast) -> Result<Semantics, DbError> {
    let mut r = Resolver { ast, sema: Semantics::default(), scopes: Vec::new() };
    r.run()?;
    Ok(r.sema)
}

struct Resolver<'a> {
    ast: &'a Ast,
    sema: Semantics,
    scopes: Vec<HashMap<String, EntityId>>,
}

fn name_err(loc: &SourceLocation, message: String) -> DbError {
    DbError::NameResolution { loc: loc.clone(), message }
}

fn type_err(loc: &SourceLocation, message: String) -> DbError {
    DbError::Type { loc: loc.clone(), message }
}

/// Assignment compatibility: integers convert freely; pointers must match,
/// except that a byte array decays to `u8*`.
pub fn assignable(to: &MiniCType, from: &MiniCType) -> bool {
    if to.is_integer() && from.is_integer() {
        return true;
    }
    match (to, from) {
        (MiniCType::Ptr(a), MiniCType::Ptr(b)) => a == b,
        (MiniCType::Ptr(a), MiniCType::ByteArray(_)) => **a == MiniCType::U8,
        _ => false,
    }
}

impl<'a> Resolver<'a> {
    fn run(&mut self) -> Result<(), DbError> {
        let ast = self.ast;
        let root = ast.node(ast.root());
        self.scopes.push(HashMap::new());

        // Structs and function signatures first so bodies may call forward.
        for item in ast.children(root.id) {
            match item.kind {
                NodeKind::StructDef => {
                    let fields = ast
                        .children(item.id)
                        .map(|f| (f.attrs.name.clone().unwrap(), f.attrs.ty.clone().unwrap()))
                        .collect();
                    self.sema.structs.insert(item.attrs.name.clone().unwrap(), fields);
                }
                NodeKind::FunctionDef => {
                    let name = item.attrs.name.clone().unwrap();
                    if self.sema.functions.insert(name.clone(), item.id).is_some() {
                        return Err(name_err(&item.loc, format!("function `{name}` redefined")));
                    }
                }
                _ => {}
            }
        }

        for item in ast.children(root.id) {
            match item.kind {
                NodeKind::VarDecl => {
                    if let Some(init) = item.children.first() {
                        self.check_constant(*init)?;
                        self.expr(*init, None)?;
                    }
                    self.declare(item.id, None, false)?;
                }
                NodeKind::FunctionDef => self.function(item.id)?,
                _ => {}
            }
        }
        Ok(())
    }

    fn check_constant(&self, id: EntityId) -> Result<(), DbError> {
        let n = self.ast.node(id);
        match n.kind {
            NodeKind::Literal => Ok(()),
            NodeKind::UnaryOp | NodeKind::BinOp if n.attrs.op.as_deref() != Some("cast") => {
                n.children.iter().try_for_each(|c| self.check_constant(*c))
            }
            _ => Err(type_err(&n.loc, "global initializers must be constant".into())),
        }
    }

    fn declare(&mut self, decl: EntityId, function: Option<EntityId>, is_param: bool) -> Result<(), DbError> {
        let n = self.ast.node(decl);
        let name = n.attrs.name.clone().unwrap();
        let ty = n.attrs.ty.clone().unwrap();
        if self.sema.functions.contains_key(&name) && function.is_none() {
            return Err(name_err(&n.loc, format!("`{name}` already names a function")));
        }
        let scope = self.scopes.last_mut().unwrap();
        if scope.insert(name.clone(), decl).is_some() {
            return Err(name_err(&n.loc, format!("`{name}` redeclared in the same scope")));
        }
        if let Some(init) = n.children.first() {
            let it = self.sema.types.get(init).cloned().unwrap();
            if !assignable(&ty, &it) {
                return Err(type_err(&n.loc, format!("cannot initialize `{ty}` from `{it}`")));
            }
        }
        if let Some(f) = function {
            self.sema.enclosing_fn.insert(decl, f);
        }
        self.sema.vars.insert(
            decl,
            VarInfo { decl, name: name.clone(), ty, function, is_param, address_taken: false },
        );
        self.sema.paths.insert(decl, AccessPath { root: Some(decl), symbol: format!("{name}@{decl}") });
        Ok(())
    }

    fn lookup(&self, name: &str) -> Option<EntityId> {
        self.scopes.iter().rev().find_map(|s| s.get(name).copied())
    }

    fn function(&mut self, fid: EntityId) -> Result<(), DbError> {
        let ast = self.ast;
        let f = ast.node(fid);
        self.scopes.push(HashMap::new());
        let (params, body) = f.children.split_at(f.children.len() - 1);
        for p in params {
            self.declare(*p, Some(fid), true)?;
        }
        self.sema.enclosing_fn.insert(fid, fid);
        self.stmt(body[0], fid)?;
        self.scopes.pop();
        Ok(())
    }

    fn stmt(&mut self, id: EntityId, fid: EntityId) -> Result<(), DbError> {
        let ast = self.ast;
        let n = ast.node(id);
        self.sema.enclosing_fn.insert(id, fid);
        match n.kind {
            NodeKind::Block => {
                self.scopes.push(HashMap::new());
                for c in &n.children {
                    self.stmt(*c, fid)?;
                }
                self.scopes.pop();
            }
            NodeKind::VarDecl => {
                if let Some(init) = n.children.first() {
                    self.expr(*init, Some(fid))?;
                }
                self.declare(id, Some(fid), false)?;
            }
            NodeKind::Assign => {
                let lt = self.expr(n.children[0], Some(fid))?;
                let rt = self.expr(n.children[1], Some(fid))?;
                let op = n.attrs.op.as_deref().unwrap_or("=");
                let ok = if op == "=" {
                    assignable(&lt, &rt)
                } else if lt.is_pointer() {
                    matches!(op, "+=" | "-=") && rt.is_integer()
                } else {
                    lt.is_integer() && rt.is_integer()
                };
                if !ok {
                    return Err(type_err(&n.loc, format!("cannot apply `{op}` to `{lt}` and `{rt}`")));
                }
            }
            NodeKind::If | NodeKind::While => {
                let ct = self.expr(n.children[0], Some(fid))?;
                self.require_condition(n.children[0], &ct)?;
                for c in &n.children[1..] {
                    self.stmt(*c, fid)?;
                }
            }
            NodeKind::For => {
                self.scopes.push(HashMap::new());
                self.stmt(n.children[0], fid)?;
                let ct = self.expr(n.children[1], Some(fid))?;
                self.require_condition(n.children[1], &ct)?;
                self.stmt(n.children[2], fid)?;
                self.stmt(n.children[3], fid)?;
                self.scopes.pop();
            }
            NodeKind::Return => {
                let ret = ast.node(fid).attrs.ty.clone().unwrap();
                match (n.children.first(), &ret) {
                    (None, MiniCType::Void) => {}
                    (None, _) => return Err(type_err(&n.loc, "missing return value".into())),
                    (Some(_), MiniCType::Void) => {
                        return Err(type_err(&n.loc, "void function returns a value".into()))
                    }
                    (Some(e), _) => {
                        let et = self.expr(*e, Some(fid))?;
                        if !assignable(&ret, &et) {
                            return Err(type_err(&n.loc, format!("cannot return `{et}` as `{ret}`")));
                        }
                    }
                }
            }
            NodeKind::Abort => {}
            NodeKind::Call => {
                self.expr(id, Some(fid))?;
            }
            _ => return Err(type_err(&n.loc, format!("unexpected {} in statement position", n.kind.as_str()))),
        }
        Ok(())
    }

    fn require_condition(&self, id: EntityId, ty: &MiniCType) -> Result<(), DbError> {
        if ty.is_integer() || ty.is_pointer() {
            Ok(())
        } else {
            Err(type_err(&self.ast.node(id).loc, format!("condition of type `{ty}`")))
        }
    }

    fn expr(&mut self, id: EntityId, fid: Option<EntityId>) -> Result<MiniCType, DbError> {
        let ast = self.ast;
        let n = ast.node(id);
        if let Some(f) = fid {
            self.sema.enclosing_fn.insert(id, f);
        }
        let ty = match n.kind {
            NodeKind::Literal => MiniCType::I64,
            NodeKind::VarRef => {
                let name = n.attrs.name.as_deref().unwrap();
                let decl = self
                    .lookup(name)
                    .ok_or_else(|| name_err(&n.loc, format!("undeclared identifier `{name}`")))?;
                self.sema.var_ref.insert(id, decl);
                let info = &self.sema.vars[&decl];
                self.sema.paths.insert(
                    id,
                    AccessPath { root: Some(decl), symbol: format!("{}@{}", info.name, decl) },
                );
                info.ty.clone()
            }
            NodeKind::Call => {
                let name = n.attrs.name.as_deref().unwrap();
                let callee = *self
                    .sema
                    .functions
                    .get(name)
                    .ok_or_else(|| name_err(&n.loc, format!("unknown callee `{name}`")))?;
                let cf = ast.node(callee);
                let params = &cf.children[..cf.children.len() - 1];
                if params.len() != n.children.len() {
                    return Err(type_err(
                        &n.loc,
                        format!("`{name}` expects {} arguments, got {}", params.len(), n.children.len()),
                    ));
                }
                for (a, p) in n.children.iter().zip(params) {
                    let at = self.expr(*a, fid)?;
                    let pt = ast.node(*p).attrs.ty.as_ref().unwrap();
                    if !assignable(pt, &at) {
                        return Err(type_err(&ast.node(*a).loc, format!("argument `{at}` does not match `{pt}`")));
                    }
                }
                self.sema.callee.insert(id, callee);
                cf.attrs.ty.clone().unwrap()
            }
            NodeKind::BinOp => {
                let lt = self.expr(n.children[0], fid)?;
                let rt = self.expr(n.children[1], fid)?;
                let op = n.attrs.op.as_deref().unwrap();
                binop_type(op, &lt, &rt).ok_or_else(|| {
                    type_err(&n.loc, format!("operator `{op}` on `{lt}` and `{rt}`"))
                })?
            }
            NodeKind::UnaryOp => {
                let ot = self.expr(n.children[0], fid)?;
                match n.attrs.op.as_deref() {
                    Some("cast") => {
                        let target = n.attrs.ty.clone().unwrap();
                        let ok = (target.is_integer() && ot.is_integer())
                            || (target.is_pointer() && (ot.is_pointer() || matches!(ot, MiniCType::ByteArray(_))));
                        if !ok {
                            return Err(type_err(&n.loc, format!("cannot cast `{ot}` to `{target}`")));
                        }
                        target
                    }
                    Some("!") if ot.is_integer() || ot.is_pointer() => MiniCType::I32,
                    Some(_) if ot.is_integer() => ot,
                    _ => return Err(type_err(&n.loc, format!("unary operator on `{ot}`"))),
                }
            }
            NodeKind::FieldAccess => {
                let bt = self.expr(n.children[0], fid)?;
                let sname = match (&bt, n.attrs.arrow) {
                    (MiniCType::Struct(s), false) => s.clone(),
                    (MiniCType::Ptr(inner), true) => match inner.as_ref() {
                        MiniCType::Struct(s) => s.clone(),
                        _ => return Err(type_err(&n.loc, format!("`->` on `{bt}`"))),
                    },
                    _ => {
                        return Err(type_err(
                            &n.loc,
                            format!("`{}` on `{bt}`", if n.attrs.arrow { "->" } else { "." }),
                        ))
                    }
                };
                let field = n.attrs.name.as_deref().unwrap();
                let (_, ft) = self
                    .sema
                    .field_index(&sname, field)
                    .ok_or_else(|| name_err(&n.loc, format!("struct {sname} has no field `{field}`")))?;
                let ft = ft.clone();
                self.derive_path(id, n.children[0], &format!("{}{field}", if n.attrs.arrow { "->" } else { "." }));
                ft
            }
            NodeKind::Index => {
                let bt = self.expr(n.children[0], fid)?;
                let it = self.expr(n.children[1], fid)?;
                if !it.is_integer() {
                    return Err(type_err(&n.loc, format!("index of type `{it}`")));
                }
                let et = match &bt {
                    MiniCType::ByteArray(_) => MiniCType::U8,
                    MiniCType::Ptr(inner) if inner.is_scalar() => (**inner).clone(),
                    _ => return Err(type_err(&n.loc, format!("cannot index `{bt}`"))),
                };
                self.derive_path(id, n.children[0], "[]");
                et
            }
            NodeKind::Deref => {
                let bt = self.expr(n.children[0], fid)?;
                let inner = match &bt {
                    MiniCType::Ptr(inner) => (**inner).clone(),
                    _ => return Err(type_err(&n.loc, format!("cannot dereference `{bt}`"))),
                };
                let base = self.sema.paths.get(&n.children[0]).cloned();
                let path = match base {
                    Some(p) => AccessPath { root: p.root, symbol: format!("*({})", p.symbol) },
                    None => AccessPath { root: None, symbol: format!("*(expr@{})", n.children[0]) },
                };
                self.sema.paths.insert(id, path);
                inner
            }
            NodeKind::AddressOf => {
                let ot = self.expr(n.children[0], fid)?;
                if let Some(root) = self.sema.paths.get(&n.children[0]).and_then(|p| p.root) {
                    if let Some(v) = self.sema.vars.get_mut(&root) {
                        v.address_taken = true;
                    }
                }
                match ot {
                    MiniCType::ByteArray(_) => MiniCType::Ptr(Box::new(MiniCType::U8)),
                    t if t.pointer_depth() >= 2 => {
                        return Err(type_err(&n.loc, "pointer nesting deeper than 2".into()))
                    }
                    t => MiniCType::Ptr(Box::new(t)),
                }
            }
            _ => return Err(type_err(&n.loc, format!("unexpected {} in expression", n.kind.as_str()))),
        };
        self.sema.types.insert(id, ty.clone());
        Ok(ty)
    }

    fn derive_path(&mut self, id: EntityId, base: EntityId, step: &str) {
        let path = match self.sema.paths.get(&base) {
            Some(p) => AccessPath { root: p.root, symbol: format!("{}{step}", p.symbol) },
            None => AccessPath { root: None, symbol: format!("expr@{base}{step}") },
        };
        self.sema.paths.insert(id, path);
    }
}

fn binop_type(op: &str, l: &MiniCType, r: &MiniCType) -> Option<MiniCType> {
    let decayed = |t: &MiniCType| match t {
        MiniCType::ByteArray(_) => MiniCType::Ptr(Box::new(MiniCType::U8)),
        t => t.clone(),
    };
    let (l, r) = (decayed(l), decayed(r));
    match op {
        "==" | "!=" | "<" | "<=" | ">" | ">=" => {
            let ok = (l.is_integer() && r.is_integer()) || (l.is_pointer() && l == r);
            ok.then_some(MiniCType::I32)
        }
        "&&" | "||" => ((l.is_integer() || l.is_pointer()) && (r.is_integer() || r.is_pointer()))
            .then_some(MiniCType::I32),
        "+" | "-" if l.is_pointer() && r.is_integer() => Some(l),
        "+" if l.is_integer() && r.is_pointer() => Some(r),
        _ if l.is_integer() && r.is_integer() => Some(wider(&l, &r)),
        _ => None,
    }
}

/// Result type of integer arithmetic: the wider operand, unsigned on ties.
pub fn wider(l: &MiniCType, r: &MiniCType) -> MiniCType {
    let (lw, rw) = (l.width().unwrap(), r.width().unwrap());
    match lw.bits().cmp(&rw.bits()) {
        std::cmp::Ordering::Greater => l.clone(),
        std::cmp::Ordering::Less => r.clone(),
        std::cmp::Ordering::Equal if !lw.signed() => l.clone(),
        std::cmp::Ordering::Equal => r.clone(),
    }
}
