use std::collections::{BTreeSet, HashMap};

use super::ast::{Ast, Attrs, EntityId, MiniCType, Node, NodeKind, SourceLocation};
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;

/// Owned tree produced while parsing; flattened into an [`Ast`] afterwards so
/// ids come out in pre-order.
struct PNode {
    kind: NodeKind,
    children: Vec<PNode>,
    start: (u32, u32),
    end: (u32, u32),
    file_idx: usize,
    attrs: Attrs,
}

impl PNode {
    fn new(kind: NodeKind, start: (u32, u32), end: (u32, u32), file_idx: usize) -> Self {
        PNode { kind, children: Vec::new(), start, end, file_idx, attrs: Attrs::default() }
    }
}

const TYPE_WORDS: [&str; 6] = ["u8", "u32", "i32", "u64", "i64", "void"];
const ASSIGN_OPS: [&str; 11] = ["=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>="];
const RESERVED: [&str; 13] = [
    "u8", "u32", "i32", "u64", "i64", "void", "struct", "if", "else", "while", "for", "return",
    "abort",
];

/// Scope shared across the files of one project: constants and struct names
/// declared earlier remain visible to later files.
#[derive(Default)]
struct Scope {
    constants: HashMap<String, u64>,
    structs: BTreeSet<String>,
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    file: &'a str,
    file_idx: usize,
    scope: &'a mut Scope,
}

type PResult<T> = Result<T, ParseError>;

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn here(&self) -> (u32, u32) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn last_end(&self) -> (u32, u32) {
        let t = &self.toks[self.pos.saturating_sub(1)];
        (t.end_line, t.end_col)
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        let t = &self.toks[self.pos];
        ParseError {
            loc: SourceLocation::point(self.file, t.line, t.col),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            message: format!("unexpected {}", t.tok.describe()),
        }
    }

    fn error_msg(&self, at: (u32, u32), message: String) -> ParseError {
        ParseError {
            loc: SourceLocation::point(self.file, at.0, at.1),
            expected: Vec::new(),
            message,
        }
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == w)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &'static str) -> PResult<Token> {
        if self.is_punct(p) {
            Ok(self.bump())
        } else {
            Err(self.error(&[p]))
        }
    }

    fn expect_word(&mut self, w: &'static str) -> PResult<Token> {
        if self.is_word(w) {
            Ok(self.bump())
        } else {
            Err(self.error(&[w]))
        }
    }

    fn expect_ident(&mut self) -> PResult<(String, Token)> {
        match self.peek().clone() {
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => {
                let t = self.bump();
                Ok((s, t))
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    fn node(&self, kind: NodeKind, start: (u32, u32)) -> PNode {
        PNode::new(kind, start, self.last_end(), self.file_idx)
    }

    fn at_type_start(&self) -> bool {
        match self.peek() {
            Tok::Ident(s) => TYPE_WORDS.contains(&s.as_str()) || s == "struct",
            _ => false,
        }
    }

    // ---- items -------------------------------------------------------------

    fn program_items(&mut self) -> PResult<Vec<PNode>> {
        let mut items = Vec::new();
        while *self.peek() != Tok::Eof {
            items.push(self.item()?);
        }
        Ok(items)
    }

    fn item(&mut self) -> PResult<PNode> {
        let start = self.here();
        if *self.peek() == Tok::Hash {
            return self.define();
        }
        if self.is_word("struct") && matches!(self.peek_at(2), Tok::Punct("{")) {
            return self.struct_def();
        }
        if !self.at_type_start() {
            return Err(self.error(&["#define", "struct", "type"]));
        }
        let ty = self.parse_type()?;
        let (name, _) = self.expect_ident()?;
        if self.is_punct("(") {
            return self.function_def(start, ty, name);
        }
        let decl = self.decl_tail(start, ty, name)?;
        self.expect_punct(";")?;
        let mut decl = decl;
        decl.end = self.last_end();
        Ok(decl)
    }

    fn define(&mut self) -> PResult<PNode> {
        let start = self.here();
        self.bump();
        self.expect_word("define")?;
        let (name, name_tok) = self.expect_ident()?;
        if self.scope.constants.contains_key(&name) {
            return Err(self.error_msg((name_tok.line, name_tok.col), format!("constant `{name}` redefined")));
        }
        let negative = self.eat_punct("-");
        let (value, spelling) = match self.peek().clone() {
            Tok::Int(v, s) => {
                self.bump();
                (v, s)
            }
            _ => return Err(self.error(&["integer literal"])),
        };
        let value = if negative { (value as i64).wrapping_neg() as u64 } else { value };
        let spelling = if negative { format!("-{spelling}") } else { spelling };
        self.scope.constants.insert(name.clone(), value);
        let mut n = self.node(NodeKind::ConstDef, start);
        n.attrs.name = Some(name);
        n.attrs.value = Some(value);
        n.attrs.spelling = Some(spelling);
        Ok(n)
    }

    fn struct_def(&mut self) -> PResult<PNode> {
        let start = self.here();
        self.expect_word("struct")?;
        let (name, name_tok) = self.expect_ident()?;
        if self.scope.structs.contains(&name) {
            return Err(self.error_msg((name_tok.line, name_tok.col), format!("struct `{name}` redefined")));
        }
        // Register first so fields may point at the struct being defined.
        self.scope.structs.insert(name.clone());
        self.expect_punct("{")?;
        let mut fields = Vec::new();
        let mut seen = BTreeSet::new();
        while !self.is_punct("}") {
            let fstart = self.here();
            let ty = self.parse_type()?;
            if ty == MiniCType::Void || ty == MiniCType::Struct(name.clone()) {
                return Err(self.error_msg(fstart, "invalid field type".into()));
            }
            if matches!(ty, MiniCType::Struct(_)) {
                return Err(self.error_msg(fstart, "structs are flat; nested struct fields are not supported".into()));
            }
            let (fname, ftok) = self.expect_ident()?;
            if !seen.insert(fname.clone()) {
                return Err(self.error_msg((ftok.line, ftok.col), format!("duplicate field `{fname}`")));
            }
            self.expect_punct(";")?;
            let mut f = self.node(NodeKind::VarDecl, fstart);
            f.attrs.name = Some(fname);
            f.attrs.ty = Some(ty);
            f.attrs.field = true;
            fields.push(f);
        }
        self.expect_punct("}")?;
        self.expect_punct(";")?;
        let mut n = self.node(NodeKind::StructDef, start);
        n.attrs.name = Some(name);
        n.children = fields;
        Ok(n)
    }

    fn parse_type(&mut self) -> PResult<MiniCType> {
        let start = self.here();
        let base = match self.peek().clone() {
            Tok::Ident(w) if w == "struct" => {
                self.bump();
                let (name, tok) = self.expect_ident()?;
                if !self.scope.structs.contains(&name) {
                    return Err(self.error_msg((tok.line, tok.col), format!("unknown struct `{name}`")));
                }
                MiniCType::Struct(name)
            }
            Tok::Ident(w) => {
                let t = match w.as_str() {
                    "u8" => MiniCType::U8,
                    "u32" => MiniCType::U32,
                    "i32" => MiniCType::I32,
                    "u64" => MiniCType::U64,
                    "i64" => MiniCType::I64,
                    "void" => MiniCType::Void,
                    _ => return Err(self.error(&["type"])),
                };
                self.bump();
                t
            }
            _ => return Err(self.error(&["type"])),
        };
        let mut ty = base;
        while self.eat_punct("*") {
            if ty == MiniCType::Void {
                return Err(self.error_msg(start, "void pointers are not supported".into()));
            }
            ty = MiniCType::Ptr(Box::new(ty));
            if ty.pointer_depth() > 2 {
                return Err(self.error_msg(start, "pointer nesting deeper than 2".into()));
            }
        }
        Ok(ty)
    }

    /// Parses `[N]` and `= init` after a declarator name.
    fn decl_tail(&mut self, start: (u32, u32), ty: MiniCType, name: String) -> PResult<PNode> {
        let mut ty = ty;
        if self.eat_punct("[") {
            if ty != MiniCType::U8 {
                return Err(self.error_msg(start, "only u8 arrays are supported".into()));
            }
            let n = match self.peek().clone() {
                Tok::Int(v, _) if v > 0 && v <= 1 << 20 => {
                    self.bump();
                    v as u32
                }
                _ => return Err(self.error(&["array length"])),
            };
            self.expect_punct("]")?;
            ty = MiniCType::ByteArray(n);
        }
        if ty == MiniCType::Void {
            return Err(self.error_msg(start, "variables cannot be void".into()));
        }
        let mut n = self.node(NodeKind::VarDecl, start);
        if self.eat_punct("=") {
            if matches!(ty, MiniCType::ByteArray(_) | MiniCType::Struct(_)) {
                return Err(self.error_msg(start, "aggregate initializers are not supported".into()));
            }
            n.children.push(self.expr()?);
        }
        n.end = self.last_end();
        n.attrs.name = Some(name);
        n.attrs.ty = Some(ty);
        Ok(n)
    }

    fn function_def(&mut self, start: (u32, u32), ret: MiniCType, name: String) -> PResult<PNode> {
        self.expect_punct("(")?;
        let mut children = Vec::new();
        if !self.is_punct(")") {
            loop {
                let pstart = self.here();
                let ty = self.parse_type()?;
                if ty == MiniCType::Void || matches!(ty, MiniCType::Struct(_)) {
                    return Err(self.error_msg(pstart, "parameters must be integers or pointers".into()));
                }
                let (pname, _) = self.expect_ident()?;
                let mut p = self.node(NodeKind::VarDecl, pstart);
                p.attrs.name = Some(pname);
                p.attrs.ty = Some(ty);
                p.attrs.param = true;
                children.push(p);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        if !self.is_punct("{") {
            return Err(self.error(&["{"]));
        }
        children.push(self.block()?);
        let mut n = self.node(NodeKind::FunctionDef, start);
        n.attrs.name = Some(name);
        n.attrs.ty = Some(ret);
        n.children = children;
        Ok(n)
    }

    // ---- statements --------------------------------------------------------

    fn block(&mut self) -> PResult<PNode> {
        let start = self.here();
        self.expect_punct("{")?;
        let mut stmts = Vec::new();
        while !self.is_punct("}") {
            if *self.peek() == Tok::Eof {
                return Err(self.error(&["}"]));
            }
            stmts.push(self.statement()?);
        }
        self.expect_punct("}")?;
        let mut n = self.node(NodeKind::Block, start);
        n.children = stmts;
        Ok(n)
    }

    fn statement(&mut self) -> PResult<PNode> {
        let start = self.here();
        if self.is_punct("{") {
            return self.block();
        }
        if self.is_word("if") {
            self.bump();
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let then = self.statement()?;
            let mut children = vec![cond, then];
            if self.is_word("else") {
                self.bump();
                children.push(self.statement()?);
            }
            let mut n = self.node(NodeKind::If, start);
            n.children = children;
            return Ok(n);
        }
        if self.is_word("while") {
            self.bump();
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let body = self.statement()?;
            let mut n = self.node(NodeKind::While, start);
            n.children = vec![cond, body];
            return Ok(n);
        }
        if self.is_word("for") {
            self.bump();
            self.expect_punct("(")?;
            let init = self.simple_statement()?;
            self.expect_punct(";")?;
            let cond = self.expr()?;
            self.expect_punct(";")?;
            let step = self.simple_statement()?;
            if step.kind != NodeKind::Assign {
                return Err(self.error_msg(step.start, "for-step must be an assignment".into()));
            }
            self.expect_punct(")")?;
            let body = self.statement()?;
            let mut n = self.node(NodeKind::For, start);
            n.children = vec![init, cond, step, body];
            return Ok(n);
        }
        if self.is_word("return") {
            self.bump();
            let mut n = PNode::new(NodeKind::Return, start, start, self.file_idx);
            if !self.is_punct(";") {
                n.children.push(self.expr()?);
            }
            self.expect_punct(";")?;
            n.end = self.last_end();
            return Ok(n);
        }
        if self.is_word("abort") {
            self.bump();
            self.expect_punct("(")?;
            self.expect_punct(")")?;
            self.expect_punct(";")?;
            return Ok(self.node(NodeKind::Abort, start));
        }
        let mut s = self.simple_statement()?;
        self.expect_punct(";")?;
        if s.kind != NodeKind::Call {
            s.end = self.last_end();
        }
        Ok(s)
    }

    /// Declaration, assignment, or call, without the trailing `;`.
    fn simple_statement(&mut self) -> PResult<PNode> {
        let start = self.here();
        if self.at_type_start() {
            let ty = self.parse_type()?;
            let (name, _) = self.expect_ident()?;
            return self.decl_tail(start, ty, name);
        }
        let lhs = self.expr()?;
        if let Tok::Punct(p) = self.peek().clone() {
            if ASSIGN_OPS.contains(&p) {
                if !is_lvalue(&lhs) {
                    return Err(self.error_msg(start, "left side of assignment is not assignable".into()));
                }
                self.bump();
                let rhs = self.expr()?;
                let mut n = self.node(NodeKind::Assign, start);
                n.attrs.op = Some(p.to_string());
                n.children = vec![lhs, rhs];
                return Ok(n);
            }
        }
        if lhs.kind == NodeKind::Call {
            return Ok(lhs);
        }
        Err(self.error(&["=", "assignment operator"]))
    }

    // ---- expressions -------------------------------------------------------

    fn expr(&mut self) -> PResult<PNode> {
        self.binary(0)
    }

    fn binary(&mut self, level: usize) -> PResult<PNode> {
        const LEVELS: [&[&str]; 10] = [
            &["||"],
            &["&&"],
            &["|"],
            &["^"],
            &["&"],
            &["==", "!="],
            &["<", "<=", ">", ">="],
            &["<<", ">>"],
            &["+", "-"],
            &["*", "/", "%"],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let start = self.here();
        let mut lhs = self.binary(level + 1)?;
        loop {
            let op = match self.peek() {
                Tok::Punct(p) if LEVELS[level].contains(p) => *p,
                _ => break,
            };
            self.bump();
            let rhs = self.binary(level + 1)?;
            let mut n = self.node(NodeKind::BinOp, start);
            n.attrs.op = Some(op.to_string());
            n.children = vec![lhs, rhs];
            lhs = n;
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<PNode> {
        let start = self.here();
        let kind_op = match self.peek() {
            Tok::Punct("-") => Some((NodeKind::UnaryOp, "-")),
            Tok::Punct("~") => Some((NodeKind::UnaryOp, "~")),
            Tok::Punct("!") => Some((NodeKind::UnaryOp, "!")),
            Tok::Punct("*") => Some((NodeKind::Deref, "*")),
            Tok::Punct("&") => Some((NodeKind::AddressOf, "&")),
            _ => None,
        };
        if let Some((kind, op)) = kind_op {
            self.bump();
            let operand = self.unary()?;
            if kind == NodeKind::AddressOf && !is_lvalue(&operand) {
                return Err(self.error_msg(start, "cannot take the address of a non-lvalue".into()));
            }
            let mut n = self.node(kind, start);
            if kind == NodeKind::UnaryOp {
                n.attrs.op = Some(op.to_string());
            }
            n.children = vec![operand];
            return Ok(n);
        }
        if self.is_punct("(") && self.cast_ahead() {
            self.bump();
            let ty = self.parse_type()?;
            if ty == MiniCType::Void || matches!(ty, MiniCType::Struct(_)) {
                return Err(self.error_msg(start, "casts target integers or pointers".into()));
            }
            self.expect_punct(")")?;
            let operand = self.unary()?;
            let mut n = self.node(NodeKind::UnaryOp, start);
            n.attrs.op = Some("cast".into());
            n.attrs.ty = Some(ty);
            n.children = vec![operand];
            return Ok(n);
        }
        self.postfix()
    }

    fn cast_ahead(&self) -> bool {
        match self.peek_at(1) {
            Tok::Ident(s) => TYPE_WORDS.contains(&s.as_str()) || s == "struct",
            _ => false,
        }
    }

    fn postfix(&mut self) -> PResult<PNode> {
        let start = self.here();
        let mut e = self.primary()?;
        loop {
            if self.eat_punct("[") {
                let idx = self.expr()?;
                self.expect_punct("]")?;
                let mut n = self.node(NodeKind::Index, start);
                n.children = vec![e, idx];
                e = n;
            } else if self.is_punct(".") || self.is_punct("->") {
                let arrow = self.is_punct("->");
                self.bump();
                let (field, _) = self.expect_ident()?;
                let mut n = self.node(NodeKind::FieldAccess, start);
                n.attrs.name = Some(field);
                n.attrs.arrow = arrow;
                n.children = vec![e];
                e = n;
            } else {
                break;
            }
        }
        Ok(e)
    }

    fn primary(&mut self) -> PResult<PNode> {
        let start = self.here();
        match self.peek().clone() {
            Tok::Int(v, s) => {
                self.bump();
                let mut n = self.node(NodeKind::Literal, start);
                n.attrs.value = Some(v);
                n.attrs.spelling = Some(s);
                Ok(n)
            }
            Tok::Ident(name) if !RESERVED.contains(&name.as_str()) => {
                self.bump();
                if self.is_punct("(") {
                    self.bump();
                    let mut args = Vec::new();
                    if !self.is_punct(")") {
                        loop {
                            args.push(self.expr()?);
                            if !self.eat_punct(",") {
                                break;
                            }
                        }
                    }
                    self.expect_punct(")")?;
                    let mut n = self.node(NodeKind::Call, start);
                    n.attrs.name = Some(name);
                    n.children = args;
                    return Ok(n);
                }
                if let Some(v) = self.scope.constants.get(&name) {
                    let mut n = self.node(NodeKind::Literal, start);
                    n.attrs.value = Some(*v);
                    n.attrs.spelling = Some(name.clone());
                    n.attrs.name = Some(name);
                    return Ok(n);
                }
                let mut n = self.node(NodeKind::VarRef, start);
                n.attrs.name = Some(name);
                Ok(n)
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            _ => Err(self.error(&["expression"])),
        }
    }
}

fn is_lvalue(n: &PNode) -> bool {
    matches!(
        n.kind,
        NodeKind::VarRef | NodeKind::FieldAccess | NodeKind::Index | NodeKind::Deref
    )
}

/// Parses a single translation unit.
pub fn parse(source_text: &str, file_name: &str) -> Result<Ast, ParseError> {
    parse_project(&[(file_name, source_text)])
}

/// Parses several files as one program, in order. Constants and structs
/// declared in earlier files are visible in later ones.
pub fn parse_project<S: AsRef<str>>(files: &[(S, S)]) -> Result<Ast, ParseError> {
    let mut scope = Scope::default();
    let mut items = Vec::new();
    let mut file_names = Vec::new();
    let mut program_end = (1, 1);
    for (idx, (name, text)) in files.iter().enumerate() {
        let name = name.as_ref();
        let toks = tokenize(text.as_ref(), name)?;
        if idx == 0 {
            program_end = toks
                .iter()
                .rev()
                .find(|t| t.tok != Tok::Eof)
                .map(|t| (t.end_line, t.end_col))
                .unwrap_or((1, 1));
        }
        let mut p = Parser { toks, pos: 0, file: name, file_idx: idx, scope: &mut scope };
        items.extend(p.program_items()?);
        file_names.push(name.to_string());
    }
    if file_names.is_empty() {
        file_names.push(String::new());
    }
    let mut root = PNode::new(NodeKind::Program, (1, 1), program_end, 0);
    root.children = items;

    let mut nodes = Vec::new();
    flatten(root, None, &file_names, &mut nodes);
    Ok(Ast::from_nodes(nodes))
}

fn flatten(n: PNode, parent: Option<EntityId>, files: &[String], out: &mut Vec<Node>) -> EntityId {
    let id = EntityId(out.len() as u64 + 1);
    out.push(Node {
        id,
        kind: n.kind,
        children: Vec::new(),
        parent,
        loc: SourceLocation::new(files[n.file_idx].clone(), n.start, n.end),
        attrs: n.attrs,
    });
    let children: Vec<EntityId> = n
        .children
        .into_iter()
        .map(|c| flatten(c, Some(id), files, out))
        .collect();
    out[(id.0 - 1) as usize].children = children;
    id
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_program() {
        let ast = parse("", "e.mc").unwrap();
        assert_eq!(ast.len(), 1);
        assert_eq!(ast.node(ast.root()).kind, NodeKind::Program);
        assert!(ast.node(ast.root()).children.is_empty());
    }

    #[test]
    fn binop_of_two_literals() {
        let ast = parse("i32 f(){return 1+2;}", "f.mc").unwrap();
        let bin = ast.nodes().iter().find(|n| n.kind == NodeKind::BinOp).unwrap();
        assert_eq!(bin.attrs.op.as_deref(), Some("+"));
        let vals: Vec<u64> = ast.children(bin.id).map(|c| c.attrs.value.unwrap()).collect();
        assert_eq!(vals, vec![1, 2]);
        assert!(ast.children(bin.id).all(|c| c.kind == NodeKind::Literal));
    }

    #[test]
    fn precedence_matches_c() {
        let ast = parse("i32 f(i32 a){ return a & 1 == 1; }", "p.mc").unwrap();
        // `==` binds tighter than `&`.
        let top = ast.nodes().iter().find(|n| n.kind == NodeKind::BinOp).unwrap();
        assert_eq!(top.attrs.op.as_deref(), Some("&"));
    }

    #[test]
    fn macro_use_becomes_literal() {
        let ast = parse("#define B 0x10\ni32 g;\nvoid f(){ g |= B; }", "m.mc").unwrap();
        let lit = ast
            .nodes()
            .iter()
            .find(|n| n.kind == NodeKind::Literal)
            .unwrap();
        assert_eq!(lit.attrs.value, Some(16));
        assert_eq!(lit.attrs.spelling.as_deref(), Some("B"));
        assert_eq!(lit.loc.start(), (3, 16));
    }

    #[test]
    fn first_error_reports_location_and_expectation() {
        let err = parse("i32 f() { return 1 }", "x.mc").unwrap_err();
        assert_eq!(err.loc.start(), (1, 20));
        assert!(err.expected.contains(&";".to_string()));
    }

    #[test]
    fn rejects_unknown_struct_and_deep_pointers() {
        assert!(parse("struct S* g;", "s.mc").is_err());
        assert!(parse("u8*** p;", "s.mc").is_err());
        assert!(parse("u8** p;", "s.mc").is_ok());
    }

    #[test]
    fn ids_are_preorder_and_dense() {
        let ast = parse("i32 f(i32 a){ i32 b = a + 1; return b; }", "d.mc").unwrap();
        for n in ast.nodes() {
            for c in &n.children {
                assert!(*c > n.id);
                assert_eq!(ast.node(*c).parent, Some(n.id));
            }
        }
    }
}
