use std::fmt::Write;

use super::ast::{Ast, EntityId, MiniCType, NodeKind};

/// Renders `id` (usually the program root) back to MiniC source.
pub fn pretty_print(ast: &Ast, id: EntityId) -> String {
    let mut p = Printer { ast, out: String::new() };
    let n = ast.node(id);
    match n.kind {
        NodeKind::Program => {
            for c in &n.children {
                p.item(*c);
            }
        }
        NodeKind::FunctionDef | NodeKind::StructDef | NodeKind::ConstDef => p.item(id),
        k if k.is_expression() => p.out = p.expr(id),
        _ => p.stmt(id, 0),
    }
    p.out
}

struct Printer<'a> {
    ast: &'a Ast,
    out: String,
}

fn declarator(ty: &MiniCType, name: &str) -> String {
    match ty {
        MiniCType::ByteArray(n) => format!("u8 {name}[{n}]"),
        t => format!("{t} {name}"),
    }
}

impl Printer<'_> {
    fn indent(&mut self, depth: usize) {
        for _ in 0..depth {
            self.out.push_str("  ");
        }
    }

    fn item(&mut self, id: EntityId) {
        let n = self.ast.node(id);
        match n.kind {
            NodeKind::ConstDef => {
                let _ = writeln!(
                    self.out,
                    "#define {} {}",
                    n.attrs.name.as_deref().unwrap_or_default(),
                    n.attrs.spelling.as_deref().unwrap_or_default()
                );
            }
            NodeKind::StructDef => {
                let _ = writeln!(self.out, "struct {} {{", n.attrs.name.as_deref().unwrap_or_default());
                for f in self.ast.children(id) {
                    let _ = writeln!(
                        self.out,
                        "  {};",
                        declarator(f.attrs.ty.as_ref().unwrap(), f.attrs.name.as_deref().unwrap())
                    );
                }
                self.out.push_str("};\n");
            }
            NodeKind::VarDecl => {
                let s = self.decl(id);
                let _ = writeln!(self.out, "{s};");
            }
            NodeKind::FunctionDef => {
                let params: Vec<String> = n.children[..n.children.len() - 1]
                    .iter()
                    .map(|p| self.decl(*p))
                    .collect();
                let _ = write!(
                    self.out,
                    "{} {}({}) ",
                    n.attrs.ty.as_ref().unwrap(),
                    n.attrs.name.as_deref().unwrap(),
                    params.join(", ")
                );
                self.block_body(*n.children.last().unwrap(), 0);
                self.out.push('\n');
            }
            _ => self.stmt(id, 0),
        }
    }

    fn decl(&self, id: EntityId) -> String {
        let n = self.ast.node(id);
        let mut s = declarator(n.attrs.ty.as_ref().unwrap(), n.attrs.name.as_deref().unwrap());
        if let Some(init) = n.children.first() {
            s.push_str(" = ");
            s.push_str(&self.expr(*init));
        }
        s
    }

    /// Prints `{ ... }` starting at the current position.
    fn block_body(&mut self, id: EntityId, depth: usize) {
        self.out.push_str("{\n");
        for c in self.ast.node(id).children.clone() {
            self.stmt(c, depth + 1);
        }
        self.indent(depth);
        self.out.push('}');
    }

    /// Prints a nested statement after `if (...)`/`else`/loop headers.
    fn sub_stmt(&mut self, id: EntityId, depth: usize) {
        if self.ast.node(id).kind == NodeKind::Block {
            self.out.push(' ');
            self.block_body(id, depth);
            self.out.push('\n');
        } else {
            self.out.push('\n');
            self.stmt(id, depth + 1);
        }
    }

    fn simple(&self, id: EntityId) -> String {
        let n = self.ast.node(id);
        match n.kind {
            NodeKind::VarDecl => self.decl(id),
            NodeKind::Assign => format!(
                "{} {} {}",
                self.expr(n.children[0]),
                n.attrs.op.as_deref().unwrap_or("="),
                self.expr(n.children[1])
            ),
            _ => self.expr(id),
        }
    }

    fn stmt(&mut self, id: EntityId, depth: usize) {
        let n = self.ast.node(id).clone();
        self.indent(depth);
        match n.kind {
            NodeKind::Block => {
                self.block_body(id, depth);
                self.out.push('\n');
            }
            NodeKind::If => {
                let cond = self.expr(n.children[0]);
                let _ = write!(self.out, "if ({cond})");
                self.sub_stmt(n.children[1], depth);
                if let Some(e) = n.children.get(2) {
                    self.indent(depth);
                    self.out.push_str("else");
                    self.sub_stmt(*e, depth);
                }
            }
            NodeKind::While => {
                let cond = self.expr(n.children[0]);
                let _ = write!(self.out, "while ({cond})");
                self.sub_stmt(n.children[1], depth);
            }
            NodeKind::For => {
                let head = format!(
                    "for ({}; {}; {})",
                    self.simple(n.children[0]),
                    self.expr(n.children[1]),
                    self.simple(n.children[2])
                );
                self.out.push_str(&head);
                self.sub_stmt(n.children[3], depth);
            }
            NodeKind::Return => match n.children.first() {
                Some(e) => {
                    let s = self.expr(*e);
                    let _ = writeln!(self.out, "return {s};");
                }
                None => self.out.push_str("return;\n"),
            },
            NodeKind::Abort => self.out.push_str("abort();\n"),
            _ => {
                let s = self.simple(id);
                let _ = writeln!(self.out, "{s};");
            }
        }
    }

    fn is_atom(&self, id: EntityId) -> bool {
        matches!(
            self.ast.node(id).kind,
            NodeKind::VarRef
                | NodeKind::Literal
                | NodeKind::Call
                | NodeKind::FieldAccess
                | NodeKind::Index
        )
    }

    fn operand(&self, id: EntityId) -> String {
        if self.is_atom(id) {
            self.expr(id)
        } else {
            format!("({})", self.expr(id))
        }
    }

    fn expr(&self, id: EntityId) -> String {
        let n = self.ast.node(id);
        match n.kind {
            NodeKind::Literal => n.attrs.spelling.clone().unwrap_or_else(|| n.attrs.value.unwrap_or(0).to_string()),
            NodeKind::VarRef => n.attrs.name.clone().unwrap_or_default(),
            NodeKind::Call => {
                let args: Vec<String> = n.children.iter().map(|a| self.expr(*a)).collect();
                format!("{}({})", n.attrs.name.as_deref().unwrap_or_default(), args.join(", "))
            }
            NodeKind::BinOp => {
                let side = |c: EntityId| {
                    if self.ast.node(c).kind == NodeKind::BinOp {
                        format!("({})", self.expr(c))
                    } else {
                        self.expr(c)
                    }
                };
                format!(
                    "{} {} {}",
                    side(n.children[0]),
                    n.attrs.op.as_deref().unwrap_or("?"),
                    side(n.children[1])
                )
            }
            NodeKind::UnaryOp => {
                let operand = self.operand(n.children[0]);
                match n.attrs.op.as_deref() {
                    Some("cast") => format!("({}) {}", n.attrs.ty.as_ref().unwrap(), operand),
                    Some(op) => format!("{op}{operand}"),
                    None => operand,
                }
            }
            NodeKind::AddressOf => format!("&{}", self.operand(n.children[0])),
            NodeKind::Deref => format!("*{}", self.operand(n.children[0])),
            NodeKind::FieldAccess => format!(
                "{}{}{}",
                self.operand(n.children[0]),
                if n.attrs.arrow { "->" } else { "." },
                n.attrs.name.as_deref().unwrap_or_default()
            ),
            NodeKind::Index => format!("{}[{}]", self.operand(n.children[0]), self.expr(n.children[1])),
            _ => String::new(),
        }
    }
}
