//! Arena-backed syntax tree for MiniC.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Dense identifier shared by AST nodes and every dimension row derived from
/// them. `0` is reserved for "none".
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct EntityId(pub u64);

impl EntityId {
    pub const NONE: EntityId = EntityId(0);

    pub fn is_none(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Source span. Lines and columns are 1-based; the end position is inclusive
/// (it names the last character of the construct).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SourceLocation {
    pub file: String,
    pub start_line: u32,
    pub start_col: u32,
    pub end_line: u32,
    pub end_col: u32,
}

impl SourceLocation {
    pub fn new(file: impl Into<String>, start: (u32, u32), end: (u32, u32)) -> Self {
        SourceLocation {
            file: file.into(),
            start_line: start.0,
            start_col: start.1,
            end_line: end.0,
            end_col: end.1,
        }
    }

    pub fn point(file: impl Into<String>, line: u32, col: u32) -> Self {
        Self::new(file, (line, col), (line, col))
    }

    pub fn start(&self) -> (u32, u32) {
        (self.start_line, self.start_col)
    }

    pub fn end(&self) -> (u32, u32) {
        (self.end_line, self.end_col)
    }

    /// True when `(line, col)` in `file` falls inside this span.
    pub fn contains_point(&self, file: &str, line: u32, col: u32) -> bool {
        self.file == file && self.start() <= (line, col) && (line, col) <= self.end()
    }

    pub fn contains(&self, other: &SourceLocation) -> bool {
        self.file == other.file && self.start() <= other.start() && other.end() <= self.end()
    }
}

impl fmt::Display for SourceLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.start_line, self.start_col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    Program,
    FunctionDef,
    StructDef,
    ConstDef,
    VarDecl,
    Assign,
    If,
    While,
    For,
    Return,
    Call,
    BinOp,
    UnaryOp,
    FieldAccess,
    Index,
    AddressOf,
    Deref,
    Literal,
    VarRef,
    Block,
    Abort,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Program => "Program",
            NodeKind::FunctionDef => "FunctionDef",
            NodeKind::StructDef => "StructDef",
            NodeKind::ConstDef => "ConstDef",
            NodeKind::VarDecl => "VarDecl",
            NodeKind::Assign => "Assign",
            NodeKind::If => "If",
            NodeKind::While => "While",
            NodeKind::For => "For",
            NodeKind::Return => "Return",
            NodeKind::Call => "Call",
            NodeKind::BinOp => "BinOp",
            NodeKind::UnaryOp => "UnaryOp",
            NodeKind::FieldAccess => "FieldAccess",
            NodeKind::Index => "Index",
            NodeKind::AddressOf => "AddressOf",
            NodeKind::Deref => "Deref",
            NodeKind::Literal => "Literal",
            NodeKind::VarRef => "VarRef",
            NodeKind::Block => "Block",
            NodeKind::Abort => "Abort",
        }
    }

    pub fn parse(s: &str) -> Option<NodeKind> {
        ALL_KINDS.iter().copied().find(|k| k.as_str() == s)
    }

    pub fn is_expression(self) -> bool {
        matches!(
            self,
            NodeKind::Call
                | NodeKind::BinOp
                | NodeKind::UnaryOp
                | NodeKind::FieldAccess
                | NodeKind::Index
                | NodeKind::AddressOf
                | NodeKind::Deref
                | NodeKind::Literal
                | NodeKind::VarRef
        )
    }
}

const ALL_KINDS: [NodeKind; 21] = [
    NodeKind::Program,
    NodeKind::FunctionDef,
    NodeKind::StructDef,
    NodeKind::ConstDef,
    NodeKind::VarDecl,
    NodeKind::Assign,
    NodeKind::If,
    NodeKind::While,
    NodeKind::For,
    NodeKind::Return,
    NodeKind::Call,
    NodeKind::BinOp,
    NodeKind::UnaryOp,
    NodeKind::FieldAccess,
    NodeKind::Index,
    NodeKind::AddressOf,
    NodeKind::Deref,
    NodeKind::Literal,
    NodeKind::VarRef,
    NodeKind::Block,
    NodeKind::Abort,
];

/// MiniC types. Pointers nest at most twice.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MiniCType {
    U8,
    U32,
    I32,
    U64,
    I64,
    /// Only valid as a function return type.
    Void,
    ByteArray(u32),
    Struct(String),
    Ptr(Box<MiniCType>),
}

impl MiniCType {
    pub fn is_integer(&self) -> bool {
        matches!(
            self,
            MiniCType::U8 | MiniCType::U32 | MiniCType::I32 | MiniCType::U64 | MiniCType::I64
        )
    }

    pub fn is_pointer(&self) -> bool {
        matches!(self, MiniCType::Ptr(_))
    }

    pub fn pointer_depth(&self) -> usize {
        match self {
            MiniCType::Ptr(inner) => 1 + inner.pointer_depth(),
            _ => 0,
        }
    }

    pub fn pointee(&self) -> Option<&MiniCType> {
        match self {
            MiniCType::Ptr(inner) => Some(inner),
            _ => None,
        }
    }

    pub fn struct_name(&self) -> Option<&str> {
        match self {
            MiniCType::Struct(name) => Some(name),
            _ => None,
        }
    }

    /// Storage width in bits for integers; pointers are 64-bit.
    pub fn width(&self) -> Option<IntWidth> {
        match self {
            MiniCType::U8 => Some(IntWidth::U8),
            MiniCType::U32 => Some(IntWidth::U32),
            MiniCType::I32 => Some(IntWidth::I32),
            MiniCType::U64 => Some(IntWidth::U64),
            MiniCType::I64 => Some(IntWidth::I64),
            _ => None,
        }
    }

    pub fn is_scalar(&self) -> bool {
        self.is_integer() || self.is_pointer()
    }
}

impl fmt::Display for MiniCType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MiniCType::U8 => f.write_str("u8"),
            MiniCType::U32 => f.write_str("u32"),
            MiniCType::I32 => f.write_str("i32"),
            MiniCType::U64 => f.write_str("u64"),
            MiniCType::I64 => f.write_str("i64"),
            MiniCType::Void => f.write_str("void"),
            // Arrays print through their declarator; the element type is u8.
            MiniCType::ByteArray(_) => f.write_str("u8"),
            MiniCType::Struct(name) => write!(f, "struct {name}"),
            MiniCType::Ptr(inner) => write!(f, "{inner}*"),
        }
    }
}

/// Integer widths with modular (wrapping) stores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IntWidth {
    U8,
    U32,
    I32,
    U64,
    I64,
}

impl IntWidth {
    pub fn bits(self) -> u32 {
        match self {
            IntWidth::U8 => 8,
            IntWidth::U32 | IntWidth::I32 => 32,
            IntWidth::U64 | IntWidth::I64 => 64,
        }
    }

    pub fn signed(self) -> bool {
        matches!(self, IntWidth::I32 | IntWidth::I64)
    }

    /// Reduces `v` to this width with two's-complement wrap.
    pub fn wrap(self, v: i64) -> i64 {
        match self {
            IntWidth::U8 => v & 0xFF,
            IntWidth::U32 => v & 0xFFFF_FFFF,
            IntWidth::I32 => v as i32 as i64,
            IntWidth::U64 | IntWidth::I64 => v,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            IntWidth::U8 => "u8",
            IntWidth::U32 => "u32",
            IntWidth::I32 => "i32",
            IntWidth::U64 => "u64",
            IntWidth::I64 => "i64",
        }
    }

    pub fn from_name(s: &str) -> Option<IntWidth> {
        Some(match s {
            "u8" => IntWidth::U8,
            "u32" => IntWidth::U32,
            "i32" => IntWidth::I32,
            "u64" => IntWidth::U64,
            "i64" => IntWidth::I64,
            _ => return None,
        })
    }
}

/// Kind-specific node attributes. Unused fields stay `None`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attrs {
    /// Declared, called, referenced, or defined name.
    pub name: Option<String>,
    /// Operator spelling for BinOp/UnaryOp/Assign (`cast` for casts).
    pub op: Option<String>,
    /// Literal or constant value as an unsigned 64-bit pattern.
    pub value: Option<u64>,
    /// Literal spelling exactly as written (`0xFFFFFFFF`, `'A'`, `OPTION_B`).
    pub spelling: Option<String>,
    /// Declared type (VarDecl, FunctionDef return, cast target).
    pub ty: Option<MiniCType>,
    /// `->` rather than `.` on FieldAccess.
    pub arrow: bool,
    /// Set on VarDecl nodes that are function parameters.
    pub param: bool,
    /// Set on VarDecl nodes that are struct fields.
    pub field: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: EntityId,
    pub kind: NodeKind,
    pub children: Vec<EntityId>,
    pub parent: Option<EntityId>,
    pub loc: SourceLocation,
    pub attrs: Attrs,
}

/// A parsed program. Node ids are dense, 1-based, and assigned in pre-order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ast {
    nodes: Vec<Node>,
}

impl Ast {
    pub(crate) fn from_nodes(nodes: Vec<Node>) -> Self {
        debug_assert!(nodes
            .iter()
            .enumerate()
            .all(|(i, n)| n.id.0 == i as u64 + 1));
        Ast { nodes }
    }

    pub fn root(&self) -> EntityId {
        EntityId(1)
    }

    pub fn node(&self, id: EntityId) -> &Node {
        &self.nodes[(id.0 - 1) as usize]
    }

    pub fn get(&self, id: EntityId) -> Option<&Node> {
        if id.is_none() {
            return None;
        }
        self.nodes.get((id.0 - 1) as usize)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn children(&self, id: EntityId) -> impl Iterator<Item = &Node> + '_ {
        self.node(id).children.iter().map(move |c| self.node(*c))
    }

    pub fn child(&self, id: EntityId, i: usize) -> &Node {
        self.node(self.node(id).children[i])
    }

    pub fn functions(&self) -> impl Iterator<Item = &Node> + '_ {
        self.children(self.root())
            .filter(|n| n.kind == NodeKind::FunctionDef)
    }

    pub fn function_named(&self, name: &str) -> Option<&Node> {
        self.functions()
            .find(|n| n.attrs.name.as_deref() == Some(name))
    }

    /// Pre-order walk of the subtree rooted at `id`.
    pub fn descendants(&self, id: EntityId) -> Vec<EntityId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(cur) = stack.pop() {
            out.push(cur);
            for c in self.node(cur).children.iter().rev() {
                stack.push(*c);
            }
        }
        out
    }

    /// Structural equality ignoring locations (ids follow from structure).
    pub fn structurally_equal(&self, other: &Ast) -> bool {
        self.nodes.len() == other.nodes.len()
            && self.nodes.iter().zip(&other.nodes).all(|(a, b)| {
                a.kind == b.kind && a.children == b.children && a.attrs == b.attrs
            })
    }
}
