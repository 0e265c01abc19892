//! Static side of the program database: entity tables, basic blocks, control
//! flow, calls, and def-use edges, all keyed by AST ids.

mod cfg;
mod csv_io;
mod defuse;
mod sema;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::{self, Ast, EntityId, ManifestError, NodeKind, ParseError, Project, SourceLocation};

pub use cfg::{BasicBlock, BranchLabel, CfgEdge, Layout};
pub use csv_io::{export_dimensions_csv, import_dimensions_csv};
pub(crate) use defuse::{is_access, prefix_match};
pub use sema::{assignable, wider, AccessPath, Semantics, VarInfo};

#[derive(Debug, Error)]
pub enum DbError {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("{loc}: {message}")]
    NameResolution { loc: SourceLocation, message: String },
    #[error("{loc}: type error: {message}")]
    Type { loc: SourceLocation, message: String },
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("driver function `{0}` not found")]
    MissingDriver(String),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: {message}")]
    Csv { file: String, message: String },
}

impl DbError {
    pub fn location(&self) -> Option<&SourceLocation> {
        match self {
            DbError::Parse(e) => Some(&e.loc),
            DbError::NameResolution { loc, .. } | DbError::Type { loc, .. } => Some(loc),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionRow {
    pub id: EntityId,
    pub name: String,
    pub loc: SourceLocation,
    pub params: Vec<EntityId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatementRow {
    pub id: EntityId,
    pub kind: NodeKind,
    pub function: EntityId,
    pub loc: SourceLocation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpressionRow {
    pub id: EntityId,
    pub kind: NodeKind,
    pub loc: SourceLocation,
    /// Enclosing statement; none for global initializers.
    pub statement: EntityId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessRow {
    pub id: EntityId,
    pub symbol: String,
    pub is_write: bool,
    pub loc: SourceLocation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiteralRow {
    pub id: EntityId,
    pub value: u64,
    pub spelling: String,
    pub loc: SourceLocation,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CallEdge {
    pub call: EntityId,
    pub caller: EntityId,
    pub callee: EntityId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DefUseEdge {
    pub def: EntityId,
    pub use_: EntityId,
}

/// `#define` constants, kept so classifiers can relate literals by name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstantRow {
    pub id: EntityId,
    pub name: String,
    pub value: u64,
    pub loc: SourceLocation,
}

/// Dimension tables. Immutable once built; `generation` pins the sources.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionDb {
    pub generation: String,
    pub functions: Vec<FunctionRow>,
    pub statements: Vec<StatementRow>,
    pub expressions: Vec<ExpressionRow>,
    pub variable_accesses: Vec<AccessRow>,
    pub literals: Vec<LiteralRow>,
    pub basic_blocks: Vec<BasicBlock>,
    pub cfg_edges: Vec<CfgEdge>,
    pub call_edges: Vec<CallEdge>,
    pub defuse_edges: Vec<DefUseEdge>,
    pub constants: Vec<ConstantRow>,
}

impl DimensionDb {
    pub fn function(&self, id: EntityId) -> Option<&FunctionRow> {
        self.functions.binary_search_by_key(&id, |f| f.id).ok().map(|i| &self.functions[i])
    }

    pub fn function_named(&self, name: &str) -> Option<&FunctionRow> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn block(&self, id: EntityId) -> Option<&BasicBlock> {
        self.basic_blocks.binary_search_by_key(&id, |b| b.id).ok().map(|i| &self.basic_blocks[i])
    }

    pub fn access(&self, id: EntityId) -> Option<&AccessRow> {
        self.variable_accesses.binary_search_by_key(&id, |a| a.id).ok().map(|i| &self.variable_accesses[i])
    }
}

/// Statements are the nodes that occupy a slot in a basic block.
pub fn is_statement(ast: &Ast, id: EntityId) -> bool {
    let n = ast.node(id);
    match n.kind {
        NodeKind::Block
        | NodeKind::Assign
        | NodeKind::If
        | NodeKind::While
        | NodeKind::For
        | NodeKind::Return
        | NodeKind::Abort => true,
        NodeKind::VarDecl => {
            !n.attrs.param && !n.attrs.field && n.parent.is_some_and(|p| ast.node(p).kind != NodeKind::Program)
        }
        NodeKind::Call => n.parent.is_some_and(|p| {
            let pk = ast.node(p).kind;
            pk == NodeKind::Block
                || pk == NodeKind::If
                || pk == NodeKind::While
                || (pk == NodeKind::For && ast.node(p).children[1] != id)
        }),
        _ => false,
    }
}

fn is_variable_decl(ast: &Ast, id: EntityId) -> bool {
    let n = ast.node(id);
    n.kind == NodeKind::VarDecl && !n.attrs.field
}

struct Built {
    sema: Semantics,
    dims: DimensionDb,
    cfg: cfg::CfgOutput,
}

fn build(ast: &Ast) -> Result<Built, DbError> {
    let sema = sema::resolve(ast)?;
    let cfg = cfg::build(ast, ast.len() as u64 + 1);
    let du = defuse::build(ast, &sema, &cfg);

    let mut d = DimensionDb::default();
    for n in ast.nodes() {
        let id = n.id;
        match n.kind {
            NodeKind::FunctionDef => d.functions.push(FunctionRow {
                id,
                name: n.attrs.name.clone().unwrap_or_default(),
                loc: n.loc.clone(),
                params: n.children[..n.children.len() - 1].to_vec(),
            }),
            NodeKind::ConstDef => d.constants.push(ConstantRow {
                id,
                name: n.attrs.name.clone().unwrap_or_default(),
                value: n.attrs.value.unwrap_or(0),
                loc: n.loc.clone(),
            }),
            _ => {}
        }
        if is_statement(ast, id) {
            d.statements.push(StatementRow {
                id,
                kind: n.kind,
                function: sema.enclosing_fn.get(&id).copied().unwrap_or(EntityId::NONE),
                loc: n.loc.clone(),
            });
        } else if n.kind.is_expression() {
            let mut up = n.parent;
            while let Some(p) = up {
                if is_statement(ast, p) {
                    break;
                }
                up = ast.node(p).parent;
            }
            d.expressions.push(ExpressionRow {
                id,
                kind: n.kind,
                loc: n.loc.clone(),
                statement: up.unwrap_or(EntityId::NONE),
            });
        }
        if is_access(n.kind) || is_variable_decl(ast, id) {
            let is_write = n.kind == NodeKind::VarDecl
                || n.parent.is_some_and(|p| {
                    let pn = ast.node(p);
                    pn.kind == NodeKind::Assign && pn.children[0] == id
                });
            d.variable_accesses.push(AccessRow {
                id,
                symbol: sema.paths[&id].symbol.clone(),
                is_write,
                loc: n.loc.clone(),
            });
        }
        if n.kind == NodeKind::Literal {
            d.literals.push(LiteralRow {
                id,
                value: n.attrs.value.unwrap_or(0),
                spelling: n.attrs.spelling.clone().unwrap_or_default(),
                loc: n.loc.clone(),
            });
        }
        if n.kind == NodeKind::Call {
            if let Some(callee) = sema.callee.get(&id) {
                d.call_edges.push(CallEdge { call: id, caller: sema.enclosing_fn[&id], callee: *callee });
            }
        }
    }
    d.basic_blocks = cfg.blocks.clone();
    d.cfg_edges = cfg.edges.clone();
    d.defuse_edges = du.into_iter().map(|(def, use_)| DefUseEdge { def, use_ }).collect();
    Ok(Built { sema, dims: d, cfg })
}

/// Builds the dimension tables for a parsed program. The generation tag is
/// left empty; [`ProgramDb::build`] fills it from the sources.
pub fn build_dimensions(program: &Ast) -> Result<DimensionDb, DbError> {
    Ok(build(program)?.dims)
}

/// Everything known statically about one project build.
#[derive(Debug, Clone)]
pub struct ProgramDb {
    pub project: Project,
    pub ast: Ast,
    pub sema: Semantics,
    pub dims: DimensionDb,
    pub driver: EntityId,
    layout: HashMap<EntityId, Layout>,
    entry: HashMap<EntityId, EntityId>,
    stmt_block: HashMap<EntityId, EntityId>,
    /// Token spans per file as (line, start col, end col); tokens never span lines.
    tokens: BTreeMap<String, Vec<(u32, u32, u32)>>,
}

impl ProgramDb {
    pub fn build(project: Project) -> Result<ProgramDb, DbError> {
        let ast = lang::parse_project(&project.sources)?;
        let Built { sema, mut dims, cfg } = build(&ast)?;
        dims.generation = project.generation();
        let driver = ast
            .function_named(&project.manifest.driver)
            .map(|f| f.id)
            .ok_or_else(|| DbError::MissingDriver(project.manifest.driver.clone()))?;
        let mut stmt_block = HashMap::new();
        for b in &cfg.blocks {
            for s in &b.statements {
                stmt_block.insert(*s, b.id);
            }
        }
        let mut tokens = BTreeMap::new();
        for (name, text) in &project.sources {
            let spans = lang::token_spans(text, name)?;
            tokens.insert(name.clone(), spans);
        }
        Ok(ProgramDb { project, ast, sema, dims, driver, layout: cfg.layout, entry: cfg.entry, stmt_block, tokens })
    }

    /// Single-file convenience used by tests and examples.
    pub fn from_source(file: &str, text: &str, driver: &str) -> Result<ProgramDb, DbError> {
        ProgramDb::build(Project::from_sources(driver, vec![(file.to_string(), text.to_string())]))
    }

    pub fn generation(&self) -> &str {
        &self.dims.generation
    }

    pub fn layout(&self, stmt: EntityId) -> Option<&Layout> {
        self.layout.get(&stmt)
    }

    pub fn entry_block(&self, function: EntityId) -> EntityId {
        self.entry[&function]
    }

    pub fn block_of(&self, stmt: EntityId) -> Option<EntityId> {
        self.stmt_block.get(&stmt).copied()
    }

    pub fn function_of(&self, id: EntityId) -> Option<EntityId> {
        if let Some(b) = self.dims.block(id) {
            return Some(b.function);
        }
        self.sema.enclosing_fn.get(&id).copied()
    }

    pub fn function_name(&self, id: EntityId) -> &str {
        self.ast.get(id).and_then(|n| n.attrs.name.as_deref()).unwrap_or("")
    }

    /// Nearest enclosing statement of a node (itself if it is one).
    pub fn statement_of(&self, id: EntityId) -> Option<EntityId> {
        let mut cur = Some(id);
        while let Some(c) = cur {
            if self.stmt_block.contains_key(&c) {
                return Some(c);
            }
            cur = self.ast.node(c).parent;
        }
        None
    }

    /// Innermost statement, expression, or variable declaration whose span
    /// contains the point. The point must fall on a token.
    pub fn entity_at(&self, file: &str, line: u32, col: u32) -> Option<EntityId> {
        let spans = self.tokens.get(file)?;
        let on_token = spans
            .binary_search_by(|&(l, s, e)| {
                if (l, e) < (line, col) {
                    std::cmp::Ordering::Less
                } else if (l, s) > (line, col) {
                    std::cmp::Ordering::Greater
                } else {
                    std::cmp::Ordering::Equal
                }
            })
            .is_ok();
        if !on_token {
            return None;
        }
        // Containing nodes form an ancestor chain; pre-order makes the
        // innermost one the largest id.
        self.ast
            .nodes()
            .iter()
            .filter(|n| {
                (n.kind.is_expression() || n.kind == NodeKind::VarDecl || is_statement(&self.ast, n.id))
                    && n.loc.contains_point(file, line, col)
            })
            .map(|n| n.id)
            .max()
    }
}
