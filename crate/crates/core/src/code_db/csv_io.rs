use std::fs;
use std::path::{Path, PathBuf};

use crate::lang::{EntityId, NodeKind, SourceLocation};

use super::{
    AccessRow, BasicBlock, BranchLabel, CallEdge, CfgEdge, ConstantRow, DbError, DefUseEdge, DimensionDb,
    ExpressionRow, FunctionRow, LiteralRow, StatementRow,
};

const LOC: [&str; 5] = ["file", "start_line", "start_col", "end_line", "end_col"];

fn loc_cells(l: &SourceLocation) -> [String; 5] {
    [
        l.file.clone(),
        l.start_line.to_string(),
        l.start_col.to_string(),
        l.end_line.to_string(),
        l.end_col.to_string(),
    ]
}

fn ids(v: &[EntityId]) -> String {
    v.iter().map(|i| i.0.to_string()).collect::<Vec<_>>().join(" ")
}

fn header(cols: &[&str], with_loc: bool) -> Vec<String> {
    let mut h: Vec<String> = cols.iter().map(|s| s.to_string()).collect();
    if with_loc {
        h.extend(LOC.iter().map(|s| s.to_string()));
    }
    h
}

fn io_err(path: PathBuf) -> impl FnOnce(std::io::Error) -> DbError {
    move |source| DbError::Io { path, source }
}

fn write_table(dir: &Path, name: &str, header: Vec<String>, rows: Vec<Vec<String>>) -> Result<PathBuf, DbError> {
    let path = dir.join(format!("{name}.csv"));
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let csv_err = |e: csv::Error| DbError::Csv { file: name.to_string(), message: e.to_string() };
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| DbError::Csv { file: name.to_string(), message: e.to_string() })?;
    fs::write(&path, bytes).map_err(io_err(path.clone()))?;
    Ok(path)
}

/// Writes one CSV per table (plus `constants.csv` and `meta.csv`), rows
/// sorted by id. Returns the written paths.
pub fn export_dimensions_csv(db: &DimensionDb, out_dir: &Path) -> Result<Vec<PathBuf>, DbError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir.to_path_buf()))?;
    let mut files = Vec::new();
    let with_loc = |mut head: Vec<String>, l: &SourceLocation| {
        head.extend(loc_cells(l));
        head
    };

    files.push(write_table(
        out_dir,
        "functions",
        header(&["id", "name", "params"], true),
        db.functions
            .iter()
            .map(|f| with_loc(vec![f.id.0.to_string(), f.name.clone(), ids(&f.params)], &f.loc))
            .collect(),
    )?);
    files.push(write_table(
        out_dir,
        "statements",
        header(&["id", "kind", "enclosing_function"], true),
        db.statements
            .iter()
            .map(|s| with_loc(vec![s.id.0.to_string(), s.kind.as_str().into(), s.function.0.to_string()], &s.loc))
            .collect(),
    )?);
    files.push(write_table(
        out_dir,
        "expressions",
        {
            let mut h = header(&["id", "kind"], true);
            h.push("enclosing_statement".into());
            h
        },
        db.expressions
            .iter()
            .map(|e| {
                let mut r = with_loc(vec![e.id.0.to_string(), e.kind.as_str().into()], &e.loc);
                r.push(e.statement.0.to_string());
                r
            })
            .collect(),
    )?);
    files.push(write_table(
        out_dir,
        "variable_accesses",
        header(&["id", "variable_symbol", "is_write"], true),
        db.variable_accesses
            .iter()
            .map(|a| with_loc(vec![a.id.0.to_string(), a.symbol.clone(), a.is_write.to_string()], &a.loc))
            .collect(),
    )?);
    files.push(write_table(
        out_dir,
        "literals",
        header(&["id", "value", "spelling"], true),
        db.literals
            .iter()
            .map(|l| with_loc(vec![l.id.0.to_string(), l.value.to_string(), l.spelling.clone()], &l.loc))
            .collect(),
    )?);
    files.push(write_table(
        out_dir,
        "basic_blocks",
        header(&["id", "function", "statements"], false),
        db.basic_blocks
            .iter()
            .map(|b| vec![b.id.0.to_string(), b.function.0.to_string(), ids(&b.statements)])
            .collect(),
    )?);
    files.push(write_table(
        out_dir,
        "cfg_edges",
        header(&["src_block", "dst_block", "branch_label"], false),
        db.cfg_edges
            .iter()
            .map(|e| vec![e.src.0.to_string(), e.dst.0.to_string(), e.label.as_str().into()])
            .collect(),
    )?);
    files.push(write_table(
        out_dir,
        "call_edges",
        header(&["call_expr_id", "caller_fn", "callee_fn"], false),
        db.call_edges
            .iter()
            .map(|e| vec![e.call.0.to_string(), e.caller.0.to_string(), e.callee.0.to_string()])
            .collect(),
    )?);
    files.push(write_table(
        out_dir,
        "defuse_edges",
        header(&["def_access_id", "use_access_id"], false),
        db.defuse_edges.iter().map(|e| vec![e.def.0.to_string(), e.use_.0.to_string()]).collect(),
    )?);
    files.push(write_table(
        out_dir,
        "constants",
        header(&["id", "name", "value"], true),
        db.constants
            .iter()
            .map(|c| with_loc(vec![c.id.0.to_string(), c.name.clone(), c.value.to_string()], &c.loc))
            .collect(),
    )?);
    files.push(write_table(
        out_dir,
        "meta",
        header(&["key", "value"], false),
        vec![vec!["generation".into(), db.generation.clone()]],
    )?);
    Ok(files)
}

struct Table {
    name: &'static str,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn read(dir: &Path, name: &'static str, expected: Vec<String>) -> Result<Table, DbError> {
        let path = dir.join(format!("{name}.csv"));
        let bytes = fs::read(&path).map_err(io_err(path))?;
        let mut r = csv::Reader::from_reader(bytes.as_slice());
        let bad = |message: String| DbError::Csv { file: format!("{name}.csv"), message };
        let head = r.headers().map_err(|e| bad(e.to_string()))?;
        if head.iter().ne(expected.iter().map(String::as_str)) {
            return Err(bad(format!("unexpected header {head:?}")));
        }
        let rows = r.records().collect::<Result<Vec<_>, _>>().map_err(|e| bad(e.to_string()))?;
        Ok(Table { name, rows })
    }

    fn err(&self, row: usize, message: &str) -> DbError {
        DbError::Csv { file: format!("{}.csv", self.name), message: format!("row {}: {message}", row + 2) }
    }

    fn num<T: std::str::FromStr>(&self, row: usize, col: usize) -> Result<T, DbError> {
        self.rows[row][col].parse().map_err(|_| self.err(row, &format!("bad number in column {}", col + 1)))
    }

    fn id(&self, row: usize, col: usize) -> Result<EntityId, DbError> {
        Ok(EntityId(self.num(row, col)?))
    }

    fn ids(&self, row: usize, col: usize) -> Result<Vec<EntityId>, DbError> {
        self.rows[row][col]
            .split_whitespace()
            .map(|s| s.parse().map(EntityId).map_err(|_| self.err(row, "bad id list")))
            .collect()
    }

    fn text(&self, row: usize, col: usize) -> String {
        self.rows[row][col].to_string()
    }

    fn kind(&self, row: usize, col: usize) -> Result<NodeKind, DbError> {
        NodeKind::parse(&self.rows[row][col]).ok_or_else(|| self.err(row, "unknown node kind"))
    }

    fn loc(&self, row: usize, col: usize) -> Result<SourceLocation, DbError> {
        Ok(SourceLocation {
            file: self.text(row, col),
            start_line: self.num(row, col + 1)?,
            start_col: self.num(row, col + 2)?,
            end_line: self.num(row, col + 3)?,
            end_col: self.num(row, col + 4)?,
        })
    }
}

/// Reads back a directory written by [`export_dimensions_csv`].
pub fn import_dimensions_csv(dir: &Path) -> Result<DimensionDb, DbError> {
    let mut db = DimensionDb::default();

    let t = Table::read(dir, "functions", header(&["id", "name", "params"], true))?;
    for i in 0..t.rows.len() {
        db.functions.push(FunctionRow { id: t.id(i, 0)?, name: t.text(i, 1), params: t.ids(i, 2)?, loc: t.loc(i, 3)? });
    }
    let t = Table::read(dir, "statements", header(&["id", "kind", "enclosing_function"], true))?;
    for i in 0..t.rows.len() {
        db.statements.push(StatementRow { id: t.id(i, 0)?, kind: t.kind(i, 1)?, function: t.id(i, 2)?, loc: t.loc(i, 3)? });
    }
    let mut h = header(&["id", "kind"], true);
    h.push("enclosing_statement".into());
    let t = Table::read(dir, "expressions", h)?;
    for i in 0..t.rows.len() {
        db.expressions.push(ExpressionRow { id: t.id(i, 0)?, kind: t.kind(i, 1)?, loc: t.loc(i, 2)?, statement: t.id(i, 7)? });
    }
    let t = Table::read(dir, "variable_accesses", header(&["id", "variable_symbol", "is_write"], true))?;
    for i in 0..t.rows.len() {
        let is_write = match &t.rows[i][2] {
            "true" => true,
            "false" => false,
            _ => return Err(t.err(i, "is_write must be true or false")),
        };
        db.variable_accesses.push(AccessRow { id: t.id(i, 0)?, symbol: t.text(i, 1), is_write, loc: t.loc(i, 3)? });
    }
    let t = Table::read(dir, "literals", header(&["id", "value", "spelling"], true))?;
    for i in 0..t.rows.len() {
        db.literals.push(LiteralRow { id: t.id(i, 0)?, value: t.num(i, 1)?, spelling: t.text(i, 2), loc: t.loc(i, 3)? });
    }
    let t = Table::read(dir, "basic_blocks", header(&["id", "function", "statements"], false))?;
    for i in 0..t.rows.len() {
        db.basic_blocks.push(BasicBlock { id: t.id(i, 0)?, function: t.id(i, 1)?, statements: t.ids(i, 2)? });
    }
    let t = Table::read(dir, "cfg_edges", header(&["src_block", "dst_block", "branch_label"], false))?;
    for i in 0..t.rows.len() {
        let label = BranchLabel::parse(&t.rows[i][2]).ok_or_else(|| t.err(i, "unknown branch label"))?;
        db.cfg_edges.push(CfgEdge { src: t.id(i, 0)?, dst: t.id(i, 1)?, label });
    }
    let t = Table::read(dir, "call_edges", header(&["call_expr_id", "caller_fn", "callee_fn"], false))?;
    for i in 0..t.rows.len() {
        db.call_edges.push(CallEdge { call: t.id(i, 0)?, caller: t.id(i, 1)?, callee: t.id(i, 2)? });
    }
    let t = Table::read(dir, "defuse_edges", header(&["def_access_id", "use_access_id"], false))?;
    for i in 0..t.rows.len() {
        db.defuse_edges.push(DefUseEdge { def: t.id(i, 0)?, use_: t.id(i, 1)? });
    }
    let t = Table::read(dir, "constants", header(&["id", "name", "value"], true))?;
    for i in 0..t.rows.len() {
        db.constants.push(ConstantRow { id: t.id(i, 0)?, name: t.text(i, 1), value: t.num(i, 2)?, loc: t.loc(i, 3)? });
    }
    let t = Table::read(dir, "meta", header(&["key", "value"], false))?;
    for i in 0..t.rows.len() {
        if &t.rows[i][0] == "generation" {
            db.generation = t.text(i, 1);
        }
    }
    Ok(db)
}
