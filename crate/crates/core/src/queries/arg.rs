//! The `@@`-separated argument grammar shared by the UI and the queries.
//!
//! ```text
//! location := func "@@" file "@@" line "@@" col
//! schema   := expr ("@@" func ["@@" file] "@@" line "@@" col)+
//! ```

use serde::Serialize;

use crate::code_db::ProgramDb;
use crate::lang::EntityId;

use super::QueryError;

pub const SEP: &str = "@@";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgShape {
    Location,
    ExprSchema,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryKind {
    Q1,
    Q2,
    Q3,
}

impl QueryKind {
    pub fn parse(s: &str) -> Option<QueryKind> {
        match s {
            "q1" => Some(QueryKind::Q1),
            "q2" => Some(QueryKind::Q2),
            "q3" => Some(QueryKind::Q3),
            _ => None,
        }
    }

    pub fn shape(self) -> ArgShape {
        match self {
            QueryKind::Q2 => ArgShape::ExprSchema,
            _ => ArgShape::Location,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QueryArg {
    pub raw: String,
    pub fields: Vec<String>,
}

/// One source position named by an argument.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArgLocation {
    pub function: String,
    /// Absent in the file-less triple form of expression schemas.
    pub file: Option<String>,
    pub line: u32,
    pub col: u32,
}

fn shape_err(index: usize, message: impl Into<String>) -> QueryError {
    QueryError::ArgShape { index, message: message.into() }
}

fn position(fields: &[String], i: usize) -> Result<u32, QueryError> {
    match fields[i].parse::<u32>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(shape_err(i, format!("`{}` is not a positive integer", fields[i]))),
    }
}

impl QueryArg {
    pub fn parse(raw: &str, shape: ArgShape) -> Result<QueryArg, QueryError> {
        if raw.is_empty() {
            return Err(shape_err(0, "empty argument"));
        }
        let fields: Vec<String> = raw.split(SEP).map(str::to_string).collect();
        if let Some(i) = fields.iter().position(String::is_empty) {
            return Err(shape_err(i, "empty field"));
        }
        let arg = QueryArg { raw: raw.to_string(), fields };
        match shape {
            ArgShape::Location => {
                if arg.fields.len() != 4 {
                    return Err(shape_err(arg.fields.len().min(4), format!("expected 4 fields, got {}", arg.fields.len())));
                }
                position(&arg.fields, 2)?;
                position(&arg.fields, 3)?;
            }
            ArgShape::ExprSchema => {
                arg.operand_locations()?;
            }
        }
        Ok(arg)
    }

    /// The single location of a `Location`-shaped argument.
    pub fn location(&self) -> Result<ArgLocation, QueryError> {
        if self.fields.len() != 4 {
            return Err(shape_err(0, "not a location argument"));
        }
        Ok(ArgLocation {
            function: self.fields[0].clone(),
            file: Some(self.fields[1].clone()),
            line: position(&self.fields, 2)?,
            col: position(&self.fields, 3)?,
        })
    }

    /// Expression text of a schema argument, without surrounding quotes.
    pub fn schema(&self) -> &str {
        let s = self.fields[0].as_str();
        s.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(s)
    }

    /// Operand locations of a schema argument. Groups are quadruples
    /// `(func, file, line, col)` or, when the second field is numeric,
    /// triples `(func, line, col)`.
    pub fn operand_locations(&self) -> Result<Vec<ArgLocation>, QueryError> {
        let rest = &self.fields[1..];
        if rest.is_empty() {
            return Err(shape_err(1, "schema needs at least one operand location"));
        }
        let with_file = rest.len() > 1 && rest[1].parse::<u32>().is_err();
        let width = if with_file { 4 } else { 3 };
        if !rest.len().is_multiple_of(width) {
            return Err(shape_err(self.fields.len(), format!("operand locations come in groups of {width}")));
        }
        let mut out = Vec::new();
        for g in 0..rest.len() / width {
            let base = 1 + g * width;
            let (file, line_i) = if with_file { (Some(self.fields[base + 1].clone()), base + 2) } else { (None, base + 1) };
            out.push(ArgLocation {
                function: self.fields[base].clone(),
                file,
                line: position(&self.fields, line_i)?,
                col: position(&self.fields, line_i + 1)?,
            });
        }
        Ok(out)
    }
}

/// Resolves a location to the entity under it, checking the function name.
pub fn resolve_location(db: &ProgramDb, loc: &ArgLocation) -> Result<EntityId, QueryError> {
    let file = match &loc.file {
        Some(f) => f.clone(),
        None => {
            // Triple form: the file holding the named function.
            let f = db
                .ast
                .function_named(&loc.function)
                .ok_or_else(|| QueryError::FunctionMismatch { expected: loc.function.clone(), found: String::new() })?;
            f.loc.file.clone()
        }
    };
    let id = db
        .entity_at(&file, loc.line, loc.col)
        .ok_or_else(|| QueryError::NoEntityAtLocation { file: file.clone(), line: loc.line, col: loc.col })?;
    let found = db.function_of(id).map(|f| db.function_name(f).to_string()).unwrap_or_default();
    if found != loc.function {
        return Err(QueryError::FunctionMismatch { expected: loc.function.clone(), found });
    }
    Ok(id)
}

/// Builds the argument for a click at `(file, line, col)`.
pub fn synthesize_arg(db: &ProgramDb, file: &str, line: u32, col: u32, kind: QueryKind) -> Result<String, QueryError> {
    let none = || QueryError::NoEntityAtLocation { file: file.to_string(), line, col };
    let id = db.entity_at(file, line, col).ok_or_else(none)?;
    let func = db.function_of(id).ok_or_else(none)?;
    let loc = &db.ast.node(id).loc;
    let tail = [db.function_name(func).to_string(), loc.file.clone(), loc.start_line.to_string(), loc.start_col.to_string()]
        .join(SEP);
    Ok(match kind {
        QueryKind::Q2 => format!("\"var1\"{SEP}{tail}"),
        _ => tail,
    })
}
