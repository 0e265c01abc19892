use std::collections::BTreeSet;

use serde::Serialize;

use crate::code_db::ProgramDb;
use crate::lang::{EntityId, IntWidth};
use crate::par::ExecMode;
use crate::runtime::RuntimeValue;
use crate::warehouse::{FactStore, RunFilter};

use super::arg::{resolve_location, ArgShape};
use super::kde::{kde, DEFAULT_GRID_POINTS};
use super::{QueryArg, QueryError};

/// Parsed expression over `var1..varN`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Schema {
    Var(usize),
    Lit(i128),
    Neg(Box<Schema>),
    Not(Box<Schema>),
    Bin(&'static str, Box<Schema>, Box<Schema>),
}

const BINARY: &[(&str, u8)] =
    &[("*", 10), ("/", 10), ("%", 10), ("+", 9), ("-", 9), ("<<", 8), (">>", 8), ("&", 5), ("^", 4), ("|", 3)];

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Var(usize),
    Num(i128),
    Op(&'static str),
    Open,
    Close,
}

fn lex(s: &str) -> Result<Vec<Tok>, QueryError> {
    let b = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c == b'(' {
            out.push(Tok::Open);
            i += 1;
        } else if c == b')' {
            out.push(Tok::Close);
            i += 1;
        } else if s[i..].starts_with("var") {
            let start = i + 3;
            let mut j = start;
            while j < b.len() && b[j].is_ascii_digit() {
                j += 1;
            }
            let k: usize = s[start..j].parse().map_err(|_| QueryError::BadSchema(format!("bad variable at {i}")))?;
            if k == 0 {
                return Err(QueryError::BadSchema("variables are numbered from var1".into()));
            }
            out.push(Tok::Var(k));
            i = j;
        } else if c.is_ascii_digit() {
            let mut j = i;
            while j < b.len() && b[j].is_ascii_alphanumeric() {
                j += 1;
            }
            let text = &s[i..j];
            let v = match text.strip_prefix("0x").or_else(|| text.strip_prefix("0X")) {
                Some(h) => i128::from_str_radix(h, 16),
                None => text.parse(),
            }
            .map_err(|_| QueryError::BadSchema(format!("bad number `{text}`")))?;
            out.push(Tok::Num(v));
            i = j;
        } else {
            let op = ["<<", ">>", "*", "/", "%", "+", "-", "&", "^", "|", "~"]
                .into_iter()
                .find(|op| s[i..].starts_with(op))
                .ok_or_else(|| QueryError::BadSchema(format!("unexpected `{}`", &s[i..=i])))?;
            out.push(Tok::Op(op));
            i += op.len();
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn primary(&mut self) -> Result<Schema, QueryError> {
        let t = self.peek().cloned().ok_or_else(|| QueryError::BadSchema("unexpected end".into()))?;
        self.pos += 1;
        match t {
            Tok::Var(k) => Ok(Schema::Var(k)),
            Tok::Num(v) => Ok(Schema::Lit(v)),
            Tok::Op("-") => Ok(Schema::Neg(Box::new(self.primary()?))),
            Tok::Op("~") => Ok(Schema::Not(Box::new(self.primary()?))),
            Tok::Open => {
                let e = self.expr(0)?;
                if self.peek() != Some(&Tok::Close) {
                    return Err(QueryError::BadSchema("missing `)`".into()));
                }
                self.pos += 1;
                Ok(e)
            }
            t => Err(QueryError::BadSchema(format!("unexpected {t:?}"))),
        }
    }

    fn expr(&mut self, min: u8) -> Result<Schema, QueryError> {
        let mut lhs = self.primary()?;
        while let Some(Tok::Op(op)) = self.peek().cloned() {
            let Some(&(op, prec)) = BINARY.iter().find(|(o, _)| *o == op) else { break };
            if prec < min {
                break;
            }
            self.pos += 1;
            let rhs = self.expr(prec + 1)?;
            lhs = Schema::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }
}

pub fn parse_schema(s: &str) -> Result<Schema, QueryError> {
    let mut p = Parser { toks: lex(s)?, pos: 0 };
    let e = p.expr(0)?;
    if p.pos != p.toks.len() {
        return Err(QueryError::BadSchema(format!("trailing input after token {}", p.pos)));
    }
    Ok(e)
}

impl Schema {
    pub fn max_var(&self) -> usize {
        match self {
            Schema::Var(k) => *k,
            Schema::Lit(_) => 0,
            Schema::Neg(e) | Schema::Not(e) => e.max_var(),
            Schema::Bin(_, a, b) => a.max_var().max(b.max_var()),
        }
    }

    /// Evaluates with C semantics at width `w`; none on division by zero.
    pub fn eval(&self, vars: &[i128], w: IntWidth) -> Option<i128> {
        let v = match self {
            Schema::Var(k) => vars[k - 1],
            Schema::Lit(v) => *v,
            Schema::Neg(e) => e.eval(vars, w)?.wrapping_neg(),
            Schema::Not(e) => !e.eval(vars, w)?,
            Schema::Bin(op, a, b) => {
                let (a, b) = (a.eval(vars, w)?, b.eval(vars, w)?);
                let sh = (b as u32) % w.bits();
                match *op {
                    "*" => a.wrapping_mul(b),
                    "+" => a.wrapping_add(b),
                    "-" => a.wrapping_sub(b),
                    "/" => a.checked_div(b)?,
                    "%" => a.checked_rem(b)?,
                    "<<" => a.wrapping_shl(sh),
                    ">>" => a >> sh,
                    "&" => a & b,
                    "^" => a ^ b,
                    _ => a | b,
                }
            }
        };
        Some(wrap(w, v))
    }
}

fn wrap(w: IntWidth, v: i128) -> i128 {
    let x = w.wrap(v as i64);
    if w == IntWidth::U64 {
        x as u64 as i128
    } else {
        x as i128
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Query2Options {
    pub grid_points: usize,
    pub mode: ExecMode,
}

impl Default for Query2Options {
    fn default() -> Self {
        Query2Options { grid_points: DEFAULT_GRID_POINTS, mode: ExecMode::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Distribution {
    pub expression: String,
    pub operands: Vec<EntityId>,
    pub width: &'static str,
    pub samples: usize,
    pub dropped: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub bandwidth: f64,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    /// Raw values, in run order.
    #[serde(skip)]
    pub values: Vec<i128>,
}

/// Distribution of a schema expression over the recorded values of its
/// operands. `var1` anchors the alignment; the others take their latest
/// value at or before each `var1` sample.
pub fn query2_distribution(
    db: &ProgramDb,
    store: &FactStore,
    arg: &QueryArg,
    opts: &Query2Options,
) -> Result<Distribution, QueryError> {
    let arg = QueryArg::parse(&arg.raw, ArgShape::ExprSchema)?;
    let schema = parse_schema(arg.schema())?;
    let operands: Vec<EntityId> =
        arg.operand_locations()?.iter().map(|l| resolve_location(db, l)).collect::<Result<_, _>>()?;
    if schema.max_var() > operands.len() {
        return Err(QueryError::BadSchema(format!(
            "var{} used but only {} operand locations given",
            schema.max_var(),
            operands.len()
        )));
    }
    for a in &operands {
        if !store.is_monitored(*a) {
            return Err(QueryError::UnmonitoredAccess(*a));
        }
    }
    let width = operands
        .iter()
        .filter_map(|a| db.sema.types.get(a).and_then(|t| t.width()))
        .max_by_key(|w| (w.bits(), !w.signed()))
        .unwrap_or(IntWidth::U64);

    let numeric = |a: EntityId, v: &RuntimeValue| v.as_int().ok_or(QueryError::NonNumericOperand(a));
    let mut rows: Vec<Vec<i128>> = Vec::new();
    let mut dropped = 0;
    if operands.len() == 1 {
        for v in store.series(operands[0], RunFilter::All, false)? {
            rows.push(vec![numeric(operands[0], &v)?]);
        }
    } else {
        let others: BTreeSet<EntityId> = operands[1..].iter().copied().collect();
        let pairs = store.aligned_pairs(&others, operands[0]);
        dropped = pairs.dropped;
        for r in &pairs.rows {
            let mut vals = vec![numeric(operands[0], &r.rhs)?];
            for a in &operands[1..] {
                vals.push(numeric(*a, &r.lhs[a])?);
            }
            rows.push(vals);
        }
    }
    let values: Vec<i128> = rows.iter().filter_map(|r| schema.eval(r, width)).collect();
    if values.is_empty() {
        return Err(QueryError::EmptySeries(operands[0]));
    }
    let xs: Vec<f64> = values.iter().map(|v| *v as f64).collect();
    let d = kde(&xs, opts.grid_points, opts.mode);
    Ok(Distribution {
        expression: arg.schema().to_string(),
        operands,
        width: width.name(),
        samples: xs.len(),
        dropped: dropped + rows.len() - values.len(),
        min: xs.iter().copied().fold(f64::INFINITY, f64::min),
        max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean: xs.iter().sum::<f64>() / xs.len() as f64,
        bandwidth: d.bandwidth,
        grid: d.grid,
        density: d.density,
        values,
    })
}
