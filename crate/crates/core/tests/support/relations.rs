#![allow(dead_code)]

//! Programs with a planted polynomial between two input-derived locals and a
//! sink, plus control programs where the sink is no such polynomial.

use std::collections::{BTreeMap, BTreeSet};

use fuzzlens_core::code_db::ProgramDb;
use fuzzlens_core::lang::{EntityId, NodeKind};
use fuzzlens_core::queries::{infer_relationship, Relation, TemplatePolicy};
use fuzzlens_core::runtime::execute;
use fuzzlens_core::warehouse::FactStore;
use num::{BigInt, BigRational, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Monomials over `a` and `b`, as exponent pairs.
const MONOMIALS: [(u32, u32); 5] = [(1, 0), (0, 1), (2, 0), (0, 2), (1, 1)];

/// Polynomial keyed by `(deg a, deg b)`, zero coefficients omitted.
pub type Poly = BTreeMap<(u32, u32), i64>;

pub struct Case {
    pub source: String,
    /// `None` for a control.
    pub planted: Option<Poly>,
}

fn render(p: &Poly) -> String {
    let mono = |(da, db): (u32, u32)| {
        let mut f: Vec<&str> = Vec::new();
        f.extend(std::iter::repeat_n("a", da as usize));
        f.extend(std::iter::repeat_n("b", db as usize));
        f.join(" * ")
    };
    p.iter()
        .map(|(m, c)| if *m == (0, 0) { format!("({c})") } else { format!("({c}) * {}", mono(*m)) })
        .collect::<Vec<_>>()
        .join(" + ")
}

fn program(rhs: &str) -> String {
    format!(
        "i64 sink;\nvoid main(u8* data, u64 n) {{\n  if (n < 4) return;\n  i64 a = data[0];\n  i64 b = data[1];\n  i64 c = data[2];\n  i64 d = data[3];\n  i64 y = {rhs};\n  sink = y;\n}}\n"
    )
}

pub fn planted(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = Poly::new();
    while !p.keys().any(|m| *m != (0, 0)) {
        for m in MONOMIALS {
            if rng.random_bool(0.5) {
                let c: i64 = rng.random_range(1..=5) * if rng.random_bool(0.5) { 1 } else { -1 };
                p.insert(m, c);
            }
        }
    }
    if rng.random_bool(0.5) {
        p.insert((0, 0), rng.random_range(-5..=5));
        p.retain(|_, c| *c != 0);
    }
    Case { source: program(&render(&p)), planted: Some(p) }
}

/// The sink depends on unrelated bytes or on `a`, `b` through non-polynomial
/// operators.
pub fn control(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let k: i64 = rng.random_range(2..=9);
    let rhs = match seed % 5 {
        0 => format!("c * {k} + d"),
        1 => format!("(a * b) % {}", k + 8),
        2 => "a ^ b".to_string(),
        3 => format!("(a & {}) * b", k | 1),
        _ => format!("a + c * {k}"),
    };
    Case { source: program(&rhs), planted: None }
}

fn decl(db: &ProgramDb, name: &str) -> EntityId {
    db.ast
        .nodes()
        .iter()
        .find(|n| n.kind == NodeKind::VarDecl && n.attrs.name.as_deref() == Some(name))
        .map(|n| n.id)
        .unwrap()
}

#[derive(Debug, PartialEq, Eq)]
pub enum Outcome {
    Recovered,
    /// A planted relation was missed or recovered with different terms.
    Missed(String),
    /// A relation was reported for a control.
    Spurious(String),
    Rejected,
}

/// Runs `samples` random inputs, aligns `a` and `b` with `y` and compares
/// the inferred relation with the planted polynomial.
pub fn run(case: &Case, samples: u64, seed: u64) -> Outcome {
    let db = ProgramDb::from_source("rel.mc", &case.source, "main").unwrap();
    let (a, b, y) = (decl(&db, "a"), decl(&db, "b"), decl(&db, "y"));
    let monitor = BTreeSet::from([a, b, y]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<Vec<u8>> = (0..samples).map(|_| (0..4).map(|_| rng.random()).collect()).collect();
    let traces: Vec<_> = inputs.iter().enumerate().map(|(i, x)| execute(&db, x, &monitor, i as u64, 10_000)).collect();
    let store = FactStore::from_traces(db.generation(), traces.iter().zip(inputs.iter().map(Vec::as_slice)));
    let rows = store.aligned_pairs(&BTreeSet::from([a, b]), y).rows;
    let found = infer_relationship(y, &rows, &TemplatePolicy::default()).unwrap();

    let got = found.map(|r| match r.relation {
        Relation::Polynomial { terms } => {
            let mut p: BTreeMap<(u32, u32), BigRational> = BTreeMap::new();
            for t in terms.into_iter().filter(|t| !t.coefficient.is_zero()) {
                let da = t.variables.iter().filter(|v| **v == a).count() as u32;
                let dbg = t.variables.iter().filter(|v| **v == b).count() as u32;
                *p.entry((da, dbg)).or_insert_with(BigRational::zero) += t.coefficient;
            }
            p.retain(|_, c| !c.is_zero());
            format!("{p:?}")
        }
        other => format!("{other:?}"),
    });
    match (&case.planted, got) {
        (Some(p), Some(g)) => {
            let want: BTreeMap<(u32, u32), BigRational> =
                p.iter().map(|(m, c)| (*m, BigRational::from_integer(BigInt::from(*c)))).collect();
            if g == format!("{want:?}") {
                Outcome::Recovered
            } else {
                Outcome::Missed(format!("got {g}, planted {want:?}"))
            }
        }
        (Some(p), None) => Outcome::Missed(format!("nothing inferred for {p:?}")),
        (None, Some(g)) => Outcome::Spurious(g),
        (None, None) => Outcome::Rejected,
    }
}
