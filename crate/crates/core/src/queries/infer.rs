//! Relation inference between a target access and candidate sources.
//!
//! Two relation families are tried: address equality for pointers, and
//! polynomials of degree at most two over one or two numeric sources,
//! solved exactly over the rationals.

use std::collections::{BTreeSet, HashMap};

use num::{BigInt, BigRational, One, Signed, Zero};
use serde::{Serialize, Serializer};

use crate::lang::EntityId;
use crate::runtime::RuntimeValue;
use crate::warehouse::AlignedRow;

use super::QueryError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TemplatePolicy {
    /// Aligned samples needed before any relation is considered.
    pub min_support: usize,
    /// Distinct samples beyond those used to fix the coefficients.
    pub min_validation: usize,
}

impl Default for TemplatePolicy {
    fn default() -> Self {
        TemplatePolicy { min_support: 8, min_validation: 2 }
    }
}

fn ser_ratio<S: Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    struct Ratio {
        num: String,
        den: String,
    }
    Ratio { num: r.numer().to_string(), den: r.denom().to_string() }.serialize(s)
}

/// `coefficient * product(variables)`; an empty product is the constant term.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Term {
    #[serde(serialize_with = "ser_ratio")]
    pub coefficient: BigRational,
    pub variables: Vec<EntityId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind")]
pub enum Relation {
    AddrEquality { source: EntityId },
    Polynomial { terms: Vec<Term> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InferredRelation {
    pub target: EntityId,
    pub relation: Relation,
    /// Aligned rows the relation was checked against.
    pub support: usize,
    /// Distinct samples that confirmed the solved coefficients.
    pub validated: usize,
}

impl InferredRelation {
    pub fn sources(&self) -> BTreeSet<EntityId> {
        match &self.relation {
            Relation::AddrEquality { source } => BTreeSet::from([*source]),
            Relation::Polynomial { terms } => terms.iter().flat_map(|t| t.variables.iter().copied()).collect(),
        }
    }

    pub fn render(&self, name: impl Fn(EntityId) -> String) -> String {
        let rhs = match &self.relation {
            Relation::AddrEquality { source } => name(*source),
            Relation::Polynomial { terms } => {
                let parts: Vec<String> = terms
                    .iter()
                    .map(|t| {
                        let mut f = vec![t.coefficient.to_string()];
                        f.extend(t.variables.iter().map(|v| name(*v)));
                        f.join("*")
                    })
                    .collect();
                parts.join(" + ")
            }
        };
        format!("{} = {rhs}", name(self.target))
    }
}

fn int(v: &RuntimeValue) -> Option<i128> {
    match v {
        RuntimeValue::Int(i) => Some(*i),
        RuntimeValue::Addr { .. } => None,
    }
}

/// Monomials over the chosen variables: constant, linear, squares, cross.
fn monomials(k: usize) -> Vec<Vec<usize>> {
    match k {
        1 => vec![vec![], vec![0], vec![0, 0]],
        _ => vec![vec![], vec![0], vec![1], vec![0, 0], vec![1, 1], vec![0, 1]],
    }
}

/// Incremental reduced row echelon form over `m` unknowns plus a right-hand side.
struct Echelon {
    m: usize,
    rows: Vec<(usize, Vec<BigRational>)>,
}

impl Echelon {
    /// Adds one equation; false if it contradicts the ones already present.
    fn add(&mut self, mut row: Vec<BigRational>) -> bool {
        for (p, r) in &self.rows {
            if !row[*p].is_zero() {
                let f = row[*p].clone();
                for (x, y) in row.iter_mut().zip(r) {
                    *x -= &f * y;
                }
            }
        }
        let Some(p) = (0..self.m).find(|i| !row[*i].is_zero()) else {
            return row[self.m].is_zero();
        };
        let lead = row[p].clone();
        for x in row.iter_mut() {
            *x /= &lead;
        }
        for (_, r) in self.rows.iter_mut() {
            if !r[p].is_zero() {
                let f = r[p].clone();
                for (x, y) in r.iter_mut().zip(&row) {
                    *x -= &f * y;
                }
            }
        }
        self.rows.push((p, row));
        true
    }

    /// Solution with free unknowns set to zero.
    fn solution(&self) -> Vec<BigRational> {
        let mut c = vec![BigRational::zero(); self.m];
        for (p, r) in &self.rows {
            c[*p] = r[self.m].clone();
        }
        c
    }
}

/// Tries one template. Rows are streamed so that wrong candidates fail on
/// the first contradicting sample.
fn fit(target: EntityId, vars: &[EntityId], rows: &[AlignedRow], policy: &TemplatePolicy) -> Option<InferredRelation> {
    let monos = monomials(vars.len());
    let m = monos.len();
    let mut ech = Echelon { m, rows: Vec::new() };
    let mut seen: HashMap<Vec<i128>, i128> = HashMap::new();
    // Once the system has full rank, samples are checked with integers:
    // den * y == sum(scaled_i * mono_i).
    let mut fixed: Option<(BigInt, Vec<BigInt>)> = None;
    let mut support = 0;
    for r in rows {
        let Some(xs) = vars.iter().map(|v| r.lhs.get(v).and_then(int)).collect::<Option<Vec<i128>>>() else {
            continue;
        };
        let y = int(&r.rhs)?;
        support += 1;
        match seen.get(&xs) {
            Some(prev) if *prev != y => return None,
            Some(_) => continue,
            None => {
                seen.insert(xs.clone(), y);
            }
        }
        let mono_vals: Vec<BigInt> =
            monos.iter().map(|mono| mono.iter().fold(BigInt::one(), |acc, i| acc * BigInt::from(xs[*i]))).collect();
        if let Some((den, scaled)) = &fixed {
            let lhs: BigInt = scaled.iter().zip(&mono_vals).map(|(a, b)| a * b).sum();
            if lhs != den * BigInt::from(y) {
                return None;
            }
            continue;
        }
        let mut eq: Vec<BigRational> = mono_vals.into_iter().map(BigRational::from_integer).collect();
        eq.push(BigRational::from_integer(BigInt::from(y)));
        if !ech.add(eq) {
            return None;
        }
        if ech.rows.len() == m {
            let sol = ech.solution();
            let den = sol.iter().fold(BigInt::one(), |acc, c| num::integer::lcm(acc, c.denom().clone()));
            let scaled = sol.iter().map(|c| (c * BigRational::from_integer(den.clone())).to_integer()).collect();
            fixed = Some((den, scaled));
        }
    }
    let validated = seen.len() - ech.rows.len();
    if support < policy.min_support || validated < policy.min_validation {
        return None;
    }
    let terms: Vec<Term> = ech
        .solution()
        .into_iter()
        .zip(monos)
        .filter(|(c, _)| !c.is_zero())
        .map(|(coefficient, mono)| Term { coefficient, variables: mono.into_iter().map(|i| vars[i]).collect() })
        .collect();
    if terms.iter().all(|t| t.variables.is_empty()) {
        return None;
    }
    Some(InferredRelation { target, relation: Relation::Polynomial { terms }, support, validated })
}

/// Looks for a relation explaining `target` (the rows' right-hand side) in
/// terms of the row sources. Sources are tried in ascending id order,
/// singletons before pairs.
pub fn infer_relationship(
    target: EntityId,
    rows: &[AlignedRow],
    policy: &TemplatePolicy,
) -> Result<Option<InferredRelation>, QueryError> {
    if rows.len() < policy.min_support {
        return Err(QueryError::InsufficientSamples { have: rows.len(), need: policy.min_support });
    }
    let mut present: HashMap<EntityId, usize> = HashMap::new();
    for r in rows {
        for k in r.lhs.keys() {
            *present.entry(*k).or_default() += 1;
        }
    }
    let mut vars: Vec<EntityId> =
        present.into_iter().filter(|(_, n)| *n >= policy.min_support).map(|(k, _)| k).collect();
    vars.sort();
    vars.retain(|v| *v != target);

    if rows.iter().any(|r| r.rhs.is_addr()) {
        for &s in &vars {
            let mut support = 0;
            let all_equal = rows.iter().filter_map(|r| r.lhs.get(&s).map(|v| (v, &r.rhs))).all(|(v, rhs)| {
                support += 1;
                v == rhs
            });
            if all_equal && support >= policy.min_support {
                return Ok(Some(InferredRelation {
                    target,
                    relation: Relation::AddrEquality { source: s },
                    support,
                    validated: support,
                }));
            }
        }
        return Ok(None);
    }

    let first = &rows[0].rhs;
    if rows.iter().all(|r| &r.rhs == first) {
        return Ok(None);
    }
    // Only sources that never hold an address are candidates.
    vars.retain(|v| rows.iter().all(|r| r.lhs.get(v).is_none_or(|x| !x.is_addr())));
    for &v in &vars {
        if let Some(rel) = fit(target, &[v], rows, policy) {
            return Ok(Some(rel));
        }
    }
    for (i, &a) in vars.iter().enumerate() {
        for &b in &vars[i + 1..] {
            if let Some(rel) = fit(target, &[a, b], rows, policy) {
                return Ok(Some(rel));
            }
        }
    }
    Ok(None)
}

/// True when every coefficient is an integer and non-negative, handy for display.
pub fn is_integral(terms: &[Term]) -> bool {
    terms.iter().all(|t| t.coefficient.is_integer() && !t.coefficient.is_negative())
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;

    fn row(tick: u64, rhs: i128, lhs: &[(u64, i128)]) -> AlignedRow {
        AlignedRow {
            run_id: 0,
            tick,
            rhs: RuntimeValue::Int(rhs),
            lhs: lhs.iter().map(|(k, v)| (EntityId(*k), RuntimeValue::Int(*v))).collect::<BTreeMap<_, _>>(),
        }
    }

    #[test]
    fn recovers_a_product_of_two_sources() {
        let rows: Vec<AlignedRow> =
            (0..20).map(|i| row(i as u64, i * (i + 3) * 7, &[(3, i), (5, i + 3), (9, 42)])).collect();
        let rel = infer_relationship(EntityId(1), &rows, &TemplatePolicy::default()).unwrap().unwrap();
        // x*(x+3) is also quadratic in x alone, which wins as a singleton.
        assert_eq!(rel.sources(), BTreeSet::from([EntityId(3)]));
        let Relation::Polynomial { terms } = rel.relation else { panic!() };
        assert_eq!(terms.len(), 2);
        assert!(is_integral(&terms));
    }

    #[test]
    fn pairs_need_both_sources() {
        let rows: Vec<AlignedRow> = (0..30i128)
            .map(|i| {
                let (a, b) = (i % 7, (i * 5) % 11);
                row(i as u64, 3 * a * b - 2 * b + 1, &[(2, a), (4, b)])
            })
            .collect();
        let rel = infer_relationship(EntityId(1), &rows, &TemplatePolicy::default()).unwrap().unwrap();
        assert_eq!(rel.sources(), BTreeSet::from([EntityId(2), EntityId(4)]));
        assert_eq!(rel.render(|e| format!("v{}", e.0)), "v1 = 1 + -2*v4 + 3*v2*v4");
    }

    #[test]
    fn few_samples_and_constant_targets() {
        let rows: Vec<AlignedRow> = (0..5).map(|i| row(i, i as i128, &[(2, i as i128)])).collect();
        assert!(matches!(
            infer_relationship(EntityId(1), &rows, &TemplatePolicy::default()),
            Err(QueryError::InsufficientSamples { have: 5, need: 8 })
        ));
        let rows: Vec<AlignedRow> = (0..20).map(|i| row(i, 4, &[(2, i as i128)])).collect();
        assert_eq!(infer_relationship(EntityId(1), &rows, &TemplatePolicy::default()).unwrap(), None);
        // Cubic is outside the template family.
        let rows: Vec<AlignedRow> = (0..20).map(|i| row(i, (i * i * i) as i128, &[(2, i as i128)])).collect();
        assert_eq!(infer_relationship(EntityId(1), &rows, &TemplatePolicy::default()).unwrap(), None);
    }

    #[test]
    fn addresses_match_by_equality() {
        let addr = |o| RuntimeValue::Addr { alloc: 3, offset: o };
        let rows: Vec<AlignedRow> = (0..10)
            .map(|i| AlignedRow {
                run_id: i,
                tick: 1,
                rhs: addr(0),
                lhs: BTreeMap::from([(EntityId(4), RuntimeValue::Int(i as i128)), (EntityId(6), addr(0))]),
            })
            .collect();
        let rel = infer_relationship(EntityId(1), &rows, &TemplatePolicy::default()).unwrap().unwrap();
        assert_eq!(rel.relation, Relation::AddrEquality { source: EntityId(6) });
    }
}
