//! Exact feasibility of valuation constraints by Fourier–Motzkin elimination.
//!
//! Valuations are treated as finite rationals. Nonzero markers (`val < inf`)
//! impose nothing on finite valuations and are skipped. Every derived
//! inequality remembers which input constraints it came from, so an
//! infeasible system yields the smallest contradictory subset found.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::domain::{Domain, Relation, ValuationConstraint};
use crate::novikov::{ExtRational, Rational};

/// `Σ aⱼ xⱼ ≥ rhs` (or `>` when strict).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Ineq {
    coeffs: BTreeMap<usize, Rational>,
    rhs: Rational,
    strict: bool,
    sources: BTreeSet<usize>,
}

impl Ineq {
    fn scaled(&self, k: &Rational) -> Ineq {
        Ineq {
            coeffs: self.coeffs.iter().map(|(j, a)| (*j, a * k)).collect(),
            rhs: &self.rhs * k,
            strict: self.strict,
            sources: self.sources.clone(),
        }
    }

    /// Whether the variable-free inequality is false.
    fn contradicts(&self) -> bool {
        self.coeffs.is_empty()
            && if self.strict { !self.rhs.is_negative() } else { self.rhs.is_positive() }
    }

    fn trivially_true(&self) -> bool {
        self.coeffs.is_empty() && !self.contradicts()
    }

    /// Scales so the largest coefficient magnitude is 1, for deduplication.
    fn normalized(mut self) -> Ineq {
        if let Some(m) = self.coeffs.values().map(Rational::abs).max() {
            let k = m.recip();
            let sources = std::mem::take(&mut self.sources);
            self = self.scaled(&k);
            self.sources = sources;
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Feasibility {
    /// `piece` indexes the satisfiable conjunction of the domain.
    Feasible { piece: usize, witness: BTreeMap<String, Rational> },
    /// One contradictory constraint subset per piece.
    Infeasible { certificates: Vec<Vec<ValuationConstraint>> },
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible { .. })
    }
}

fn to_ineqs(
    index: usize,
    c: &ValuationConstraint,
    var_index: &BTreeMap<String, usize>,
) -> Vec<Ineq> {
    let ExtRational::Finite(bound) = &c.bound else {
        return Vec::new();
    };
    let coeffs: BTreeMap<usize, Rational> = c
        .form
        .iter()
        .map(|(v, n)| (var_index[v], Rational::from_integer(*n)))
        .collect();
    let sources = BTreeSet::from([index]);
    let ge = Ineq { coeffs: coeffs.clone(), rhs: bound - &c.constant, strict: false, sources: sources.clone() };
    let le = Ineq {
        coeffs: coeffs.iter().map(|(j, a)| (*j, -a)).collect(),
        rhs: &c.constant - bound,
        strict: false,
        sources,
    };
    match c.rel {
        Relation::Ge => vec![ge],
        Relation::Gt => vec![Ineq { strict: true, ..ge }],
        Relation::Le => vec![le],
        Relation::Lt => vec![Ineq { strict: true, ..le }],
        Relation::Eq => vec![ge, le],
    }
}

/// Eliminates variable `k`, recording contradictions.
fn eliminate(system: &[Ineq], k: usize, contradictions: &mut Vec<BTreeSet<usize>>) -> Vec<Ineq> {
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    let mut out: BTreeMap<(BTreeMap<usize, Rational>, Rational, bool), BTreeSet<usize>> = BTreeMap::new();
    let mut keep = |ineq: Ineq, out: &mut BTreeMap<_, BTreeSet<usize>>| {
        if ineq.contradicts() {
            contradictions.push(ineq.sources.clone());
        }
        if ineq.coeffs.is_empty() {
            return;
        }
        let n = ineq.normalized();
        let key = (n.coeffs, n.rhs, n.strict);
        match out.get(&key) {
            Some(s) if s.len() <= n.sources.len() => {}
            _ => {
                out.insert(key, n.sources);
            }
        }
    };
    for ineq in system {
        match ineq.coeffs.get(&k) {
            Some(a) if a.is_positive() => lower.push(ineq),
            Some(_) => upper.push(ineq),
            None => keep(ineq.clone(), &mut out),
        }
    }
    for lo in &lower {
        for up in &upper {
            let a = lo.coeffs[&k].clone();
            let b = -up.coeffs[&k].clone();
            let mut coeffs: BTreeMap<usize, Rational> =
                lo.coeffs.iter().map(|(j, c)| (*j, c * &b)).collect();
            for (j, c) in up.coeffs.iter() {
                let prev = coeffs.get(j).cloned().unwrap_or_else(Rational::zero);
                coeffs.insert(*j, &prev + &(c * &a));
            }
            coeffs.retain(|_, c| !c.is_zero());
            let combined = Ineq {
                coeffs,
                rhs: &(&lo.rhs * &b) + &(&up.rhs * &a),
                strict: lo.strict || up.strict,
                sources: lo.sources.union(&up.sources).cloned().collect(),
            };
            keep(combined, &mut out);
        }
    }
    out.into_iter()
        .map(|((coeffs, rhs, strict), sources)| Ineq { coeffs, rhs, strict, sources })
        .collect()
}

/// Chooses a value for `x_k` given values of the later variables.
fn pick_value(system: &[Ineq], k: usize, values: &BTreeMap<usize, Rational>) -> Rational {
    let mut lower: Option<(Rational, bool)> = None;
    let mut upper: Option<(Rational, bool)> = None;
    for ineq in system {
        let Some(a) = ineq.coeffs.get(&k) else { continue };
        let mut rest = ineq.rhs.clone();
        for (j, c) in &ineq.coeffs {
            if *j != k {
                rest = &rest - &(c * &values[j]);
            }
        }
        let b = &rest / a;
        if a.is_positive() {
            let tighter = match &lower {
                None => true,
                Some((l, s)) => b > *l || (b == *l && ineq.strict && !s),
            };
            if tighter {
                lower = Some((b, ineq.strict));
            }
        } else {
            let tighter = match &upper {
                None => true,
                Some((u, s)) => b < *u || (b == *u && ineq.strict && !s),
            };
            if tighter {
                upper = Some((b, ineq.strict));
            }
        }
    }
    let fits = |x: &Rational| {
        lower.as_ref().is_none_or(|(l, s)| if *s { x > l } else { x >= l })
            && upper.as_ref().is_none_or(|(u, s)| if *s { x < u } else { x <= u })
    };
    let zero = Rational::zero();
    if fits(&zero) {
        return zero;
    }
    match (&lower, &upper) {
        (Some((l, false)), _) => l.clone(),
        (_, Some((u, false))) => u.clone(),
        (Some((l, true)), Some((u, true))) => &(l + u) / &Rational::from_integer(2),
        (Some((l, true)), None) => &l.floor() + &Rational::one(),
        (None, Some((u, true))) => &u.ceil() - &Rational::one(),
        (None, None) => zero,
    }
}

/// Feasibility of one conjunction: a witness, or a contradictory subset.
pub fn conjunction_feasible(
    constraints: &[ValuationConstraint],
) -> Result<BTreeMap<String, Rational>, Vec<ValuationConstraint>> {
    let vars: Vec<String> = constraints
        .iter()
        .flat_map(|c| c.vars().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let var_index: BTreeMap<String, usize> =
        vars.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect();
    let mut contradictions: Vec<BTreeSet<usize>> = Vec::new();
    let mut system: Vec<Ineq> = Vec::new();
    for (i, c) in constraints.iter().enumerate() {
        for ineq in to_ineqs(i, c, &var_index) {
            if ineq.contradicts() {
                contradictions.push(ineq.sources.clone());
            } else if !ineq.trivially_true() {
                system.push(ineq);
            }
        }
    }
    let mut stages = vec![system];
    for k in 0..vars.len() {
        let next = eliminate(stages.last().expect("nonempty"), k, &mut contradictions);
        stages.push(next);
    }
    if let Some(best) = contradictions.into_iter().min_by_key(|s| (s.len(), s.clone())) {
        return Err(best.into_iter().map(|i| constraints[i].clone()).collect());
    }
    let mut values: BTreeMap<usize, Rational> = BTreeMap::new();
    for k in (0..vars.len()).rev() {
        let v = pick_value(&stages[k], k, &values);
        values.insert(k, v);
    }
    Ok(vars.into_iter().enumerate().map(|(i, v)| (v, values[&i].clone())).collect())
}

/// Feasibility of a union of conjunctions. The witness assigns every
/// variable of the domain, with zero for variables the piece leaves free.
pub fn domain_feasible(domain: &Domain) -> Feasibility {
    let mut certificates = Vec::new();
    for (i, piece) in domain.pieces.iter().enumerate() {
        match conjunction_feasible(piece) {
            Ok(mut witness) => {
                for v in domain.vars() {
                    witness.entry(v).or_insert_with(Rational::zero);
                }
                return Feasibility::Feasible { piece: i, witness };
            }
            Err(cert) => certificates.push(cert),
        }
    }
    Feasibility::Infeasible { certificates }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    fn c(form: &[(&str, i64)], constant: Rational, rel: Relation, bound: Rational) -> ValuationConstraint {
        ValuationConstraint::new(
            form.iter().map(|(v, n)| (v.to_string(), *n)).collect(),
            constant,
            rel,
            ExtRational::Finite(bound),
        )
    }

    #[test]
    fn disjoint_regions() {
        let d = Domain::conjunction(vec![
            ValuationConstraint::single("y", Relation::Ge, q(0, 1)),
            ValuationConstraint::single("x1", Relation::Eq, q(0, 1)),
            ValuationConstraint::single("x1", Relation::Gt, q(0, 1)),
        ]);
        let Feasibility::Infeasible { certificates } = domain_feasible(&d) else { panic!() };
        assert_eq!(certificates[0].len(), 2);
        assert!(certificates[0].iter().all(|c| c.form.contains_key("x1")));
    }

    #[test]
    fn empty_system_has_zero_witness() {
        assert_eq!(
            domain_feasible(&Domain::everything()),
            Feasibility::Feasible { piece: 0, witness: BTreeMap::new() }
        );
        assert!(!domain_feasible(&Domain::union(vec![])).is_feasible());
    }

    #[test]
    fn strict_window_witness() {
        // 0 < val(t) < 1 with 2val(t) - val(s) = 1 and val(s) > 0
        let d = Domain::conjunction(vec![
            c(&[("t", 1)], q(0, 1), Relation::Gt, q(0, 1)),
            c(&[("t", 1)], q(0, 1), Relation::Lt, q(1, 1)),
            c(&[("t", 2), ("s", -1)], q(0, 1), Relation::Eq, q(1, 1)),
            c(&[("s", 1)], q(0, 1), Relation::Gt, q(0, 1)),
        ]);
        let Feasibility::Feasible { witness, .. } = domain_feasible(&d) else { panic!() };
        let vals: BTreeMap<String, ExtRational> =
            witness.iter().map(|(v, r)| (v.clone(), ExtRational::Finite(r.clone()))).collect();
        for piece in &d.pieces {
            for k in piece {
                assert!(k.holds_at(&vals), "{k} fails at {witness:?}");
            }
        }
    }

    #[test]
    fn transitive_chain_is_infeasible() {
        let d = Domain::conjunction(vec![
            c(&[("a", 1), ("b", -1)], q(0, 1), Relation::Gt, q(0, 1)),
            c(&[("b", 1), ("c", -1)], q(0, 1), Relation::Ge, q(0, 1)),
            c(&[("c", 1), ("a", -1)], q(1, 2), Relation::Ge, q(1, 2)),
            c(&[("a", 1)], q(0, 1), Relation::Le, q(9, 1)),
        ]);
        let Feasibility::Infeasible { certificates } = domain_feasible(&d) else { panic!() };
        assert_eq!(certificates[0].len(), 3);
    }
}
