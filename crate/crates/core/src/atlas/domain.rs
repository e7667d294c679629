use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::multiseries::Series;
use crate::novikov::{ExtRational, Novikov, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Eq => "=",
            Relation::Gt => ">",
            Relation::Ge => ">=",
            Relation::Lt => "<",
            Relation::Le => "<=",
        }
    }

    fn holds(self, lhs: &ExtRational, rhs: &ExtRational) -> bool {
        match self {
            Relation::Eq => lhs == rhs,
            Relation::Gt => lhs > rhs,
            Relation::Ge => lhs >= rhs,
            Relation::Lt => lhs < rhs,
            Relation::Le => lhs <= rhs,
        }
    }
}

/// `Σ nᵢ·val(vᵢ) + c  rel  bound`. An infinite bound is allowed only with
/// `<`/`<=`; `val(v) < inf` says `v ≠ 0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ValuationConstraint {
    pub form: BTreeMap<String, i64>,
    pub constant: Rational,
    pub rel: Relation,
    pub bound: ExtRational,
}

enum Lhs {
    Value(ExtRational),
    MinusInfinity,
    Undefined,
}

/// Left-hand side at a point; zero coordinates have valuation `+∞`.
fn eval_form(form: &BTreeMap<String, i64>, constant: &Rational, vals: &BTreeMap<String, ExtRational>) -> Lhs {
    let mut finite = constant.clone();
    let (mut plus_inf, mut minus_inf) = (false, false);
    for (v, n) in form {
        match vals.get(v) {
            None => return Lhs::Undefined,
            Some(ExtRational::Finite(x)) => finite = &finite + &(x * &Rational::from_integer(*n)),
            Some(ExtRational::Infinite) if *n > 0 => plus_inf = true,
            Some(ExtRational::Infinite) => minus_inf = true,
        }
    }
    match (plus_inf, minus_inf) {
        (true, true) => Lhs::Undefined,
        (true, false) => Lhs::Value(ExtRational::Infinite),
        (false, true) => Lhs::MinusInfinity,
        (false, false) => Lhs::Value(ExtRational::Finite(finite)),
    }
}

impl ValuationConstraint {
    pub fn new(form: BTreeMap<String, i64>, constant: Rational, rel: Relation, bound: ExtRational) -> Self {
        let mut form = form;
        form.retain(|_, n| *n != 0);
        ValuationConstraint { form, constant, rel, bound }
    }

    /// `val(v) rel bound`.
    pub fn single(v: &str, rel: Relation, bound: Rational) -> Self {
        ValuationConstraint::new(
            BTreeMap::from([(v.to_string(), 1)]),
            Rational::zero(),
            rel,
            ExtRational::Finite(bound),
        )
    }

    /// `v ≠ 0`.
    pub fn nonzero(v: &str) -> Self {
        ValuationConstraint::new(
            BTreeMap::from([(v.to_string(), 1)]),
            Rational::zero(),
            Relation::Lt,
            ExtRational::Infinite,
        )
    }

    pub fn vars(&self) -> impl Iterator<Item = &String> {
        self.form.keys()
    }

    /// Whether the constraint only excludes zero values.
    pub fn is_nonzero_marker(&self) -> bool {
        self.bound.is_infinite()
    }

    /// Checks the constraint at a point. Missing variables count as violations.
    pub fn holds_at(&self, vals: &BTreeMap<String, ExtRational>) -> bool {
        match eval_form(&self.form, &self.constant, vals) {
            Lhs::Value(lhs) => self.rel.holds(&lhs, &self.bound),
            Lhs::MinusInfinity => matches!(self.rel, Relation::Lt | Relation::Le),
            Lhs::Undefined => false,
        }
    }

    /// Rewrites `val(w)` as `e + Σ mᵢ val(vᵢ)` for each target variable whose
    /// image is a single atom `c·T^e·m`. Returns `None` when a variable of
    /// this constraint has a non-monomial image.
    pub fn pullback(&self, map: &BTreeMap<String, Series>) -> Option<ValuationConstraint> {
        let mut form: BTreeMap<String, i64> = BTreeMap::new();
        let mut constant = self.constant.clone();
        for (w, n) in &self.form {
            let image = map.get(w)?;
            let (m, c) = image.single_term()?;
            let [(e, _)] = c.terms() else {
                return None;
            };
            constant = &constant + &(e * &Rational::from_integer(*n));
            for (v, k) in m.exponents() {
                *form.entry(v.clone()).or_insert(0) += k * n;
            }
        }
        Some(ValuationConstraint::new(form, constant, self.rel, self.bound.clone()))
    }
}

impl fmt::Display for ValuationConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for (v, n) in &self.form {
            let coeff = match n {
                1 => String::new(),
                -1 => "-".to_string(),
                n => n.to_string(),
            };
            parts.push(format!("{coeff}val({v})"));
        }
        if !self.constant.is_zero() || parts.is_empty() {
            parts.push(self.constant.to_string());
        }
        let lhs = crate::novikov::join_sum(parts);
        write!(f, "{lhs} {} {}", self.rel.symbol(), self.bound)
    }
}

impl Serialize for ValuationConstraint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut m = s.serialize_map(None)?;
        m.serialize_entry("form", &self.form)?;
        if !self.constant.is_zero() {
            m.serialize_entry("constant", &self.constant)?;
        }
        m.serialize_entry("rel", &self.rel)?;
        m.serialize_entry("bound", &self.bound)?;
        m.end()
    }
}

/// A finite union of conjunctions of valuation constraints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Domain {
    pub pieces: Vec<Vec<ValuationConstraint>>,
}

impl Default for Domain {
    fn default() -> Self {
        Domain::everything()
    }
}

impl Domain {
    pub fn everything() -> Self {
        Domain { pieces: vec![Vec::new()] }
    }

    pub fn conjunction(constraints: Vec<ValuationConstraint>) -> Self {
        Domain { pieces: vec![constraints] }
    }

    pub fn union(pieces: Vec<Vec<ValuationConstraint>>) -> Self {
        Domain { pieces }
    }

    pub fn is_everything(&self) -> bool {
        self.pieces.iter().any(|p| p.is_empty())
    }

    pub fn vars(&self) -> BTreeSet<String> {
        self.pieces.iter().flatten().flat_map(|c| c.vars().cloned()).collect()
    }

    /// Intersection, distributed over the pieces.
    pub fn and(&self, other: &Domain) -> Domain {
        let mut pieces = Vec::new();
        for a in &self.pieces {
            for b in &other.pieces {
                let mut p = a.clone();
                for c in b {
                    if !p.contains(c) {
                        p.push(c.clone());
                    }
                }
                pieces.push(p);
            }
        }
        Domain { pieces }
    }

    /// Pulls the domain back along a substitution map. The flag reports
    /// whether some constraint was dropped because its image is not a monomial.
    pub fn pullback(&self, map: &BTreeMap<String, Series>) -> (Domain, bool) {
        let mut approximate = false;
        let pieces = self
            .pieces
            .iter()
            .map(|p| {
                p.iter()
                    .filter_map(|c| {
                        let pulled = c.pullback(map);
                        approximate |= pulled.is_none();
                        pulled
                    })
                    .collect()
            })
            .collect();
        (Domain { pieces }, approximate)
    }

    /// Membership of a point. On failure returns the first violated
    /// constraint of the first piece (`0 > 0` for the empty domain).
    pub fn check_point(&self, point: &BTreeMap<String, Novikov>) -> Result<(), ValuationConstraint> {
        let vals: BTreeMap<String, ExtRational> =
            point.iter().map(|(v, s)| (v.clone(), s.val())).collect();
        let mut first_violation = None;
        for piece in &self.pieces {
            match piece.iter().find(|c| !c.holds_at(&vals)) {
                None => return Ok(()),
                Some(c) => {
                    first_violation.get_or_insert_with(|| c.clone());
                }
            }
        }
        Err(first_violation.unwrap_or_else(|| {
            ValuationConstraint::new(BTreeMap::new(), Rational::zero(), Relation::Gt, ExtRational::Finite(Rational::zero()))
        }))
    }

    pub fn contains(&self, point: &BTreeMap<String, Novikov>) -> bool {
        self.check_point(point).is_ok()
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |p: &Vec<ValuationConstraint>| {
            if p.is_empty() {
                "true".to_string()
            } else {
                p.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" and ")
            }
        };
        match self.pieces.as_slice() {
            [] => write!(f, "false"),
            [p] => write!(f, "{}", show(p)),
            ps => write!(
                f,
                "{}",
                ps.iter().map(|p| format!("({})", show(p))).collect::<Vec<_>>().join(" or ")
            ),
        }
    }
}
