//! Multivariate Laurent series in named variables with Novikov coefficients.
//!
//! A series is known modulo two cutoffs: an energy cutoff shared by all
//! coefficients, and a total-degree cutoff. Terms of total degree `≥ D` are
//! unknown, as are coefficient terms of `T`-exponent `≥ E`.

mod calculus;
pub mod monomial;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

pub use monomial::Monomial;

use crate::novikov::{
    format_scaled, format_t_power, join_sum, ExtRational, GaussRational, Novikov, NovikovError,
    Rational,
};

pub type Ambient = BTreeSet<String>;

/// Builds an ambient variable set from names.
pub fn ambient<S: AsRef<str>>(names: impl IntoIterator<Item = S>) -> Ambient {
    names.into_iter().map(|s| s.as_ref().to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SeriesError {
    #[error("variable sets differ: {left:?} vs {right:?}")]
    VariableMismatch { left: Vec<String>, right: Vec<String> },
    #[error("variable `{0}` is not in the ambient set")]
    UnknownVariable(String),
    #[error("series `{0}` is not invertible")]
    NotInvertible(String),
    #[error("negative power of `{var}` meets a non-invertible series")]
    NonInvertibleSubstitution { var: String },
    #[error("substitution into a degree-truncated series diverges: `{var}` maps to a series with neither positive degree nor positive valuation")]
    DivergentSubstitution { var: String },
    #[error("evaluation of a degree-truncated series diverges at `{var}` (valuation not positive)")]
    DivergentEvaluation { var: String },
    #[error("negative power of `{var}` evaluated at 0")]
    DivisionByZero { var: String },
    #[error("no value assigned to `{var}`")]
    MissingAssignment { var: String },
    #[error(transparent)]
    Novikov(#[from] NovikovError),
}

/// Working precision for operations producing infinite expansions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Precision {
    pub energy: Rational,
    pub degree: i64,
}

impl Default for Precision {
    fn default() -> Self {
        Precision { energy: Rational::from_integer(5), degree: 8 }
    }
}

impl Precision {
    pub fn new(energy: Rational, degree: i64) -> Self {
        Precision { energy, degree }
    }
}

/// Minimum of degree cutoffs, `None` meaning `+∞`.
pub(crate) fn deg_min(a: Option<i64>, b: Option<i64>) -> Option<i64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

fn deg_plus(a: Option<i64>, b: Option<i64>) -> Option<i64> {
    Some(a? + b?)
}

fn ext_min(a: &ExtRational, b: &ExtRational) -> ExtRational {
    std::cmp::min(a, b).clone()
}

/// One term `c·T^e·m` of a series.
#[derive(Debug, Clone)]
pub(crate) struct Atom {
    pub monomial: Monomial,
    pub exp: Rational,
    pub coeff: GaussRational,
}

#[derive(Clone, PartialEq, Eq)]
pub struct Series {
    ambient: Ambient,
    terms: BTreeMap<Monomial, Novikov>,
    energy: ExtRational,
    degree: Option<i64>,
}

impl Series {
    pub fn zero(ambient: &Ambient) -> Self {
        Series {
            ambient: ambient.clone(),
            terms: BTreeMap::new(),
            energy: ExtRational::Infinite,
            degree: None,
        }
    }

    pub fn one(ambient: &Ambient) -> Self {
        Series::constant(ambient, Novikov::one())
    }

    pub fn constant(ambient: &Ambient, c: Novikov) -> Self {
        let energy = c.cutoff().clone();
        Series::build(ambient.clone(), [(Monomial::one(), c)], energy, None)
    }

    pub fn var(ambient: &Ambient, name: &str) -> Result<Self, SeriesError> {
        Series::monomial(ambient, Monomial::var(name), Novikov::one())
    }

    pub fn monomial(ambient: &Ambient, m: Monomial, c: Novikov) -> Result<Self, SeriesError> {
        let energy = c.cutoff().clone();
        Series::from_terms(ambient, [(m, c)], energy, None)
    }

    /// Builds a series, checking that every monomial uses ambient variables.
    pub fn from_terms(
        ambient: &Ambient,
        terms: impl IntoIterator<Item = (Monomial, Novikov)>,
        energy: ExtRational,
        degree: Option<i64>,
    ) -> Result<Self, SeriesError> {
        let terms: Vec<_> = terms.into_iter().collect();
        for (m, _) in &terms {
            if let Some(v) = m.vars().find(|v| !ambient.contains(*v)) {
                return Err(SeriesError::UnknownVariable(v.clone()));
            }
        }
        Ok(Series::build(ambient.clone(), terms, energy, degree))
    }

    /// Normalizes: merges duplicate monomials, enforces a shared energy
    /// cutoff and drops zero coefficients and monomials beyond the degree cutoff.
    fn build(
        ambient: Ambient,
        terms: impl IntoIterator<Item = (Monomial, Novikov)>,
        energy: ExtRational,
        degree: Option<i64>,
    ) -> Self {
        let mut acc: BTreeMap<Monomial, Novikov> = BTreeMap::new();
        let mut energy = energy;
        for (m, c) in terms {
            if c.cutoff() < &energy {
                energy = c.cutoff().clone();
            }
            if degree.is_some_and(|d| m.degree() >= d) {
                continue;
            }
            match acc.get_mut(&m) {
                Some(slot) => *slot = slot.add(&c),
                None => {
                    acc.insert(m, c);
                }
            }
        }
        let terms = acc
            .into_iter()
            .map(|(m, c)| (m, c.truncate_ext(&energy)))
            .filter(|(_, c)| !c.is_zero())
            .collect();
        Series { ambient, terms, energy, degree }
    }

    pub fn ambient(&self) -> &Ambient {
        &self.ambient
    }

    pub fn terms(&self) -> &BTreeMap<Monomial, Novikov> {
        &self.terms
    }

    pub fn energy_cutoff(&self) -> &ExtRational {
        &self.energy
    }

    pub fn degree_cutoff(&self) -> Option<i64> {
        self.degree
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_exact(&self) -> bool {
        self.energy.is_infinite() && self.degree.is_none()
    }

    /// Coefficient of `m`, carrying the series energy cutoff.
    pub fn coefficient(&self, m: &Monomial) -> Novikov {
        self.terms
            .get(m)
            .cloned()
            .unwrap_or_else(|| Novikov::zero_with_cutoff(self.energy.clone()))
    }

    pub fn constant_term(&self) -> Novikov {
        self.coefficient(&Monomial::one())
    }

    /// The unique term, if the series has exactly one monomial.
    pub fn single_term(&self) -> Option<(&Monomial, &Novikov)> {
        if self.terms.len() == 1 {
            self.terms.iter().next()
        } else {
            None
        }
    }

    /// Variables occurring with nonzero exponent in some term.
    pub fn vars_used(&self) -> BTreeSet<String> {
        self.terms.keys().flat_map(|m| m.vars().cloned()).collect()
    }

    /// Minimum coefficient valuation; `+∞` for zero.
    pub fn val(&self) -> ExtRational {
        ExtRational::min_of(self.terms.values().map(|c| c.val()).collect::<Vec<_>>().iter())
    }

    /// Minimum total degree of a stored monomial; `None` for zero.
    pub fn min_degree(&self) -> Option<i64> {
        self.terms.keys().map(Monomial::degree).min()
    }

    pub(crate) fn atoms(&self) -> Vec<Atom> {
        self.terms
            .iter()
            .flat_map(|(m, c)| {
                c.terms().iter().map(move |(e, a)| Atom {
                    monomial: m.clone(),
                    exp: e.clone(),
                    coeff: a.clone(),
                })
            })
            .collect()
    }

    /// Lowers the cutoffs to at most the given ones.
    pub fn with_cutoffs(&self, energy: &ExtRational, degree: Option<i64>) -> Series {
        Series::build(
            self.ambient.clone(),
            self.terms.iter().map(|(m, c)| (m.clone(), c.clone())),
            ext_min(&self.energy, energy),
            deg_min(self.degree, degree),
        )
    }

    pub fn truncate(&self, prec: &Precision) -> Series {
        self.with_cutoffs(&ExtRational::Finite(prec.energy.clone()), Some(prec.degree))
    }

    /// Forgets both cutoffs.
    pub fn to_exact(&self) -> Series {
        Series {
            ambient: self.ambient.clone(),
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c.to_exact())).collect(),
            energy: ExtRational::Infinite,
            degree: None,
        }
    }

    /// The same series viewed in a larger ambient set.
    pub fn extend_ambient(&self, extra: &Ambient) -> Series {
        let mut s = self.clone();
        s.ambient.extend(extra.iter().cloned());
        s
    }

    /// The same series in another ambient set containing all used variables.
    pub fn with_ambient(&self, ambient: &Ambient) -> Result<Series, SeriesError> {
        if let Some(v) = self.vars_used().into_iter().find(|v| !ambient.contains(v)) {
            return Err(SeriesError::UnknownVariable(v));
        }
        let mut s = self.clone();
        s.ambient = ambient.clone();
        Ok(s)
    }

    fn check_ambient(&self, other: &Series) -> Result<(), SeriesError> {
        if self.ambient != other.ambient {
            return Err(SeriesError::VariableMismatch {
                left: self.ambient.iter().cloned().collect(),
                right: other.ambient.iter().cloned().collect(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Series) -> Result<Series, SeriesError> {
        self.check_ambient(other)?;
        Ok(Series::build(
            self.ambient.clone(),
            self.terms
                .iter()
                .chain(other.terms.iter())
                .map(|(m, c)| (m.clone(), c.clone())),
            ext_min(&self.energy, &other.energy),
            deg_min(self.degree, other.degree),
        ))
    }

    pub fn neg(&self) -> Series {
        Series {
            ambient: self.ambient.clone(),
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c.neg())).collect(),
            energy: self.energy.clone(),
            degree: self.degree,
        }
    }

    pub fn sub(&self, other: &Series) -> Result<Series, SeriesError> {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Series) -> Result<Series, SeriesError> {
        self.check_ambient(other)?;
        let (ea, eb) = (&self.energy, &other.energy);
        let energy = ExtRational::min_of(
            [
                ea.clone(),
                eb.clone(),
                ea.plus(&ext_min(&other.val(), eb)),
                eb.plus(&ext_min(&self.val(), ea)),
            ]
            .iter(),
        );
        let (da, db) = (self.degree, other.degree);
        let degree = [
            da,
            db,
            deg_plus(da, deg_min(other.min_degree(), db)),
            deg_plus(db, deg_min(self.min_degree(), da)),
        ]
        .into_iter()
        .fold(None, deg_min);
        let mut products = Vec::new();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let m = ma.mul(mb);
                if degree.is_some_and(|d| m.degree() >= d) {
                    continue;
                }
                products.push((m, ca.mul(cb).truncate_ext(&energy)));
            }
        }
        Ok(Series::build(self.ambient.clone(), products, energy, degree))
    }

    /// Product with a scalar.
    pub fn scale(&self, c: &Novikov) -> Series {
        self.mul(&Series::constant(&self.ambient, c.clone()))
            .expect("same ambient")
    }

    /// Integer power; negative powers go through [`Series::invert`].
    pub fn pow(&self, n: i64, prec: &Precision) -> Result<Series, SeriesError> {
        if n < 0 {
            return self.invert(prec)?.pow(-n, prec);
        }
        let mut acc = Series::one(&self.ambient);
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base)?;
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base)?;
            }
        }
        Ok(acc)
    }

    /// Multiplicative inverse.
    ///
    /// The series must have a unique leading atom `a = c·T^v·m` (least
    /// valuation, then least degree) such that `s/a − 1` either has only
    /// positive-valuation terms (expanded by energy) or only terms of
    /// nonnegative valuation and degree (expanded by energy and degree).
    /// Single-atom series invert exactly.
    pub fn invert(&self, prec: &Precision) -> Result<Series, SeriesError> {
        let not_invertible = || SeriesError::NotInvertible(self.to_string());
        let atoms = self.atoms();
        let key = |a: &Atom| (a.exp.clone(), a.monomial.degree());
        let lead = atoms.iter().min_by_key(|a| key(a)).ok_or_else(not_invertible)?;
        if atoms.iter().filter(|a| key(a) == key(lead)).count() > 1 {
            return Err(not_invertible());
        }
        let lead_inv = Series::build(
            self.ambient.clone(),
            [(
                lead.monomial.pow(-1),
                Novikov::monomial(lead.coeff.inverse().expect("nonzero"), -&lead.exp),
            )],
            ExtRational::Infinite,
            None,
        );
        let one = Series::one(&self.ambient);
        let r = self.mul(&lead_inv)?.sub(&one)?;
        let zero = Rational::zero();
        let r_atoms = r.atoms();
        let energy_mode = r_atoms.iter().all(|a| a.exp > zero);
        let degree_mode = r_atoms.iter().all(|a| a.exp >= zero && a.monomial.degree() >= 0);
        if !energy_mode && !degree_mode {
            return Err(not_invertible());
        }
        let energy_bound = if r_atoms.iter().any(|a| a.exp > zero) {
            ExtRational::Finite(&prec.energy + &lead.exp)
        } else {
            ExtRational::Infinite
        };
        let degree_bound = if energy_mode { None } else { Some(prec.degree + lead.monomial.degree()) };
        let neg_r = r.with_cutoffs(&energy_bound, degree_bound).neg();
        let mut sum = one.with_cutoffs(neg_r.energy_cutoff(), neg_r.degree_cutoff());
        let mut power = sum.clone();
        loop {
            power = power.mul(&neg_r)?;
            if power.is_zero() {
                break;
            }
            sum = sum.add(&power)?;
        }
        sum.mul(&lead_inv)
    }

    /// Equality modulo the common cutoffs.
    pub fn eq_mod(&self, other: &Series) -> bool {
        let all: Ambient = self.ambient.union(&other.ambient).cloned().collect();
        let a = self.extend_ambient(&all);
        let b = other.extend_ambient(&all);
        a.sub(&b).map(|d| d.is_zero()).unwrap_or(false)
    }

    /// The value without cutoffs, in the expression syntax.
    pub fn value_string(&self) -> String {
        join_sum(self.terms.iter().map(|(m, c)| {
            let mono = if m.is_one() { String::new() } else { m.to_string() };
            if let [(e, a)] = c.terms() {
                let rest = match (e.is_zero(), mono.is_empty()) {
                    (true, _) => mono,
                    (false, true) => format_t_power(e),
                    (false, false) => format!("{}*{mono}", format_t_power(e)),
                };
                format_scaled(a, &rest)
            } else if mono.is_empty() {
                format!("({})", c.value_string())
            } else {
                format!("({})*{mono}", c.value_string())
            }
        }))
    }
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if !self.is_zero() || (self.energy.is_infinite() && self.degree.is_none()) {
            parts.push(self.value_string());
        }
        if let ExtRational::Finite(e) = &self.energy {
            parts.push(format!("O({})", format_t_power(e)));
        }
        if let Some(d) = self.degree {
            parts.push(format!("O(deg^{d})"));
        }
        write!(f, "{}", parts.join(" + "))
    }
}

impl fmt::Debug for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Series[{}]({self})", self.ambient.iter().cloned().collect::<Vec<_>>().join(","))
    }
}

#[derive(Serialize)]
struct TermOut<'a> {
    monomial: &'a Monomial,
    coeff: &'a Novikov,
}

impl Serialize for Series {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let terms: Vec<TermOut> = self
            .terms
            .iter()
            .map(|(m, c)| TermOut { monomial: m, coeff: c })
            .collect();
        if self.is_exact() {
            return terms.serialize(s);
        }
        let mut st = s.serialize_struct("Series", 3)?;
        st.serialize_field("terms", &terms)?;
        st.serialize_field("energy_cutoff", &self.energy)?;
        match self.degree {
            Some(d) => st.serialize_field("degree_cutoff", &d)?,
            None => st.serialize_field("degree_cutoff", "inf")?,
        }
        st.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xyz() -> Ambient {
        ambient(["x", "y", "z"])
    }

    fn v(a: &Ambient, n: &str) -> Series {
        Series::var(a, n).unwrap()
    }

    #[test]
    fn associativity_example() {
        let a = xyz();
        let lhs = v(&a, "x").mul(&v(&a, "y").mul(&v(&a, "z")).unwrap()).unwrap();
        let m = Monomial::from_pairs([("x".into(), 1), ("y".into(), 1), ("z".into(), 1)]);
        assert_eq!(lhs, Series::monomial(&a, m, Novikov::one()).unwrap());
        assert_eq!(lhs.to_string(), "x*y*z");
    }

    #[test]
    fn mismatched_ambients_rejected() {
        let a = v(&ambient(["x"]), "x");
        let b = v(&ambient(["y"]), "y");
        assert!(matches!(a.add(&b), Err(SeriesError::VariableMismatch { .. })));
    }

    #[test]
    fn unit_inverse_by_degree() {
        let a = ambient(["x"]);
        let s = v(&a, "x").add(&Series::one(&a)).unwrap();
        let inv = s.invert(&Precision::new(Rational::from_integer(5), 4)).unwrap();
        assert_eq!(inv.to_string(), "1 - x + x^2 - x^3 + O(deg^4)");
        assert!(inv.energy_cutoff().is_infinite());
        assert!(s.mul(&inv).unwrap().eq_mod(&Series::one(&a)));
    }

    #[test]
    fn inverse_by_energy_with_laurent_terms() {
        let a = ambient(["x"]);
        let tx = Series::monomial(&a, Monomial::var("x").pow(-1), Novikov::t_power(Rational::one())).unwrap();
        let s = Series::one(&a).add(&tx).unwrap();
        let inv = s.invert(&Precision::new(Rational::from_integer(3), 8)).unwrap();
        assert_eq!(inv.to_string(), "T^2*x^-2 - T*x^-1 + 1 + O(T^3)");
        assert!(s.mul(&inv).unwrap().eq_mod(&Series::one(&a)));
    }

    #[test]
    fn mixed_directions_not_invertible() {
        let a = ambient(["x", "y"]);
        let ty = Series::monomial(&a, Monomial::var("y").pow(-1), Novikov::t_power(Rational::one())).unwrap();
        let s = Series::one(&a).add(&v(&a, "x")).unwrap().add(&ty).unwrap();
        assert!(matches!(s.invert(&Precision::default()), Err(SeriesError::NotInvertible(_))));
        let s = v(&a, "x").add(&v(&a, "y")).unwrap();
        assert!(s.invert(&Precision::default()).is_err());
    }

    #[test]
    fn exact_serialization_is_term_list() {
        let a = ambient(["x"]);
        let s = v(&a, "x");
        assert_eq!(
            serde_json::to_string(&s).unwrap(),
            r#"[{"monomial":{"x":1},"coeff":{"terms":[{"exp":"0","re":"1","im":"0"}],"cutoff":"inf"}}]"#
        );
    }
}
