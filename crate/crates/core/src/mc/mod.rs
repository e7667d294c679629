//! Deformed A∞ operations evaluated from finite lists of polygon records.
//!
//! Each [`DiscContribution`] records one rigid polygon: its corner word, output
//! generator, area, sign and gauge-hypertorus crossings. Corners that are
//! deformation generators absorb the deformation variable; in noncommutative
//! mode those variables form a word read from the last corner to the first.

mod ops;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use ops::{
    apply_relations, check_isomorphism_pair, classify_obstruction, deformed_operation,
    m0_deformed, m1_between, solve_cocycle, CocycleSolution, Composition, CompositionReport,
    IsomorphismReport, Obstruction, SolvedRelation,
};

use crate::multiseries::{Ambient, Series, SeriesError};
use crate::novikov::Rational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum McError {
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("contribution {index}: {message}")]
    InvalidContribution { index: usize, message: String },
    #[error("invalid disc data: {0}")]
    Invalid(String),
    #[error("cannot solve for `{unknown}`: {reason}")]
    NotSolvable { unknown: String, reason: String },
    #[error(transparent)]
    Series(#[from] SeriesError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    Unit,
    PointClass,
    Immersed,
    Intersection,
    Morse,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    pub name: String,
    pub parity: Parity,
    pub kind: GeneratorKind,
    /// Object (decorated Lagrangian or pair) the generator belongs to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HolonomyFactor {
    pub var: String,
    pub power: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiscContribution {
    pub corners: Vec<String>,
    pub output: String,
    pub area: Rational,
    pub sign: i64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub holonomy: Vec<HolonomyFactor>,
    /// Constant polygons are the only ones allowed zero area.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub constant: bool,
}

impl DiscContribution {
    pub fn arity(&self) -> usize {
        self.corners.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscData {
    pub generators: Vec<Generator>,
    /// Deformation generator ↦ formal variable.
    pub deformation: BTreeMap<String, String>,
    pub commutative: bool,
    /// Areas were normalized into the coordinates, so non-constant polygons may have area 0.
    pub normalized_areas: bool,
    /// Extra ambient variables beyond deformation and holonomy variables.
    pub variables: Vec<String>,
    pub contributions: Vec<DiscContribution>,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub object_pairs: serde_json::Value,
}

impl DiscData {
    /// Validates generator references, areas, signs, parities and holonomy powers.
    pub fn new(
        generators: Vec<Generator>,
        deformation: BTreeMap<String, String>,
        commutative: bool,
        normalized_areas: bool,
        variables: Vec<String>,
        contributions: Vec<DiscContribution>,
        object_pairs: serde_json::Value,
    ) -> Result<DiscData, McError> {
        let data = DiscData {
            generators,
            deformation,
            commutative,
            normalized_areas,
            variables,
            contributions,
            object_pairs,
        };
        data.validate()?;
        Ok(data)
    }

    fn validate(&self) -> Result<(), McError> {
        let mut names = BTreeSet::new();
        let mut singletons = BTreeSet::new();
        for g in &self.generators {
            if !names.insert(g.name.as_str()) {
                return Err(McError::Invalid(format!("generator `{}` declared twice", g.name)));
            }
            if matches!(g.kind, GeneratorKind::Unit | GeneratorKind::PointClass)
                && !singletons.insert((g.kind as u8, g.object.clone()))
            {
                return Err(McError::Invalid(format!(
                    "second {:?} generator `{}` on the same object",
                    g.kind, g.name
                )));
            }
        }
        let mut vars = BTreeSet::new();
        for (g, v) in &self.deformation {
            let gen = self.generator(g)?;
            if gen.parity != Parity::Odd {
                return Err(McError::Invalid(format!("deformation generator `{g}` is not odd")));
            }
            if !vars.insert(v) {
                return Err(McError::Invalid(format!("variable `{v}` deforms two generators")));
            }
        }
        for (index, c) in self.contributions.iter().enumerate() {
            let bad = |message: String| Err(McError::InvalidContribution { index, message });
            for g in c.corners.iter().chain([&c.output]) {
                self.generator(g)?;
            }
            if c.sign != 1 && c.sign != -1 {
                return bad(format!("sign {} is not ±1", c.sign));
            }
            if c.area.is_negative() {
                return bad(format!("negative area {}", c.area));
            }
            if c.area.is_zero() && !c.constant && !self.normalized_areas {
                return bad("zero area on a non-constant polygon".into());
            }
            if let Some(h) = c.holonomy.iter().find(|h| h.power == 0) {
                return bad(format!("zero crossing count for `{}`", h.var));
            }
        }
        Ok(())
    }

    pub fn generator(&self, name: &str) -> Result<&Generator, McError> {
        self.generators
            .iter()
            .find(|g| g.name == name)
            .ok_or_else(|| McError::UnknownGenerator(name.to_string()))
    }

    /// Deformation, holonomy and declared extra variables.
    pub fn ambient(&self) -> Ambient {
        self.deformation
            .values()
            .cloned()
            .chain(self.contributions.iter().flat_map(|c| c.holonomy.iter().map(|h| h.var.clone())))
            .chain(self.variables.iter().cloned())
            .collect()
    }

    /// A copy without the contributions at the given indices.
    pub fn without(&self, indices: &[usize]) -> DiscData {
        let mut d = self.clone();
        d.contributions = self
            .contributions
            .iter()
            .enumerate()
            .filter(|(i, _)| !indices.contains(i))
            .map(|(_, c)| c.clone())
            .collect();
        d
    }
}

/// A series in noncommuting deformation letters with coefficients in the
/// commuting variables. In commutative mode every word is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct WordSeries {
    ambient: Ambient,
    terms: BTreeMap<Vec<String>, Series>,
}

impl WordSeries {
    pub fn zero(ambient: &Ambient) -> Self {
        WordSeries { ambient: ambient.clone(), terms: BTreeMap::new() }
    }

    pub fn from_series(s: Series) -> Self {
        let mut w = WordSeries::zero(s.ambient());
        w.add_term(Vec::new(), &s).expect("same ambient");
        w
    }

    pub fn add_term(&mut self, word: Vec<String>, coeff: &Series) -> Result<(), SeriesError> {
        let sum = match self.terms.get(&word) {
            Some(s) => s.add(coeff)?,
            None => coeff.with_ambient(&self.ambient)?,
        };
        if sum.is_zero() {
            self.terms.remove(&word);
        } else {
            self.terms.insert(word, sum);
        }
        Ok(())
    }

    pub fn add(&self, other: &WordSeries) -> Result<WordSeries, SeriesError> {
        let mut out = self.clone();
        for (w, s) in &other.terms {
            out.add_term(w.clone(), s)?;
        }
        Ok(out)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &BTreeMap<Vec<String>, Series> {
        &self.terms
    }

    pub fn ambient(&self) -> &Ambient {
        &self.ambient
    }

    /// The commutative series, when no letters remain.
    pub fn as_series(&self) -> Option<Series> {
        match self.terms.len() {
            0 => Some(Series::zero(&self.ambient)),
            1 => self.terms.get(&Vec::new()).cloned(),
            _ => None,
        }
    }

    pub fn map_coefficients(
        &self,
        f: impl Fn(&Series) -> Result<Series, SeriesError>,
    ) -> Result<WordSeries, SeriesError> {
        let mut out = WordSeries::zero(&self.ambient);
        for (w, s) in &self.terms {
            out.add_term(w.clone(), &f(s)?)?;
        }
        Ok(out)
    }
}

impl fmt::Display for WordSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(w, s)| {
                if w.is_empty() {
                    return s.to_string();
                }
                let word = format!("<{}>", w.join(" "));
                match s.single_term() {
                    Some((m, c)) if m.is_one() && c.to_string() == "1" => word,
                    Some((m, c)) if m.is_one() && c.to_string() == "-1" => format!("-{word}"),
                    _ => format!("({s})*{word}"),
                }
            })
            .collect();
        write!(f, "{}", crate::novikov::join_sum(parts))
    }
}

#[derive(Serialize)]
struct WordTerm<'a> {
    word: &'a [String],
    coeff: &'a Series,
}

impl Serialize for WordSeries {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.as_series() {
            Some(series) => series.serialize(s),
            None => self
                .terms
                .iter()
                .map(|(w, c)| WordTerm { word: w, coeff: c })
                .collect::<Vec<_>>()
                .serialize(s),
        }
    }
}

/// Generator ↦ nonzero output component.
pub type McOutput = BTreeMap<String, WordSeries>;
