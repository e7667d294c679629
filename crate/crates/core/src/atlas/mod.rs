//! Charts with valuation domains and potentials, transition maps between
//! them, and validators for gluing data.

pub mod domain;
pub mod feasibility;
mod transition;

use std::collections::BTreeMap;

use serde::Serialize;

pub use domain::{Domain, Relation, ValuationConstraint};
pub use feasibility::{conjunction_feasible, domain_feasible, Feasibility};
pub use transition::{
    check_potential_match, compose, effective_overlap, overlap_intersection, transport_point,
    verify_cocycle, CocycleReport, CocycleStatus, Composite, PotentialReport, Regime,
    TransportReport,
};

use crate::expr::Params;
use crate::multiseries::{Ambient, Series, SeriesError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AtlasError {
    #[error("unknown chart `{0}`")]
    UnknownChart(String),
    #[error("unknown transition `{0}`")]
    UnknownTransition(String),
    #[error("transition `{0}` has no declared inverse")]
    NoInverse(String),
    #[error("cannot chain `{first}` into `{second}`: chart `{found}` follows chart `{expected}`")]
    ChartMismatch { first: String, second: String, expected: String, found: String },
    #[error("loop starts at chart `{start}` but ends at chart `{end}`")]
    NotACycle { start: String, end: String },
    #[error("empty loop")]
    EmptyLoop,
    #[error("point lies outside the overlap: {constraint} fails")]
    OutsideOverlap { constraint: String },
    #[error("invalid atlas: {0}")]
    Invalid(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub name: String,
    pub vars: Vec<String>,
    /// The honest region; points outside it are pseudo-deformations.
    pub domain: Domain,
    pub potential: Series,
}

impl Chart {
    pub fn ambient(&self) -> Ambient {
        self.vars.iter().cloned().collect()
    }
}

/// Inverse map `source var ↦ series in target vars` with its own overlap.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseMap {
    pub map: BTreeMap<String, Series>,
    pub overlap: Domain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub id: String,
    pub src: String,
    pub dst: String,
    /// Constraints on source variables where the map is used.
    pub overlap: Domain,
    /// `target var ↦ series in source vars`.
    pub map: BTreeMap<String, Series>,
    pub inverse: Option<InverseMap>,
}

impl Transition {
    /// The identity transition of a chart.
    pub fn identity(chart: &Chart) -> Transition {
        let amb = chart.ambient();
        let map: BTreeMap<String, Series> = chart
            .vars
            .iter()
            .map(|v| (v.clone(), Series::var(&amb, v).expect("chart variable")))
            .collect();
        Transition {
            id: format!("id_{}", chart.name),
            src: chart.name.clone(),
            dst: chart.name.clone(),
            overlap: Domain::everything(),
            map: map.clone(),
            inverse: Some(InverseMap { map, overlap: Domain::everything() }),
        }
    }

    /// The declared inverse as a transition in the opposite direction.
    pub fn inverted(&self) -> Result<Transition, AtlasError> {
        let inv = self.inverse.as_ref().ok_or_else(|| AtlasError::NoInverse(self.id.clone()))?;
        Ok(Transition {
            id: format!("{}^-1", self.id),
            src: self.dst.clone(),
            dst: self.src.clone(),
            overlap: inv.overlap.clone(),
            map: inv.map.clone(),
            inverse: Some(InverseMap { map: self.map.clone(), overlap: self.overlap.clone() }),
        })
    }
}

/// One step of a loop: a transition, possibly traversed through its inverse.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoopStep {
    pub id: String,
    pub inverse: bool,
}

impl LoopStep {
    /// Parses `id` or `id^-1`.
    pub fn parse(text: &str) -> LoopStep {
        match text.strip_suffix("^-1") {
            Some(id) => LoopStep { id: id.trim().to_string(), inverse: true },
            None => LoopStep { id: text.trim().to_string(), inverse: false },
        }
    }
}

impl std::fmt::Display for LoopStep {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.inverse {
            write!(f, "{}^-1", self.id)
        } else {
            write!(f, "{}", self.id)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atlas {
    pub params: Params,
    pub charts: Vec<Chart>,
    pub transitions: Vec<Transition>,
    pub loops: Vec<Vec<LoopStep>>,
}

impl Atlas {
    /// Builds an atlas, checking that transitions connect existing charts,
    /// that maps assign every target variable with series in the source
    /// variables, and that domains only mention chart variables.
    pub fn new(
        params: Params,
        charts: Vec<Chart>,
        transitions: Vec<Transition>,
        loops: Vec<Vec<LoopStep>>,
    ) -> Result<Atlas, AtlasError> {
        let atlas = Atlas { params, charts, transitions, loops };
        atlas.validate()?;
        Ok(atlas)
    }

    fn validate(&self) -> Result<(), AtlasError> {
        let invalid = |m: String| Err(AtlasError::Invalid(m));
        for c in &self.charts {
            if let Some(v) = c.domain.vars().into_iter().find(|v| !c.vars.contains(v)) {
                return invalid(format!("domain of chart `{}` mentions `{v}`", c.name));
            }
            if c.potential.ambient() != &c.ambient() {
                return invalid(format!("potential of chart `{}` uses other variables", c.name));
            }
        }
        for t in &self.transitions {
            let src = self.chart(&t.src)?;
            let dst = self.chart(&t.dst)?;
            check_map(&t.id, &t.map, src, dst)?;
            if let Some(v) = t.overlap.vars().into_iter().find(|v| !src.vars.contains(v)) {
                return invalid(format!("overlap of `{}` mentions `{v}`", t.id));
            }
            if let Some(inv) = &t.inverse {
                check_map(&format!("{}^-1", t.id), &inv.map, dst, src)?;
            }
        }
        for l in &self.loops {
            for step in l {
                self.step(step)?;
            }
        }
        Ok(())
    }

    pub fn chart(&self, name: &str) -> Result<&Chart, AtlasError> {
        self.charts
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| AtlasError::UnknownChart(name.to_string()))
    }

    pub fn transition(&self, id: &str) -> Result<&Transition, AtlasError> {
        self.transitions
            .iter()
            .find(|t| t.id == id)
            .ok_or_else(|| AtlasError::UnknownTransition(id.to_string()))
    }

    /// Resolves `id` or `id^-1`.
    pub fn step(&self, step: &LoopStep) -> Result<Transition, AtlasError> {
        let t = self.transition(&step.id)?;
        if step.inverse {
            t.inverted()
        } else {
            Ok(t.clone())
        }
    }
}

fn check_map(
    id: &str,
    map: &BTreeMap<String, Series>,
    src: &Chart,
    dst: &Chart,
) -> Result<(), AtlasError> {
    let amb = src.ambient();
    for v in &dst.vars {
        if !map.contains_key(v) {
            return Err(AtlasError::Invalid(format!("map `{id}` does not assign `{v}`")));
        }
    }
    for (w, s) in map {
        if !dst.vars.contains(w) {
            return Err(AtlasError::Invalid(format!("map `{id}` assigns unknown variable `{w}`")));
        }
        if s.ambient() != &amb {
            return Err(AtlasError::Invalid(format!(
                "image of `{w}` under `{id}` is not a series in the variables of `{}`",
                src.name
            )));
        }
    }
    Ok(())
}
