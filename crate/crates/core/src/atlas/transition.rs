use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::domain::{Domain, ValuationConstraint};
use super::feasibility::{domain_feasible, Feasibility};
use super::{Atlas, AtlasError, InverseMap, LoopStep, Transition};
use crate::multiseries::{Ambient, Precision, Series};
use crate::novikov::Novikov;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialReport {
    pub transition: String,
    pub ok: bool,
    /// `W_src − W_dst ∘ map`.
    pub residual: Series,
}

/// Compares the source potential with the pulled-back target potential.
pub fn check_potential_match(
    atlas: &Atlas,
    t: &Transition,
    prec: &Precision,
) -> Result<PotentialReport, AtlasError> {
    let src = atlas.chart(&t.src)?;
    let dst = atlas.chart(&t.dst)?;
    let pulled = dst.potential.substitute(&t.map, &src.ambient(), prec)?;
    let residual = src.potential.sub(&pulled)?;
    Ok(PotentialReport { transition: t.id.clone(), ok: residual.is_zero(), residual })
}

/// A composed transition. `approximate` is set when a constraint could not
/// be pulled back exactly because its variable maps to a non-monomial.
#[derive(Debug, Clone, PartialEq)]
pub struct Composite {
    pub transition: Transition,
    pub approximate: bool,
}

fn substitute_map(
    outer: &BTreeMap<String, Series>,
    inner: &BTreeMap<String, Series>,
    ambient: &Ambient,
    prec: &Precision,
) -> Result<BTreeMap<String, Series>, AtlasError> {
    outer
        .iter()
        .map(|(w, s)| Ok((w.clone(), s.substitute(inner, ambient, prec)?)))
        .collect()
}

/// `t1` followed by `t2`: the map is `t2.map ∘ t1.map` and the overlap is
/// `t1.overlap` intersected with the pullback of `t2.overlap`.
pub fn compose(
    atlas: &Atlas,
    t1: &Transition,
    t2: &Transition,
    prec: &Precision,
) -> Result<Composite, AtlasError> {
    if t1.dst != t2.src {
        return Err(AtlasError::ChartMismatch {
            first: t1.id.clone(),
            second: t2.id.clone(),
            expected: t1.dst.clone(),
            found: t2.src.clone(),
        });
    }
    let amb1 = atlas.chart(&t1.src)?.ambient();
    let map = substitute_map(&t2.map, &t1.map, &amb1, prec)?;
    let (pulled, approximate) = t2.overlap.pullback(&t1.map);
    let overlap = t1.overlap.and(&pulled);
    let inverse = match (&t1.inverse, &t2.inverse) {
        (Some(i1), Some(i2)) => {
            let amb3 = atlas.chart(&t2.dst)?.ambient();
            substitute_map(&i1.map, &i2.map, &amb3, prec).ok().map(|map| InverseMap {
                map,
                overlap: i2.overlap.and(&i1.overlap.pullback(&i2.map).0),
            })
        }
        _ => None,
    };
    Ok(Composite {
        transition: Transition {
            id: format!("{}.{}", t1.id, t2.id),
            src: t1.src.clone(),
            dst: t2.dst.clone(),
            overlap,
            map,
            inverse,
        },
        approximate,
    })
}

/// Source domain ∧ declared overlap ∧ pullback of the target domain.
pub fn effective_overlap(atlas: &Atlas, t: &Transition) -> Result<(Domain, bool), AtlasError> {
    let src = atlas.chart(&t.src)?;
    let dst = atlas.chart(&t.dst)?;
    let (pulled, approximate) = dst.domain.pullback(&t.map);
    Ok((src.domain.and(&t.overlap).and(&pulled), approximate))
}

/// Intersection of the effective overlaps of transitions leaving one chart.
pub fn overlap_intersection(atlas: &Atlas, steps: &[LoopStep]) -> Result<(Domain, bool), AtlasError> {
    let mut acc: Option<(String, Domain, bool)> = None;
    for step in steps {
        let t = atlas.step(step)?;
        let (d, approx) = effective_overlap(atlas, &t)?;
        acc = Some(match acc {
            None => (t.src.clone(), d, approx),
            Some((src, _, _)) if src != t.src => {
                return Err(AtlasError::ChartMismatch {
                    first: steps[0].to_string(),
                    second: t.id.clone(),
                    expected: src,
                    found: t.src.clone(),
                })
            }
            Some((src, acc_d, acc_a)) => (src, acc_d.and(&d), acc_a || approx),
        });
    }
    let (_, d, a) = acc.ok_or(AtlasError::EmptyLoop)?;
    Ok((d, a))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CocycleStatus {
    Identity,
    Failed,
    EmptyOverlap,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CocycleReport {
    pub steps: Vec<String>,
    pub chart: String,
    pub status: CocycleStatus,
    /// `composite(v) − v` for every chart variable.
    pub residuals: BTreeMap<String, Series>,
    pub composite: BTreeMap<String, Series>,
    /// Common overlap of the declared gluing regions, pseudo-deformations included.
    pub overlap: String,
    pub feasibility: Feasibility,
    /// Whether some point keeps every chart of the loop in its honest domain.
    pub honest_feasibility: Feasibility,
    pub approximate: bool,
}

/// Composes a loop of transitions and compares the result with the identity.
///
/// The loop is judged on the common overlap of its declared gluing regions,
/// where pseudo-deformations are allowed; the intersection with the honest
/// chart domains is reported separately and may be empty.
pub fn verify_cocycle(
    atlas: &Atlas,
    steps: &[LoopStep],
    prec: &Precision,
) -> Result<CocycleReport, AtlasError> {
    let transitions = steps.iter().map(|s| atlas.step(s)).collect::<Result<Vec<_>, _>>()?;
    let first = transitions.first().ok_or(AtlasError::EmptyLoop)?;
    let last = transitions.last().expect("nonempty");
    for pair in transitions.windows(2) {
        if pair[0].dst != pair[1].src {
            return Err(AtlasError::ChartMismatch {
                first: pair[0].id.clone(),
                second: pair[1].id.clone(),
                expected: pair[0].dst.clone(),
                found: pair[1].src.clone(),
            });
        }
    }
    if last.dst != first.src {
        return Err(AtlasError::NotACycle { start: first.src.clone(), end: last.dst.clone() });
    }
    let mut acc = first.clone();
    let mut approximate = false;
    let (mut honest, approx) = effective_overlap(atlas, first)?;
    approximate |= approx;
    for t in &transitions[1..] {
        let (effective, approx) = effective_overlap(atlas, t)?;
        let (pulled, approx_pull) = effective.pullback(&acc.map);
        honest = honest.and(&pulled);
        let c = compose(atlas, &acc, t, prec)?;
        approximate |= approx || approx_pull || c.approximate;
        acc = c.transition;
    }
    let chart = atlas.chart(&first.src)?;
    let amb = chart.ambient();
    let mut residuals = BTreeMap::new();
    for v in &chart.vars {
        let r = acc.map[v].sub(&Series::var(&amb, v)?)?;
        residuals.insert(v.clone(), r);
    }
    let feasibility = domain_feasible(&acc.overlap);
    let status = if !feasibility.is_feasible() {
        CocycleStatus::EmptyOverlap
    } else if residuals.values().all(Series::is_zero) {
        CocycleStatus::Identity
    } else {
        CocycleStatus::Failed
    };
    Ok(CocycleReport {
        steps: steps.iter().map(|s| s.to_string()).collect(),
        chart: chart.name.clone(),
        status,
        residuals,
        composite: acc.map,
        overlap: acc.overlap.to_string(),
        feasibility,
        honest_feasibility: domain_feasible(&honest),
        approximate,
    })
}

/// Whether a point and its image both lie in their charts' honest domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Honest,
    Pseudo,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportReport {
    pub transition: String,
    pub image: BTreeMap<String, Novikov>,
    pub regime: Regime,
}

/// Evaluates a transition map at a point of its overlap.
pub fn transport_point(
    atlas: &Atlas,
    t: &Transition,
    point: &BTreeMap<String, Novikov>,
    prec: &Precision,
) -> Result<TransportReport, AtlasError> {
    let src = atlas.chart(&t.src)?;
    let dst = atlas.chart(&t.dst)?;
    t.overlap
        .check_point(point)
        .map_err(|c| AtlasError::OutsideOverlap { constraint: c.to_string() })?;
    for image in t.map.values() {
        for m in image.terms().keys() {
            for (v, e) in m.exponents() {
                if e < 0 && point.get(v).is_some_and(Novikov::is_zero) {
                    return Err(AtlasError::OutsideOverlap {
                        constraint: ValuationConstraint::nonzero(v).to_string(),
                    });
                }
            }
        }
    }
    let image = t
        .map
        .iter()
        .map(|(w, s)| Ok((w.clone(), s.evaluate(point, prec)?)))
        .collect::<Result<BTreeMap<_, _>, AtlasError>>()?;
    let regime = if src.domain.contains(point) && dst.domain.contains(&image) {
        Regime::Honest
    } else {
        Regime::Pseudo
    };
    Ok(TransportReport { transition: t.id.clone(), image, regime })
}
