use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{DiscContribution, DiscData, GeneratorKind, McError, McOutput, WordSeries};
use crate::multiseries::{Monomial, Precision, Series, SeriesError};
use crate::novikov::{GaussRational, Novikov};

/// Ways to place the input slots at increasing corner positions, with every
/// other corner a deformation generator.
fn placements(c: &DiscContribution, data: &DiscData, inputs: &[Vec<String>]) -> Vec<Vec<usize>> {
    fn go(
        c: &DiscContribution,
        data: &DiscData,
        inputs: &[Vec<String>],
        start: usize,
        chosen: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        let slot = chosen.len();
        if slot == inputs.len() {
            let rest_ok = (start..c.corners.len()).all(|i| data.deformation.contains_key(&c.corners[i]));
            if rest_ok {
                out.push(chosen.clone());
            }
            return;
        }
        for p in start..c.corners.len() {
            if inputs[slot].contains(&c.corners[p]) {
                chosen.push(p);
                go(c, data, inputs, p + 1, chosen, out);
                chosen.pop();
            }
            if !data.deformation.contains_key(&c.corners[p]) {
                break;
            }
        }
    }
    let mut out = Vec::new();
    go(c, data, inputs, 0, &mut Vec::new(), &mut out);
    out
}

/// `m_k` with `b` inserted at every deformation corner and the given input
/// slots (each a formal sum of generators with coefficient 1) at the others.
pub fn deformed_operation(data: &DiscData, inputs: &[Vec<String>]) -> Result<McOutput, McError> {
    let amb = data.ambient();
    let mut out: McOutput = BTreeMap::new();
    for c in &data.contributions {
        for placement in placements(c, data, inputs) {
            let letters: Vec<String> = c
                .corners
                .iter()
                .enumerate()
                .rev()
                .filter(|(i, _)| !placement.contains(i))
                .map(|(_, g)| data.deformation[g].clone())
                .collect();
            let mut central = Monomial::from_pairs(c.holonomy.iter().map(|h| (h.var.clone(), h.power)));
            let word = if data.commutative {
                central = central.mul(&Monomial::from_pairs(letters.into_iter().map(|v| (v, 1))));
                Vec::new()
            } else {
                letters
            };
            let weight = Novikov::monomial(GaussRational::from_integer(c.sign), c.area.clone());
            let coeff = Series::monomial(&amb, central, weight)?;
            out.entry(c.output.clone())
                .or_insert_with(|| WordSeries::zero(&amb))
                .add_term(word, &coeff)?;
        }
    }
    out.retain(|_, w| !w.is_zero());
    Ok(out)
}

/// `m_0^b`: every corner carries `b`.
pub fn m0_deformed(data: &DiscData) -> Result<McOutput, McError> {
    deformed_operation(data, &[])
}

/// `m_1^{b,b'}(source)`: one input corner, deformation corners on either side.
pub fn m1_between(data: &DiscData, source: &str) -> Result<McOutput, McError> {
    data.generator(source)?;
    deformed_operation(data, &[vec![source.to_string()]])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Obstruction {
    Unobstructed,
    /// Only the unit component is nonzero; it is the potential.
    Weakly { unit: String, potential: WordSeries },
    Obstructed { offending: BTreeMap<String, WordSeries> },
}

pub fn classify_obstruction(data: &DiscData, m0: &McOutput) -> Result<Obstruction, McError> {
    if m0.is_empty() {
        return Ok(Obstruction::Unobstructed);
    }
    let mut offending = BTreeMap::new();
    let mut units = Vec::new();
    for (g, w) in m0 {
        if data.generator(g)?.kind == GeneratorKind::Unit {
            units.push((g.clone(), w.clone()));
        } else {
            offending.insert(g.clone(), w.clone());
        }
    }
    if offending.is_empty() && units.len() == 1 {
        let (unit, potential) = units.pop().expect("one unit");
        return Ok(Obstruction::Weakly { unit, potential });
    }
    offending.extend(units);
    Ok(Obstruction::Obstructed { offending })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolvedRelation {
    pub var: String,
    pub value: Series,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CocycleSolution {
    pub relations: Vec<SolvedRelation>,
    /// Equations left over after substitution; all zero for a consistent system.
    pub residual: BTreeMap<String, Series>,
}

/// Substitutes relation values for their variables, leaving other variables fixed.
pub fn apply_relations(
    s: &Series,
    relations: &[SolvedRelation],
    prec: &Precision,
) -> Result<Series, SeriesError> {
    let amb = s.ambient().clone();
    let mut sigma: BTreeMap<String, Series> = amb
        .iter()
        .map(|v| (v.clone(), Series::var(&amb, v).expect("ambient variable")))
        .collect();
    for r in relations {
        if amb.contains(&r.var) {
            sigma.insert(r.var.clone(), r.value.with_ambient(&amb)?);
        }
    }
    s.substitute(&sigma, &amb, prec)
}

/// Splits `s = a·v + c` when every exponent of `v` is 0 or 1.
fn affine_split(s: &Series, v: &str) -> Option<(Series, Series)> {
    let amb = s.ambient();
    let mut a = Vec::new();
    let mut c = Vec::new();
    for (m, coeff) in s.terms() {
        match m.exponent(v) {
            0 => c.push((m.clone(), coeff.clone())),
            1 => a.push((m.shifted(v, -1), coeff.clone())),
            _ => return None,
        }
    }
    if a.is_empty() {
        return None;
    }
    let e = s.energy_cutoff().clone();
    let d = s.degree_cutoff();
    Some((
        Series::from_terms(amb, a, e.clone(), d).ok()?,
        Series::from_terms(amb, c, e, d).ok()?,
    ))
}

/// Solves the equations `coeffs = 0` for the unknowns in order.
///
/// Each unknown is taken from the first remaining equation (in generator
/// order) that is affine in it with an invertible coefficient; the solution
/// is substituted into the remaining equations and, at the end, into the
/// earlier solutions.
pub fn solve_cocycle(
    coeffs: &BTreeMap<String, Series>,
    unknowns: &[String],
    prec: &Precision,
) -> Result<CocycleSolution, McError> {
    let mut eqs: BTreeMap<String, Series> =
        coeffs.iter().filter(|(_, s)| !s.is_zero()).map(|(g, s)| (g.clone(), s.clone())).collect();
    let mut relations: Vec<SolvedRelation> = Vec::new();
    for u in unknowns {
        if eqs.is_empty() {
            break;
        }
        let mut chosen = None;
        let mut reason = format!("no remaining equation involves `{u}`");
        for (g, s) in &eqs {
            if !s.vars_used().contains(u) {
                continue;
            }
            match affine_split(s, u) {
                None => reason = format!("equation `{g}` is not affine in `{u}`"),
                Some((a, c)) => match a.invert(prec) {
                    Ok(inv) => {
                        chosen = Some((g.clone(), c.mul(&inv)?.neg()));
                        break;
                    }
                    Err(_) => reason = format!("coefficient `{a}` in equation `{g}` is not invertible"),
                },
            }
        }
        let (g, value) = chosen.ok_or_else(|| McError::NotSolvable { unknown: u.clone(), reason })?;
        eqs.remove(&g);
        let rel = SolvedRelation { var: u.clone(), value };
        for s in eqs.values_mut() {
            *s = apply_relations(s, std::slice::from_ref(&rel), prec)?;
        }
        eqs.retain(|_, s| !s.is_zero());
        relations.push(rel);
    }
    for i in (0..relations.len()).rev() {
        let later = relations[i + 1..].to_vec();
        relations[i].value = apply_relations(&relations[i].value, &later, prec)?;
    }
    Ok(CocycleSolution { relations, residual: eqs })
}

/// An `m_2` composition expected to be a unit multiple of `target`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Composition {
    pub inputs: Vec<Vec<String>>,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompositionReport {
    pub target: String,
    pub ok: bool,
    /// `c·T^e` when the target component is a unit multiple.
    pub coefficient: Option<Novikov>,
    pub components: BTreeMap<String, WordSeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsomorphismReport {
    pub ok: bool,
    pub compositions: Vec<CompositionReport>,
}

fn unit_multiple(w: &WordSeries) -> Option<Novikov> {
    let s = w.as_series()?;
    let (m, c) = s.single_term()?;
    (m.is_one() && c.is_monomial()).then(|| c.clone())
}

/// Evaluates each composition under the relations and checks that it equals
/// an invertible scalar `c·T^e` times its target generator.
pub fn check_isomorphism_pair(
    data: &DiscData,
    compositions: &[Composition],
    relations: &[SolvedRelation],
    prec: &Precision,
) -> Result<IsomorphismReport, McError> {
    let mut reports = Vec::new();
    for comp in compositions {
        data.generator(&comp.target)?;
        let raw = deformed_operation(data, &comp.inputs)?;
        let mut components = BTreeMap::new();
        for (g, w) in raw {
            let w = w.map_coefficients(|s| apply_relations(s, relations, prec))?;
            if !w.is_zero() {
                components.insert(g, w);
            }
        }
        let coefficient = match components.len() {
            1 => components.get(&comp.target).and_then(unit_multiple),
            _ => None,
        };
        reports.push(CompositionReport {
            target: comp.target.clone(),
            ok: coefficient.is_some(),
            coefficient,
            components,
        });
    }
    Ok(IsomorphismReport { ok: reports.iter().all(|r| r.ok), compositions: reports })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_series, Params};
    use crate::mc::{Generator, HolonomyFactor, Parity};
    use crate::multiseries::ambient;
    use crate::novikov::Rational;

    fn gen(name: &str, parity: Parity, kind: GeneratorKind) -> Generator {
        Generator { name: name.into(), parity, kind, object: None }
    }

    fn disc(corners: &[&str], output: &str, area: i64, sign: i64, holonomy: &[(&str, i64)]) -> DiscContribution {
        DiscContribution {
            corners: corners.iter().map(|s| s.to_string()).collect(),
            output: output.into(),
            area: Rational::from_integer(area),
            sign,
            holonomy: holonomy.iter().map(|(v, p)| HolonomyFactor { var: v.to_string(), power: *p }).collect(),
            constant: false,
        }
    }

    /// Generators one, pt (even), U, V (odd, deformed by u, v), X (odd, not deformed).
    fn data(commutative: bool, contributions: Vec<DiscContribution>) -> DiscData {
        DiscData::new(
            vec![
                gen("one", Parity::Even, GeneratorKind::Unit),
                gen("pt", Parity::Even, GeneratorKind::PointClass),
                gen("U", Parity::Odd, GeneratorKind::Immersed),
                gen("V", Parity::Odd, GeneratorKind::Immersed),
                gen("X", Parity::Odd, GeneratorKind::Intersection),
            ],
            [("U", "u"), ("V", "v")].into_iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
            commutative,
            false,
            vec![],
            contributions,
            serde_json::Value::Null,
        )
        .unwrap()
    }

    fn series(text: &str, vars: &[&str]) -> Series {
        parse_series(text, &ambient(vars.iter().copied()), &Params::new(), &Precision::default()).unwrap()
    }

    #[test]
    fn words_read_from_last_corner_to_first() {
        let d = data(false, vec![disc(&["U", "V"], "pt", 1, 1, &[])]);
        let m0 = m0_deformed(&d).unwrap();
        let w = &m0["pt"];
        let (word, coeff) = w.terms().iter().next().unwrap();
        assert_eq!(word, &vec!["v".to_string(), "u".to_string()]);
        assert_eq!(coeff.to_string(), "T");
    }

    #[test]
    fn commutative_mode_folds_letters_and_holonomy() {
        let d = data(true, vec![disc(&["U", "V", "U"], "one", 2, -1, &[("t", -1)])]);
        let w = m0_deformed(&d).unwrap()["one"].as_series().unwrap();
        assert_eq!(w, series("-T^2*u^2*v*t^-1", &["u", "v", "t"]).with_ambient(w.ambient()).unwrap());
    }

    #[test]
    fn opposite_signs_cancel_only_when_commutative() {
        let polys = vec![disc(&["U", "V"], "pt", 1, 1, &[]), disc(&["V", "U"], "pt", 1, -1, &[])];
        assert_eq!(classify_obstruction(&data(true, polys.clone()), &m0_deformed(&data(true, polys.clone())).unwrap()).unwrap(), Obstruction::Unobstructed);
        let nc = data(false, polys);
        match classify_obstruction(&nc, &m0_deformed(&nc).unwrap()).unwrap() {
            Obstruction::Obstructed { offending } => assert_eq!(offending.keys().collect::<Vec<_>>(), ["pt"]),
            other => panic!("expected obstructed, got {other:?}"),
        }
    }

    #[test]
    fn m1_places_the_input_at_every_matching_corner() {
        // U at either corner of [U, U] can be the input; the other absorbs u.
        let d = data(true, vec![disc(&["U", "U"], "pt", 1, 1, &[])]);
        let w = m1_between(&d, "U").unwrap()["pt"].as_series().unwrap();
        assert_eq!(w, series("2*T*u", &["u", "v"]));
    }

    #[test]
    fn undeformed_corners_block_m0_but_feed_m1() {
        let d = data(true, vec![disc(&["U", "X", "V"], "pt", 1, 1, &[])]);
        assert!(m0_deformed(&d).unwrap().is_empty());
        let w = m1_between(&d, "X").unwrap()["pt"].as_series().unwrap();
        assert_eq!(w, series("T*u*v", &["u", "v"]));
        assert!(m1_between(&d, "Q").is_err());
    }

    #[test]
    fn weak_classification_needs_a_single_unit() {
        let d = data(true, vec![disc(&["U", "V"], "one", 1, 1, &[])]);
        match classify_obstruction(&d, &m0_deformed(&d).unwrap()).unwrap() {
            Obstruction::Weakly { unit, potential } => {
                assert_eq!(unit, "one");
                assert_eq!(potential.as_series().unwrap(), series("T*u*v", &["u", "v"]));
            }
            other => panic!("expected weakly, got {other:?}"),
        }
        let d = data(true, vec![disc(&["U", "V"], "one", 1, 1, &[]), disc(&["U"], "pt", 1, 1, &[])]);
        assert!(matches!(
            classify_obstruction(&d, &m0_deformed(&d).unwrap()).unwrap(),
            Obstruction::Obstructed { .. }
        ));
    }

    #[test]
    fn solve_back_substitutes_earlier_relations() {
        let vars = ["t", "x", "y0", "y1"];
        let coeffs: BTreeMap<String, Series> = [
            ("e1".to_string(), series("y0 - y1*t", &vars)),
            ("e2".to_string(), series("T*t - T*x", &vars)),
        ]
        .into_iter()
        .collect();
        let sol = solve_cocycle(&coeffs, &["y0".into(), "t".into()], &Precision::default()).unwrap();
        assert!(sol.residual.is_empty());
        let by_var: BTreeMap<_, _> = sol.relations.iter().map(|r| (r.var.as_str(), r.value.clone())).collect();
        assert_eq!(by_var["t"], series("x", &vars));
        assert_eq!(by_var["y0"], series("x*y1", &vars));
    }

    #[test]
    fn solve_inverts_a_series_coefficient() {
        let vars = ["y", "u"];
        let coeffs: BTreeMap<String, Series> =
            [("beta".to_string(), series("T - T*u*y", &vars))].into_iter().collect();
        let sol = solve_cocycle(&coeffs, &["y".into()], &Precision::default()).unwrap();
        assert_eq!(sol.relations[0].value, series("u^-1", &vars));
    }

    #[test]
    fn nonlinear_or_missing_unknowns_are_refused() {
        let vars = ["t", "x"];
        let coeffs: BTreeMap<String, Series> = [("e".to_string(), series("t^2 - x", &vars))].into_iter().collect();
        let err = solve_cocycle(&coeffs, &["t".into()], &Precision::default()).unwrap_err();
        assert!(matches!(err, McError::NotSolvable { .. }), "{err}");
        let err = solve_cocycle(&coeffs, &["q".into()], &Precision::default()).unwrap_err();
        assert!(matches!(err, McError::NotSolvable { .. }), "{err}");
    }

    #[test]
    fn leftover_equations_are_reported() {
        let vars = ["t", "x"];
        let coeffs: BTreeMap<String, Series> =
            [("a".to_string(), series("t - x", &vars)), ("b".to_string(), series("t - 2*x", &vars))]
                .into_iter()
                .collect();
        let sol = solve_cocycle(&coeffs, &["t".into()], &Precision::default()).unwrap();
        assert_eq!(sol.residual["b"], series("-x", &vars));
    }

    #[test]
    fn isomorphism_needs_a_unit_multiple_of_the_target() {
        let d = data(
            true,
            vec![disc(&["X", "X"], "one", 1, 1, &[]), disc(&["X", "U", "X"], "pt", 2, 1, &[])],
        );
        let comp = Composition { inputs: vec![vec!["X".into()], vec!["X".into()]], target: "one".into() };
        let prec = Precision::default();
        // pt picks up T^2*u, which the relation u = 0 removes.
        let r = check_isomorphism_pair(&d, std::slice::from_ref(&comp), &[], &prec).unwrap();
        assert!(!r.ok);
        let kill_u = SolvedRelation { var: "u".into(), value: series("0", &["u", "v"]) };
        let r = check_isomorphism_pair(&d, &[comp], &[kill_u], &prec).unwrap();
        assert!(r.ok);
        assert_eq!(r.compositions[0].coefficient.as_ref().unwrap().to_string(), "T");
    }

    #[test]
    fn invalid_disc_data_is_rejected() {
        let mut c = disc(&["U"], "pt", 1, 2, &[]);
        let build = |c: DiscContribution| {
            DiscData::new(
                vec![gen("pt", Parity::Even, GeneratorKind::PointClass), gen("U", Parity::Odd, GeneratorKind::Immersed)],
                [("U".to_string(), "u".to_string())].into_iter().collect(),
                true,
                false,
                vec![],
                vec![c],
                serde_json::Value::Null,
            )
        };
        assert!(matches!(build(c.clone()), Err(McError::InvalidContribution { index: 0, .. })));
        c.sign = 1;
        c.area = Rational::zero();
        assert!(build(c.clone()).is_err());
        c.constant = true;
        assert!(build(c.clone()).is_ok());
        c.corners = vec!["W".into()];
        assert!(matches!(build(c), Err(McError::UnknownGenerator(_))));
        let even_deformed = DiscData::new(
            vec![gen("pt", Parity::Even, GeneratorKind::PointClass)],
            [("pt".to_string(), "p".to_string())].into_iter().collect(),
            true,
            false,
            vec![],
            vec![],
            serde_json::Value::Null,
        );
        assert!(even_deformed.is_err());
    }
}
