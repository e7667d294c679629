mod common;

use std::collections::BTreeMap;

use common::*;
use novikov_core::atlas::{
    check_potential_match, compose, domain_feasible, effective_overlap, transport_point, Atlas, Chart, Domain,
    Feasibility, Transition,
};
use novikov_core::format::Overrides;
use novikov_core::models::{bundled_names, load_model, load_model_with};
use novikov_core::multiseries::{ambient, Monomial, Precision, Series};
use novikov_core::novikov::{GaussRational, Novikov};
use proptest::prelude::*;

const CHARTS: [&str; 4] = ["A", "B", "C", "D"];

fn vars_of(chart: &str) -> Vec<String> {
    vec![format!("{}1", chart.to_lowercase()), format!("{}2", chart.to_lowercase())]
}

fn chart(name: &str) -> Chart {
    let vars = vars_of(name);
    let amb = ambient(vars.iter());
    Chart { name: name.into(), vars, domain: Domain::everything(), potential: Series::zero(&amb) }
}

/// Each image is `c·T^e·(src1)^i (src2)^j`, negative exponents allowed.
fn arb_monomial_map() -> impl Strategy<Value = Vec<(i64, (i64, i64), i64, i64)>> {
    prop::collection::vec((prop::sample::select(vec![1i64, -1, 2]), (-4i64..=4, 1i64..=2), -2i64..=2, -2i64..=2), 2)
}

fn build_map(src: &str, spec: &[(i64, (i64, i64), i64, i64)]) -> BTreeMap<String, Series> {
    let (sv, amb) = (vars_of(src), ambient(vars_of(src)));
    spec.iter()
        .enumerate()
        .map(|(k, (c, (en, ed), i, j))| {
            let m = Monomial::from_pairs([(sv[0].clone(), *i), (sv[1].clone(), *j)]);
            let coeff = Novikov::monomial(GaussRational::from_integer(*c), q(*en, *ed));
            (k.to_string(), Series::monomial(&amb, m, coeff).unwrap())
        })
        .collect()
}

fn transition(src: &str, dst: &str, map: BTreeMap<String, Series>) -> Transition {
    let dv = vars_of(dst);
    let map = map.into_iter().map(|(k, s)| (dv[k.parse::<usize>().unwrap()].clone(), s)).collect();
    Transition {
        id: format!("{src}->{dst}"),
        src: src.into(),
        dst: dst.into(),
        overlap: Domain::everything(),
        map,
        inverse: None,
    }
}

fn chain_atlas(maps: [BTreeMap<String, Series>; 3]) -> Atlas {
    let [m1, m2, m3] = maps;
    let ts = vec![transition("A", "B", m1), transition("B", "C", m2), transition("C", "D", m3)];
    Atlas::new(Default::default(), CHARTS.iter().map(|c| chart(c)).collect(), ts, vec![]).unwrap()
}

fn polynomial_map(src: &str, polys: [Series; 2]) -> BTreeMap<String, Series> {
    let amb = ambient(vars_of(src));
    let rename: BTreeMap<String, Series> = ["x", "y"]
        .iter()
        .zip(vars_of(src))
        .map(|(w, v)| (w.to_string(), Series::var(&amb, &v).unwrap()))
        .collect();
    polys
        .iter()
        .enumerate()
        .map(|(k, p)| (k.to_string(), p.substitute(&rename, &amb, &Precision::default()).unwrap()))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn compose_is_associative_on_monomial_maps(a in arb_monomial_map(), b in arb_monomial_map(), c in arb_monomial_map()) {
        let atlas = chain_atlas([build_map("A", &a), build_map("B", &b), build_map("C", &c)]);
        let prec = Precision::default();
        let [t1, t2, t3] = [&atlas.transitions[0], &atlas.transitions[1], &atlas.transitions[2]];
        let left = compose(&atlas, &compose(&atlas, t1, t2, &prec).unwrap().transition, t3, &prec).unwrap();
        let right = compose(&atlas, t1, &compose(&atlas, t2, t3, &prec).unwrap().transition, &prec).unwrap();
        prop_assert_eq!(&left.transition.map, &right.transition.map);
    }

    #[test]
    fn compose_is_associative_on_polynomial_maps(
        p in prop::array::uniform6(arb_polynomial(&["x", "y"], 2, 3)),
    ) {
        let [p0, p1, p2, p3, p4, p5] = p;
        let atlas = chain_atlas([
            polynomial_map("A", [p0, p1]),
            polynomial_map("B", [p2, p3]),
            polynomial_map("C", [p4, p5]),
        ]);
        let prec = Precision::default();
        let [t1, t2, t3] = [&atlas.transitions[0], &atlas.transitions[1], &atlas.transitions[2]];
        let left = compose(&atlas, &compose(&atlas, t1, t2, &prec).unwrap().transition, t3, &prec).unwrap();
        let right = compose(&atlas, t1, &compose(&atlas, t2, t3, &prec).unwrap().transition, &prec).unwrap();
        prop_assert_eq!(&left.transition.map, &right.transition.map);
    }

    #[test]
    fn transport_commutes_with_compose_on_monomial_points(
        a in arb_monomial_map(), b in arb_monomial_map(),
        cx in arb_gauss(), cy in arb_gauss(), ex in arb_rational(-2, 2), ey in arb_rational(-2, 2),
    ) {
        prop_assume!(!cx.is_zero() && !cy.is_zero());
        let atlas = chain_atlas([build_map("A", &a), build_map("B", &b), build_map("C", &b)]);
        let p = point(&[("a1", Novikov::monomial(cx, ex)), ("a2", Novikov::monomial(cy, ey))]);
        let (one, two) = transport_both_ways(&atlas, &p);
        prop_assert_eq!(one, two);
    }

    #[test]
    fn transport_commutes_with_compose_on_polynomial_maps(
        p in prop::array::uniform6(arb_polynomial(&["x", "y"], 2, 3)),
        x in arb_exact(), y in arb_exact(),
    ) {
        let [p0, p1, p2, p3, p4, p5] = p;
        let atlas = chain_atlas([
            polynomial_map("A", [p0, p1]),
            polynomial_map("B", [p2, p3]),
            polynomial_map("C", [p4, p5]),
        ]);
        let (one, two) = transport_both_ways(&atlas, &point(&[("a1", x), ("a2", y)]));
        prop_assert_eq!(one, two);
    }
}

/// The image of `p` under the composite of the first two transitions, and
/// under the two transitions one after the other.
fn transport_both_ways(atlas: &Atlas, p: &BTreeMap<String, Novikov>) -> (BTreeMap<String, Novikov>, BTreeMap<String, Novikov>) {
    let prec = Precision::default();
    let [t1, t2] = [&atlas.transitions[0], &atlas.transitions[1]];
    let step = transport_point(atlas, t1, p, &prec).unwrap().image;
    let two = transport_point(atlas, t2, &step, &prec).unwrap().image;
    let c = compose(atlas, t1, t2, &prec).unwrap().transition;
    (transport_point(atlas, &c, p, &prec).unwrap().image, two)
}

#[test]
fn identity_transitions_preserve_every_bundled_potential() {
    let prec = Precision::default();
    for name in bundled_names() {
        let m = load_model(name).unwrap();
        let Some(atlas) = &m.atlas else { continue };
        for c in &atlas.charts {
            let r = check_potential_match(atlas, &Transition::identity(c), &prec).unwrap();
            assert!(r.ok, "{name}/{}: {}", c.name, r.residual);
        }
    }
}

fn overrides(pairs: &[(&str, &str)]) -> Overrides {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

#[test]
fn loops_of_matching_transitions_preserve_the_potential() {
    let prec = Precision::default();
    let mut checked = 0;
    let cases = [
        ("four-punctured", overrides(&[])),
        ("four-punctured", overrides(&[("a", "0"), ("b", "2")])),
        ("four-punctured", overrides(&[("a", "2"), ("b", "0")])),
        ("four-punctured", overrides(&[("a", "-3"), ("b", "5")])),
        ("three-pants", overrides(&[])),
        ("wall-crossing", overrides(&[])),
    ];
    for (name, ov) in cases {
        let m = load_model_with(name, &ov, &prec).unwrap();
        let atlas = m.atlas.as_ref().unwrap();
        for l in &atlas.loops {
            let ts: Vec<Transition> = l.iter().map(|s| atlas.step(s).unwrap()).collect();
            if !ts.iter().all(|t| check_potential_match(atlas, t, &prec).unwrap().ok) {
                continue;
            }
            let mut acc = ts[0].clone();
            for t in &ts[1..] {
                acc = compose(atlas, &acc, t, &prec).unwrap().transition;
            }
            let r = check_potential_match(atlas, &acc, &prec).unwrap();
            assert!(r.ok, "{name} {ov:?}: composite residual {}", r.residual);
            checked += 1;
        }
    }
    assert_eq!(checked, 6, "every case has one loop whose transitions all match");
}

/// Every domain the bundled models produce: chart domains, declared and
/// effective overlaps in both directions, constraint files and chained overlaps.
fn bundled_domains() -> Vec<(String, Domain)> {
    let prec = Precision::default();
    let mut out = Vec::new();
    let cases = [
        ("p1", overrides(&[])),
        ("pants", overrides(&[])),
        ("four-punctured", overrides(&[])),
        ("paradox", overrides(&[])),
        ("paradox", overrides(&[("A1", "2/5"), ("A2", "2/5"), ("A3", "2/5"), ("A4", "2/5"), ("A5", "2/5")])),
        ("paradox", overrides(&[("A7", "1/2")])),
        ("three-pants", overrides(&[])),
        ("wall-crossing", overrides(&[])),
    ];
    for (name, ov) in cases {
        let m = load_model_with(name, &ov, &prec).unwrap();
        for (stem, d) in &m.constraints {
            out.push((format!("{name} {ov:?} {stem}"), d.clone()));
        }
        let Some(atlas) = &m.atlas else { continue };
        for c in &atlas.charts {
            out.push((format!("{name} {ov:?} chart {}", c.name), c.domain.clone()));
        }
        let mut ts = Vec::new();
        for t in &atlas.transitions {
            ts.push(t.clone());
            if t.inverse.is_some() {
                ts.push(t.inverted().unwrap());
            }
        }
        for t in &ts {
            out.push((format!("{name} {ov:?} overlap {}", t.id), t.overlap.clone()));
            out.push((format!("{name} {ov:?} effective {}", t.id), effective_overlap(atlas, t).unwrap().0));
            for u in ts.iter().filter(|u| u.src == t.dst) {
                // chains whose substitution diverges have no overlap to test
                let Ok(c) = compose(atlas, t, u, &prec) else { continue };
                if !c.approximate {
                    out.push((format!("{name} {ov:?} chain {}", c.transition.id), c.transition.overlap));
                }
            }
        }
    }
    out
}

#[test]
fn feasibility_agrees_with_grid_search_on_bundled_models() {
    let domains = bundled_domains();
    assert!(domains.len() > 40, "only {} domains", domains.len());
    let (mut feasible, mut infeasible) = (0, 0);
    for (label, d) in domains {
        let grid = grid_feasible(&d);
        match domain_feasible(&d) {
            Feasibility::Feasible { piece, witness } => {
                feasible += 1;
                assert!(grid.is_some(), "{label}: solver finds {witness:?} but the grid finds nothing in {d}");
                let vals = witness.into_iter().map(|(v, r)| (v, Some(r))).collect();
                assert!(
                    d.pieces[piece].iter().all(|c| constraint_holds(c, &vals)),
                    "{label}: witness {vals:?} violates {d}"
                );
            }
            Feasibility::Infeasible { certificates } => {
                infeasible += 1;
                assert!(grid.is_none(), "{label}: solver says infeasible, grid finds {grid:?} in {d}");
                assert_eq!(certificates.len(), d.pieces.len());
                for (cert, piece) in certificates.iter().zip(&d.pieces) {
                    assert!(cert.iter().all(|c| piece.contains(c)), "{label}: certificate is not a subset");
                    assert!(grid_feasible(&Domain::conjunction(cert.clone())).is_none(), "{label}: {cert:?}");
                }
            }
        }
    }
    assert!(feasible > 0 && infeasible > 0, "{feasible} feasible, {infeasible} infeasible");
}

#[test]
fn wall_crossing_chain_transports_like_the_direct_gluing() {
    let m = load_model("wall-crossing").unwrap();
    let atlas = m.atlas.as_ref().unwrap();
    let prec = m.prec.clone();
    let [l_l1, l1_l2, l_l2] = ["L_L1", "L1_L2", "L_L2"].map(|id| atlas.transition(id).unwrap());
    for (u, v) in [(q(1, 2), q(1, 2)), (q(1, 3), q(1, 5)), (q(0, 1), q(1, 4))] {
        let p = point(&[("u", Novikov::t_power(u)), ("v", Novikov::t_power(v))]);
        let mid = transport_point(atlas, l_l1, &p, &prec).unwrap().image;
        let two = transport_point(atlas, l1_l2, &mid, &prec).unwrap().image;
        let one = transport_point(atlas, l_l2, &p, &prec).unwrap().image;
        for (w, z) in &one {
            assert!(z.eq_mod(&two[w]), "{w}: {z} vs {}", two[w]);
        }
    }
}
