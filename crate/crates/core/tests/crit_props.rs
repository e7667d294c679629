mod common;

use std::collections::BTreeMap;

use common::*;
use novikov_core::crit::{critical_locus, CritConfig, CriticalPoint};
use novikov_core::models::{bundled_names, load_model, load_model_with, ModelBundle};
use novikov_core::multiseries::Precision;
use novikov_core::novikov::{ExtRational, Novikov, Rational};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn bundles() -> Vec<ModelBundle> {
    let mut out = Vec::new();
    for name in bundled_names() {
        let base = load_model(name).unwrap();
        for v in &base.manifest.variants {
            out.push(load_model_with(name, &v.params, &Precision::default()).unwrap());
        }
        out.push(base);
    }
    out
}

/// Every partial of `W` at `p` vanishes to the lifted energy, checked by
/// plain evaluation.
fn assert_critical(w: &novikov_core::multiseries::Series, p: &CriticalPoint, label: &str) {
    let prec = Precision::new(&Rational::from_integer(5) + &Rational::from_integer(8), 16);
    let target = Rational::from_integer(5);
    for v in p.coordinates.keys() {
        let d = w.partial_derivative(v).evaluate(&p.coordinates, &prec).unwrap();
        assert!(
            d.val() >= ExtRational::Finite(target.clone()),
            "{label}: d/d{v} W = {d} at {:?}",
            p.coordinates
        );
    }
    let value = w.evaluate(&p.coordinates, &prec).unwrap();
    assert!(value.eq_mod(&p.value), "{label}: W = {value}, reported {}", p.value);
}

#[test]
fn bundled_critical_points_are_critical_and_filtered_by_domain() {
    let mut seen = 0;
    for m in bundles() {
        let Some(atlas) = &m.atlas else { continue };
        for chart in &atlas.charts {
            let locus = critical_locus(chart, &CritConfig::new(m.prec.clone())).unwrap();
            let label = format!("{} {:?} {}", m.name, m.overrides, chart.name);
            for p in &locus.points {
                assert_critical(&chart.potential, p, &label);
                assert!(chart.domain.contains(&p.coordinates), "{label}: point outside domain");
                seen += 1;
            }
            for p in &locus.excluded_points {
                assert_critical(&chart.potential, p, &label);
                assert!(!chart.domain.contains(&p.coordinates), "{label}: excluded point inside domain");
            }
        }
    }
    assert!(seen >= 4, "only {seen} critical points across bundled charts");
}

fn leading_term(x: &Novikov) -> Novikov {
    let (e, c) = x.leading().expect("nonzero coordinate");
    Novikov::monomial(c.clone(), e.clone())
}

fn compare_with_oracle(chart: &novikov_core::atlas::Chart, prec: &Precision) -> Result<usize, String> {
    let energy = Rational::from_integer(5);
    let locus = critical_locus(chart, &CritConfig::new(prec.clone())).map_err(|e| e.to_string())?;
    let dw = chart.potential.partial_derivative("t");
    let points: Vec<&CriticalPoint> = locus.points.iter().chain(&locus.excluded_points).collect();
    for p in &points {
        let t = &p.coordinates["t"];
        let oracle = oracle_root(&dw, "t", &leading_term(t), &energy)?;
        if t.truncate(&energy).terms() != oracle.truncate(&energy).terms() {
            return Err(format!("{}: lifted {t} but the oracle gives {oracle}", chart.potential));
        }
    }
    Ok(points.len())
}

#[test]
fn lifted_roots_match_the_oracle_on_bundled_univariate_models() {
    let m = load_model("p1").unwrap();
    let variants: Vec<BTreeMap<String, String>> =
        std::iter::once(BTreeMap::new()).chain(m.manifest.variants.iter().map(|v| v.params.clone())).collect();
    for params in variants {
        let m = load_model_with("p1", &params, &Precision::default()).unwrap();
        let chart = m.atlas.as_ref().unwrap().chart("L").unwrap();
        assert_eq!(compare_with_oracle(chart, &m.prec), Ok(2), "{params:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn lifted_roots_match_the_oracle_on_perturbed_potentials(seed in any::<u64>()) {
        let prec = Precision::default();
        let text = perturbed_potential(&mut StdRng::seed_from_u64(seed));
        let n = compare_with_oracle(&univariate_chart(&text, &prec), &prec);
        prop_assert!(matches!(n, Ok(k) if k >= 2), "{text}: {n:?}");
    }
}
