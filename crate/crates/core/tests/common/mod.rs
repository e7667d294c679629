//! Random generators shared by the property and acceptance suites.
#![allow(dead_code)]

use std::collections::BTreeMap;

use novikov_core::atlas::{Chart, Domain, Relation, ValuationConstraint};
use novikov_core::multiseries::{Ambient, Monomial, Precision, Series};
use novikov_core::novikov::{ExtRational, GaussRational, Novikov, Rational};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::Rng;

const DENOMS: [i64; 5] = [1, 2, 3, 4, 6];

pub fn q(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

pub fn rand_rational(rng: &mut StdRng, lo: i64, hi: i64) -> Rational {
    let d = DENOMS[rng.gen_range(0..DENOMS.len())];
    q(rng.gen_range(lo * d..=hi * d), d)
}

pub fn rand_gauss(rng: &mut StdRng) -> GaussRational {
    loop {
        let re = q(rng.gen_range(-5..=5), rng.gen_range(1..=3));
        let im = if rng.gen_bool(0.3) { q(rng.gen_range(-3..=3), 1) } else { Rational::zero() };
        let c = GaussRational::new(re, im);
        if !c.is_zero() {
            return c;
        }
    }
}

/// A scalar with up to `max_terms` terms and exponents in `[-3, 6]`; finite
/// cutoffs lie strictly above the largest exponent.
pub fn rand_scalar(rng: &mut StdRng, max_terms: usize, exact: bool) -> Novikov {
    let n = rng.gen_range(0..=max_terms);
    let terms: Vec<(Rational, GaussRational)> =
        (0..n).map(|_| (rand_rational(rng, -3, 6), rand_gauss(rng))).collect();
    let cutoff = if exact {
        ExtRational::Infinite
    } else {
        let top = terms.iter().map(|(e, _)| e.clone()).max().unwrap_or_else(|| q(-3, 1));
        ExtRational::Finite(&top + &rand_rational(rng, 0, 4) + q(1, 2))
    };
    Novikov::from_terms(terms, cutoff)
}

pub fn rand_nonzero(rng: &mut StdRng, max_terms: usize, exact: bool) -> Novikov {
    loop {
        let s = rand_scalar(rng, max_terms.max(1), exact);
        if !s.is_zero() {
            return s;
        }
    }
}

/// Representation invariants of a scalar.
pub fn well_formed(s: &Novikov) -> bool {
    let t = s.terms();
    t.windows(2).all(|w| w[0].0 < w[1].0)
        && t.iter().all(|(e, c)| !c.is_zero() && s.cutoff().exceeds(e))
}

prop_compose! {
    pub fn arb_rational(lo: i64, hi: i64)(d in 1i64..=6)(n in lo * d..=hi * d, d in Just(d)) -> Rational {
        q(n, d)
    }
}

prop_compose! {
    pub fn arb_gauss()(re in -5i64..=5, im in -2i64..=2, d in 1i64..=3) -> GaussRational {
        GaussRational::new(q(re, d), q(im, 1))
    }
}

prop_compose! {
    /// Exact scalars with up to four terms.
    pub fn arb_exact()(terms in prop::collection::vec((arb_rational(-3, 6), arb_gauss()), 0..=4)) -> Novikov {
        Novikov::from_terms(terms, ExtRational::Infinite)
    }
}

/// Exact series over `vars` with nonnegative exponents up to `max_exp`.
pub fn arb_polynomial(vars: &'static [&'static str], max_exp: i64, max_terms: usize) -> impl Strategy<Value = Series> {
    let monomial = prop::collection::vec(0..=max_exp, vars.len());
    prop::collection::vec((monomial, arb_rational(0, 3), -3i64..=3), 0..=max_terms).prop_map(move |terms| {
        let amb: Ambient = vars.iter().map(|v| v.to_string()).collect();
        let terms = terms.into_iter().map(|(exps, e, c)| {
            let m = Monomial::from_pairs(vars.iter().map(|v| v.to_string()).zip(exps));
            (m, Novikov::monomial(GaussRational::from_integer(c), e))
        });
        Series::from_terms(&amb, terms, ExtRational::Infinite, None).expect("ambient variables")
    })
}

pub fn point(pairs: &[(&str, Novikov)]) -> BTreeMap<String, Novikov> {
    pairs.iter().map(|(v, x)| (v.to_string(), x.clone())).collect()
}

/// Direct evaluation of `Σ n·val(v) + c rel bound`, with `None` for `+∞`.
pub fn constraint_holds(c: &ValuationConstraint, vals: &BTreeMap<String, Option<Rational>>) -> bool {
    let mut sum = c.constant.clone();
    let (mut up, mut down) = (false, false);
    for (v, n) in &c.form {
        match &vals[v] {
            Some(x) => sum = &sum + &(x * &Rational::from_integer(*n)),
            None if *n > 0 => up = true,
            None => down = true,
        }
    }
    let bound = c.bound.finite();
    match (up, down) {
        (true, true) => false,
        (true, false) => match c.rel {
            Relation::Ge => true,
            Relation::Gt => bound.is_some(),
            Relation::Eq | Relation::Le => bound.is_none(),
            Relation::Lt => false,
        },
        (false, true) => matches!(c.rel, Relation::Lt | Relation::Le),
        (false, false) => match bound {
            None => matches!(c.rel, Relation::Lt | Relation::Le),
            Some(b) => match c.rel {
                Relation::Eq => sum == *b,
                Relation::Gt => sum > *b,
                Relation::Ge => sum >= *b,
                Relation::Lt => sum < *b,
                Relation::Le => sum <= *b,
            },
        },
    }
}

fn lcm(a: i64, b: i64) -> i64 {
    fn gcd(a: i64, b: i64) -> i64 {
        if b == 0 { a.abs() } else { gcd(b, a % b) }
    }
    a / gcd(a, b) * b
}

/// Grid search over valuations: multiples of a step fine enough for the
/// constants in the domain, inside a box around them, plus `+∞`. Returns a
/// satisfying assignment of finite valuations if one exists.
pub fn grid_feasible(domain: &Domain) -> Option<BTreeMap<String, Option<Rational>>> {
    let vars: Vec<String> = domain.vars().into_iter().collect();
    let mut den = 1i64;
    let mut radius = Rational::from_integer(2);
    let mut max_coeff = 1i64;
    for c in domain.pieces.iter().flatten() {
        for r in std::iter::once(&c.constant).chain(c.bound.finite()) {
            den = lcm(den, i64::try_from(r.denom()).expect("small denominator"));
            radius = &radius + &r.abs();
        }
        for n in c.form.values() {
            max_coeff = max_coeff.max(n.abs());
        }
    }
    let step_den = 2 * den * max_coeff;
    let reach: i64 = (&radius * &Rational::from_integer(step_den)).ceil().to_i64().expect("small box");
    let mut values: Vec<Option<Rational>> = (-reach..=reach).map(|k| Some(q(k, step_den))).collect();
    values.push(None);
    let total = (values.len() as f64).powi(vars.len() as i32);
    assert!(total < 5e6, "grid of {total} points is too large for {domain}");
    let mut idx = vec![0usize; vars.len()];
    loop {
        let vals: BTreeMap<String, Option<Rational>> =
            vars.iter().cloned().zip(idx.iter().map(|&i| values[i].clone())).collect();
        if domain.pieces.iter().any(|p| p.iter().all(|c| constraint_holds(c, &vals))) {
            return Some(vals);
        }
        let mut k = 0;
        loop {
            if k == idx.len() {
                return None;
            }
            idx[k] += 1;
            if idx[k] < values.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn lcm_denoms(values: impl IntoIterator<Item = Rational>) -> i64 {
    values.into_iter().fold(1, |acc, r| lcm(acc, i64::try_from(r.denom()).expect("small denominator")))
}

/// Expands a simple root of the univariate `dw` from its leading term by
/// undetermined coefficients: at each exponent `e` on the lattice of the
/// data, the coefficient `c` of `T^e` is fixed by requiring the `T^{e+β}`
/// coefficient of `dw(root + c·T^e)` to vanish, where `β` is the valuation of
/// `dw'` at the leading term. Only exact evaluation is used; each value is
/// recomputed at higher precision until its cutoff clears the coefficient read.
pub fn oracle_root(dw: &Series, var: &str, leading: &Novikov, energy: &Rational) -> Result<Novikov, String> {
    // value of `s` at `x`, known strictly beyond `need`
    let at = |s: &Series, x: &Novikov, need: &Rational| -> Result<Novikov, String> {
        let mut margin = Rational::one();
        for _ in 0..6 {
            let prec = Precision::new(need + &margin, 64);
            let v = s.evaluate(&point(&[(var, x.clone())]), &prec).map_err(|e| e.to_string())?;
            if v.cutoff().exceeds(need) {
                return Ok(v);
            }
            margin = &margin + &margin;
        }
        Err(format!("cannot evaluate beyond {need}"))
    };
    let gamma = leading.val().finite().cloned().ok_or("zero leading term")?;
    let d2 = dw.partial_derivative(var);
    let beta = at(&d2, leading, &(&gamma + &Rational::one()))?.val().finite().cloned().ok_or("multiple root")?;
    let exps = dw.terms().values().flat_map(|c| c.terms().iter().map(|(e, _)| e.clone()));
    let step = q(1, lcm_denoms(exps.chain([gamma.clone(), beta.clone()])));
    let mut root = leading.clone();
    let mut e = &gamma + &step;
    while &e < energy {
        let target = &e + &beta;
        let f0 = at(dw, &root, &target)?;
        if f0.val() < ExtRational::Finite(target.clone()) {
            return Err(format!("dw(root) = {f0} has a term below {target}"));
        }
        let probe = root.add(&Novikov::t_power(e.clone()));
        let a = f0.coefficient(&target);
        let b = &at(dw, &probe, &target)?.coefficient(&target) - &a;
        let c = -(&a * &b.inverse().ok_or("vanishing linear coefficient")?);
        root = root.add(&Novikov::monomial(c, e.clone()));
        e = &e + &step;
    }
    Ok(root)
}

/// `t + T·t^-1` plus up to three terms `c·T^e·t^k` whose derivatives sit
/// strictly above the leading balance at `val t = 1/2`.
pub fn perturbed_potential(rng: &mut StdRng) -> String {
    let mut text = String::from("t + T^1*t^-1");
    for _ in 0..rng.gen_range(1..=3) {
        let k = [-2i64, -1, 1, 2][rng.gen_range(0..4)];
        let e = &q(1 - k, 2) + &rand_rational(rng, 0, 2) + q(1, 6);
        let c = rand_rational(rng, -3, 3);
        if !c.is_zero() {
            text.push_str(&format!(" + ({c})*T^({e})*t^({k})"));
        }
    }
    text
}

/// A one-variable chart with no domain restriction.
pub fn univariate_chart(potential: &str, prec: &Precision) -> Chart {
    let amb: Ambient = ["t".to_string()].into_iter().collect();
    let potential = novikov_core::expr::parse_series(potential, &amb, &Default::default(), prec).expect("potential parses");
    Chart { name: "P".into(), vars: vec!["t".into()], domain: Domain::everything(), potential }
}
