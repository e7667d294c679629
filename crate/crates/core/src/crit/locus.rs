use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use super::hensel::{hensel_lift, residual_val};
use super::newton::{newton_leading, SymbolicRoot};
use super::poly::{gaussian_roots, Poly};
use super::{CritError, CriticalComponent, CriticalPoint};
use crate::atlas::{conjunction_feasible, Chart, Domain};
use crate::multiseries::{Precision, Series};
use crate::novikov::{ExtRational, GaussRational, Novikov, Rational};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CritConfig {
    pub prec: Precision,
    /// Energy to lift to; defaults to the scalar cutoff.
    pub target: Option<Rational>,
}

impl CritConfig {
    pub fn new(prec: Precision) -> Self {
        CritConfig { prec, target: None }
    }

    pub fn target(&self) -> Rational {
        self.target.clone().unwrap_or_else(|| self.prec.energy.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialShape {
    Constant,
    Monomial,
    Univariate,
    Multivariate,
}

/// A leading solution that was found but not lifted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnliftedPoint {
    pub leading: BTreeMap<String, Novikov>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalLocus {
    pub chart: String,
    pub shape: PotentialShape,
    pub points: Vec<CriticalPoint>,
    pub components: Vec<CriticalComponent>,
    /// Critical points and components outside the chart domain.
    pub excluded_points: Vec<CriticalPoint>,
    pub excluded_components: Vec<CriticalComponent>,
    pub unlifted: Vec<UnliftedPoint>,
    pub symbolic: Vec<SymbolicRoot>,
    /// Tropical ties that the binomial solver does not resolve.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub unresolved: Vec<String>,
}

/// A point of `{pinned = 0}` in the domain, with free variables at `T^w`.
fn component_sample(domain: &Domain, pinned: &[String], free: &[String]) -> Option<BTreeMap<String, Novikov>> {
    let mut vals: BTreeMap<String, ExtRational> = BTreeMap::new();
    for v in pinned {
        vals.insert(v.clone(), ExtRational::Infinite);
    }
    for v in free {
        vals.insert(v.clone(), ExtRational::Finite(Rational::zero()));
    }
    for piece in &domain.pieces {
        let (touching, rest): (Vec<_>, Vec<_>) =
            piece.iter().cloned().partition(|c| c.vars().any(|v| pinned.contains(v)));
        if !touching.iter().all(|c| c.holds_at(&vals)) {
            continue;
        }
        if let Ok(witness) = conjunction_feasible(&rest) {
            let mut sample: BTreeMap<String, Novikov> =
                pinned.iter().map(|v| (v.clone(), Novikov::zero())).collect();
            for v in free {
                let w = witness.get(v).cloned().unwrap_or_else(Rational::zero);
                sample.insert(v.clone(), Novikov::t_power(w));
            }
            return Some(sample);
        }
    }
    None
}

impl CriticalComponent {
    /// A point of the component inside `domain`, if there is one.
    pub fn sample_in(&self, domain: &Domain) -> Option<BTreeMap<String, Novikov>> {
        component_sample(domain, &self.pinned, &self.free)
    }
}

fn subsets<T: Clone>(items: &[T], k: usize) -> Vec<Vec<T>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (i, x) in items.iter().enumerate() {
        for mut rest in subsets(&items[i + 1..], k - 1) {
            rest.insert(0, x.clone());
            out.push(rest);
        }
    }
    out
}

/// Minimal sets of variables whose vanishing kills the gradient of `c·m`.
fn monomial_components(w: &Series, vars: &[String]) -> Vec<Vec<String>> {
    let (m, _) = w.single_term().expect("monomial potential");
    let positive: Vec<String> = vars.iter().filter(|v| m.exponent(v) > 0).cloned().collect();
    let involved: Vec<&String> = vars.iter().filter(|v| m.exponent(v) != 0).collect();
    let kills = |zero: &[String]| {
        involved.iter().all(|j| {
            zero.iter().any(|i| m.exponent(i) - i64::from(i == *j) > 0)
        })
    };
    let mut found: Vec<Vec<String>> = Vec::new();
    for size in 1..=positive.len() {
        for z in subsets(&positive, size) {
            if kills(&z) && !found.iter().any(|f| f.iter().all(|v| z.contains(v))) {
                found.push(z);
            }
        }
    }
    found
}

fn solve_rational(mut a: Vec<Vec<Rational>>, mut b: Vec<Rational>) -> Option<Vec<Rational>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).find(|&r| !a[r][k].is_zero())?;
        a.swap(p, k);
        b.swap(p, k);
        let inv = a[k][k].recip();
        for r in 0..n {
            if r != k && !a[r][k].is_zero() {
                let f = &a[r][k] * &inv;
                for c in k..n {
                    let sub = &f * &a[k][c];
                    a[r][c] = &a[r][c] - &sub;
                }
                b[r] = &b[r] - &(&f * &b[k]);
            }
        }
    }
    Some((0..n).map(|k| &b[k] / &a[k][k]).collect())
}

/// The kernel vector of an `n × (n+1)` matrix of rank `n`.
fn kernel_vector(mut a: Vec<Vec<Rational>>) -> Option<Vec<Rational>> {
    let rows = a.len();
    let cols = rows + 1;
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else { continue };
        a.swap(p, r);
        let inv = a[r][c].recip();
        for x in a[r].iter_mut() {
            *x = &*x * &inv;
        }
        for i in 0..rows {
            if i != r && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                for j in 0..cols {
                    let sub = &f * &a[r][j];
                    a[i][j] = &a[i][j] - &sub;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    if pivots.len() != rows {
        return None;
    }
    let free = (0..cols).find(|c| !pivots.contains(c))?;
    let mut w = vec![Rational::zero(); cols];
    w[free] = Rational::one();
    for (i, &c) in pivots.iter().enumerate() {
        w[c] = -&a[i][free];
    }
    Some(w)
}

struct Term {
    m: Vec<i64>,
    alpha: Rational,
    a: GaussRational,
}

/// Solutions `c` of `c^{rows of d} = b` by integer row reduction and
/// back-substitution; irrational branches go to `symbolic`.
fn solve_binomial(
    mut d: Vec<Vec<i64>>,
    mut b: Vec<GaussRational>,
    vars: &[String],
    gamma: &BTreeMap<String, Rational>,
    symbolic: &mut Vec<SymbolicRoot>,
) -> Vec<Vec<GaussRational>> {
    let n = d.len();
    for col in 0..n {
        loop {
            let nonzero: Vec<usize> = (col..n).filter(|&r| d[r][col] != 0).collect();
            let p = *nonzero.iter().min_by_key(|&&r| d[r][col].abs()).expect("nonsingular");
            if nonzero.len() == 1 {
                d.swap(p, col);
                b.swap(p, col);
                break;
            }
            for &r in &nonzero {
                if r != p {
                    let q = d[r][col] / d[p][col];
                    for c in 0..n {
                        d[r][c] -= q * d[p][c];
                    }
                    b[r] = &b[r] * &b[p].pow(-q);
                }
            }
        }
    }
    let mut out = Vec::new();
    let mut partial = vec![GaussRational::zero(); n];
    back_solve(&d, &b, n, &mut partial, vars, gamma, symbolic, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn back_solve(
    d: &[Vec<i64>],
    b: &[GaussRational],
    level: usize,
    partial: &mut Vec<GaussRational>,
    vars: &[String],
    gamma: &BTreeMap<String, Rational>,
    symbolic: &mut Vec<SymbolicRoot>,
    out: &mut Vec<Vec<GaussRational>>,
) {
    if level == 0 {
        out.push(partial.clone());
        return;
    }
    let i = level - 1;
    let mut rhs = b[i].clone();
    for j in i + 1..d.len() {
        rhs = &rhs * &partial[j].pow(-d[i][j]);
    }
    let mut e = d[i][i];
    if e < 0 {
        rhs = rhs.inverse().expect("nonzero");
        e = -e;
    }
    let mut coeffs = vec![GaussRational::zero(); e as usize + 1];
    coeffs[0] = -rhs;
    coeffs[e as usize] = GaussRational::one();
    let (roots, leftover) = gaussian_roots(&Poly::new(coeffs));
    if leftover.degree() > 0 {
        symbolic.push(SymbolicRoot {
            exponents: gamma.clone(),
            variable: vars[i].clone(),
            polynomial: leftover.to_string(),
            count: leftover.degree(),
        });
    }
    for (r, _) in roots {
        partial[i] = r;
        back_solve(d, b, i, partial, vars, gamma, symbolic, out);
    }
}

/// Leading solutions on the torus from ties of `n + 1` affinely independent terms.
fn tropical_leading(
    w: &Series,
    vars: &[String],
    symbolic: &mut Vec<SymbolicRoot>,
    unresolved: &mut Vec<String>,
) -> Vec<BTreeMap<String, Novikov>> {
    let n = vars.len();
    let terms: Vec<Term> = w
        .terms()
        .iter()
        .filter_map(|(m, c)| {
            let (alpha, a) = c.leading()?;
            Some(Term { m: vars.iter().map(|v| m.exponent(v)).collect(), alpha: alpha.clone(), a: a.clone() })
        })
        .collect();
    let mut seen: BTreeSet<Vec<Rational>> = BTreeSet::new();
    let mut out = Vec::new();
    for subset in subsets(&(0..terms.len()).collect::<Vec<_>>(), n + 1) {
        let k0 = &terms[subset[0]];
        let rows: Vec<Vec<i64>> =
            subset[1..].iter().map(|&k| (0..n).map(|j| terms[k].m[j] - k0.m[j]).collect()).collect();
        let rows_q: Vec<Vec<Rational>> =
            rows.iter().map(|r| r.iter().map(|&x| Rational::from_integer(x)).collect()).collect();
        let rhs: Vec<Rational> = subset[1..].iter().map(|&k| &k0.alpha - &terms[k].alpha).collect();
        let Some(g) = solve_rational(rows_q, rhs) else { continue };
        let value = |t: &Term| {
            t.m.iter().zip(&g).fold(t.alpha.clone(), |acc, (&e, gj)| &acc + &(gj * &Rational::from_integer(e)))
        };
        let level = value(k0);
        if terms.iter().any(|t| value(t) < level) {
            continue;
        }
        if !seen.insert(g.clone()) {
            continue;
        }
        let gamma: BTreeMap<String, Rational> = vars.iter().cloned().zip(g.iter().cloned()).collect();
        let tied: Vec<usize> = (0..terms.len()).filter(|&k| value(&terms[k]) == level).collect();
        if tied.len() > n + 1 {
            let shown: Vec<String> = gamma.iter().map(|(v, x)| format!("val({v}) = {x}")).collect();
            unresolved.push(format!("{} terms tie at {}", tied.len(), shown.join(", ")));
            continue;
        }
        // Σ_k w_k m_k = 0 with u_k = a_k c^{m_k} = λ w_k
        let transpose: Vec<Vec<Rational>> = (0..n)
            .map(|j| subset.iter().map(|&k| Rational::from_integer(terms[k].m[j])).collect())
            .collect();
        let Some(kernel) = kernel_vector(transpose) else { continue };
        if kernel.iter().any(Rational::is_zero) {
            continue;
        }
        let b: Vec<GaussRational> = subset[1..]
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                let ratio = GaussRational::real(&kernel[i + 1] / &kernel[0]);
                &(&ratio * &k0.a) / &terms[k].a
            })
            .collect();
        for c in solve_binomial(rows, b, vars, &gamma, symbolic) {
            out.push(
                vars.iter()
                    .zip(c)
                    .map(|(v, cj)| (v.clone(), Novikov::monomial(cj, gamma[v].clone())))
                    .collect(),
            );
        }
    }
    out
}

fn gradient(w: &Series, vars: &[String]) -> Vec<Series> {
    vars.iter().map(|v| w.partial_derivative(v)).collect()
}

/// Lifts one leading solution and re-checks the gradient at the result.
fn lift_point(
    w: &Series,
    vars: &[String],
    leading: &BTreeMap<String, Novikov>,
    config: &CritConfig,
) -> Result<CriticalPoint, CritError> {
    let grad = gradient(w, vars);
    let target = config.target();
    let lifted = hensel_lift(&grad, vars, leading, &target, &config.prec)?;
    let check_energy = match &lifted.lifted_to {
        ExtRational::Finite(e) => &(e + e) + &Rational::from_integer(2),
        ExtRational::Infinite => &(&target + &target) + &Rational::from_integer(2),
    };
    let check = Precision { energy: check_energy, degree: config.prec.degree };
    // the lifted terms all lie below the check energy, so a finite cutoff there
    // only bounds intermediate products; exact solutions are checked exactly
    let exact: BTreeMap<String, Novikov> = lifted
        .point
        .iter()
        .map(|(v, x)| match lifted.lifted_to {
            ExtRational::Infinite => (v.clone(), x.clone()),
            ExtRational::Finite(_) => (v.clone(), x.to_exact().truncate(&check.energy)),
        })
        .collect();
    let mut residual = ExtRational::Infinite;
    for g in &grad {
        residual = residual.min(residual_val(&g.evaluate(&exact, &check)?));
    }
    if lifted.lifted_to.is_infinite() != residual.is_infinite()
        || residual < ExtRational::Finite(target.clone())
    {
        return Err(CritError::Invalid(format!("gradient residual {residual} is below the target {target}")));
    }
    let value = w.evaluate(&lifted.point, &config.prec)?;
    Ok(CriticalPoint {
        coordinates: lifted.point,
        value,
        lifted_to: lifted.lifted_to,
        residual,
        iterations: lifted.iterations,
    })
}

/// All critical points and components of a chart potential inside its domain.
pub fn critical_locus(chart: &Chart, config: &CritConfig) -> Result<CriticalLocus, CritError> {
    let w = &chart.potential;
    let used = w.vars_used();
    let vars = chart.vars.clone();
    let shape = if used.is_empty() {
        PotentialShape::Constant
    } else if w.terms().len() == 1 {
        PotentialShape::Monomial
    } else if used.len() == 1 && vars.len() == 1 {
        PotentialShape::Univariate
    } else if used.len() == vars.len() {
        PotentialShape::Multivariate
    } else {
        let missing: Vec<&String> = vars.iter().filter(|v| !used.contains(*v)).collect();
        return Err(CritError::UnsupportedPotential(format!(
            "non-monomial potential of chart `{}` does not involve {}",
            chart.name,
            missing.iter().map(|v| format!("`{v}`")).collect::<Vec<_>>().join(", ")
        )));
    };
    let mut locus = CriticalLocus {
        chart: chart.name.clone(),
        shape,
        points: Vec::new(),
        components: Vec::new(),
        excluded_points: Vec::new(),
        excluded_components: Vec::new(),
        unlifted: Vec::new(),
        symbolic: Vec::new(),
        unresolved: Vec::new(),
    };
    let place_component = |pinned: Vec<String>, locus: &mut CriticalLocus| {
        let free: Vec<String> = vars.iter().filter(|v| !pinned.contains(v)).cloned().collect();
        match component_sample(&chart.domain, &pinned, &free) {
            Some(sample) => locus.components.push(CriticalComponent { pinned, free, sample }),
            None => locus.excluded_components.push(CriticalComponent { pinned, free, sample: BTreeMap::new() }),
        }
    };
    let mut candidates: Vec<BTreeMap<String, Novikov>> = Vec::new();
    let mut exact_points: Vec<CriticalPoint> = Vec::new();
    match shape {
        PotentialShape::Constant => place_component(Vec::new(), &mut locus),
        PotentialShape::Monomial => {
            for pinned in monomial_components(w, &vars) {
                place_component(pinned, &mut locus);
            }
        }
        PotentialShape::Univariate => {
            let v = &vars[0];
            let dw = w.partial_derivative(v);
            let leading = match newton_leading(&dw, v) {
                Err(CritError::NoRoots) => Default::default(),
                other => other?,
            };
            if leading.zero_root.is_some() && w.terms().keys().all(|m| m.exponent(v) >= 0) {
                let origin = BTreeMap::from([(v.clone(), Novikov::zero())]);
                exact_points.push(CriticalPoint {
                    value: w.evaluate(&origin, &config.prec)?,
                    coordinates: origin,
                    lifted_to: ExtRational::Infinite,
                    residual: ExtRational::Infinite,
                    iterations: 0,
                });
            }
            for root in leading.roots {
                let point = BTreeMap::from([(
                    v.clone(),
                    Novikov::monomial(root.coefficient.clone(), root.exponent.clone()),
                )]);
                if root.multiplicity > 1 {
                    locus.unlifted.push(UnliftedPoint {
                        leading: point,
                        reason: format!("root of multiplicity {} is degenerate", root.multiplicity),
                    });
                } else {
                    candidates.push(point);
                }
            }
            locus.symbolic = leading.symbolic;
        }
        PotentialShape::Multivariate => {
            candidates = tropical_leading(w, &vars, &mut locus.symbolic, &mut locus.unresolved);
        }
    }
    let lifted: Vec<Result<CriticalPoint, CritError>> =
        candidates.par_iter().map(|c| lift_point(w, &vars, c, config)).collect();
    for (leading, result) in candidates.into_iter().zip(lifted) {
        match result {
            Ok(p) => exact_points.push(p),
            Err(e @ (CritError::SingularJacobian(_) | CritError::NoConvergence { .. } | CritError::Invalid(_))) => {
                locus.unlifted.push(UnliftedPoint { leading, reason: e.to_string() })
            }
            Err(e) => return Err(e),
        }
    }
    for p in exact_points {
        if chart.domain.contains(&p.coordinates) {
            locus.points.push(p);
        } else {
            locus.excluded_points.push(p);
        }
    }
    Ok(locus)
}
