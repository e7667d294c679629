use std::collections::BTreeMap;

use serde::Serialize;

use super::poly::{gaussian_roots, Poly};
use super::CritError;
use crate::multiseries::Series;
use crate::novikov::{ExtRational, GaussRational, Rational};

/// A root `x ≈ c·T^γ` of a univariate equation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LeadingRoot {
    pub exponent: Rational,
    pub coefficient: GaussRational,
    pub multiplicity: usize,
}

/// Leading solutions whose coefficient for `variable` is not a Gaussian
/// rational; these are reported but not lifted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SymbolicRoot {
    pub exponents: BTreeMap<String, Rational>,
    pub variable: String,
    /// Squarefree polynomial in `z` whose roots are the leading coefficients.
    pub polynomial: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct NewtonLeading {
    pub roots: Vec<LeadingRoot>,
    /// Multiplicity of `x = 0` as a root, when the equation has no pole there.
    pub zero_root: Option<usize>,
    pub symbolic: Vec<SymbolicRoot>,
}

/// Lower convex hull of points sorted by abscissa.
fn lower_hull(points: &[(i64, Rational)]) -> Vec<usize> {
    let mut hull: Vec<usize> = Vec::new();
    for i in 0..points.len() {
        while hull.len() >= 2 {
            let (a, b) = (&points[hull[hull.len() - 2]], &points[hull[hull.len() - 1]]);
            let c = &points[i];
            // b lies on or above segment a–c
            let lhs = &(&b.1 - &a.1) * &Rational::from_integer(c.0 - a.0);
            let rhs = &(&c.1 - &a.1) * &Rational::from_integer(b.0 - a.0);
            if lhs >= rhs {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    hull
}

/// Leading terms of the roots of a univariate Laurent equation, one slope of
/// the Newton polygon at a time.
pub fn newton_leading(dw: &Series, var: &str) -> Result<NewtonLeading, CritError> {
    if let Some(other) = dw.vars_used().into_iter().find(|v| v != var) {
        return Err(CritError::UnsupportedPotential(format!(
            "equation in `{var}` also involves `{other}`"
        )));
    }
    if dw.is_zero() {
        return Err(CritError::UnsupportedPotential("equation vanishes identically".into()));
    }
    let mut points: Vec<(i64, Rational)> = Vec::new();
    let mut leads: Vec<GaussRational> = Vec::new();
    for (m, c) in dw.terms() {
        if let (ExtRational::Finite(v), Some((_, lc))) = (c.val(), c.leading()) {
            points.push((m.exponent(var), v));
            leads.push(lc.clone());
        }
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by_key(|&i| points[i].0);
    let points: Vec<(i64, Rational)> = order.iter().map(|&i| points[i].clone()).collect();
    let leads: Vec<GaussRational> = order.iter().map(|&i| leads[i].clone()).collect();

    let mut out = NewtonLeading::default();
    let lowest = points[0].0;
    if lowest > 0 {
        out.zero_root = Some(lowest as usize);
    }
    if points.len() == 1 && out.zero_root.is_none() {
        return Err(CritError::NoRoots);
    }
    let hull = lower_hull(&points);
    for edge in hull.windows(2) {
        let (j1, v1) = &points[edge[0]];
        let (j2, v2) = &points[edge[1]];
        let gamma = &(v1 - v2) / &Rational::from_integer(j2 - j1);
        let level = v1 + &(&gamma * &Rational::from_integer(*j1));
        let mut coeffs = vec![GaussRational::zero(); (j2 - j1 + 1) as usize];
        for (k, (j, v)) in points.iter().enumerate() {
            if (j1..=j2).contains(&j) && &(v + &(&gamma * &Rational::from_integer(*j))) == &level {
                coeffs[(j - j1) as usize] = leads[k].clone();
            }
        }
        let (roots, leftover) = gaussian_roots(&Poly::new(coeffs));
        for (c, multiplicity) in roots {
            out.roots.push(LeadingRoot { exponent: gamma.clone(), coefficient: c, multiplicity });
        }
        if leftover.degree() > 0 {
            out.symbolic.push(SymbolicRoot {
                exponents: BTreeMap::from([(var.to_string(), gamma.clone())]),
                variable: var.to_string(),
                polynomial: leftover.to_string(),
                count: leftover.degree(),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_series, Params};
    use crate::multiseries::{ambient, Precision};

    fn leading(text: &str) -> Result<NewtonLeading, CritError> {
        let s = parse_series(text, &ambient(["t"]), &Params::new(), &Precision::default()).unwrap();
        newton_leading(&s, "t")
    }

    #[test]
    fn square_root_slope() {
        let n = leading("1 - T*t^-2").unwrap();
        let half = Rational::new(1, 2);
        assert_eq!(
            n.roots,
            vec![
                LeadingRoot { exponent: half.clone(), coefficient: GaussRational::from_integer(-1), multiplicity: 1 },
                LeadingRoot { exponent: half, coefficient: GaussRational::from_integer(1), multiplicity: 1 },
            ]
        );
        assert_eq!(n.zero_root, None);
    }

    #[test]
    fn trivial_equations() {
        let n = leading("t").unwrap();
        assert!(n.roots.is_empty());
        assert_eq!(n.zero_root, Some(1));
        assert_eq!(leading("1"), Err(CritError::NoRoots));
    }

    #[test]
    fn several_slopes_and_symbolic_roots() {
        // roots of valuation 0 (t = 1) and 1 (t = −T)
        let n = leading("(t - 1)*(t + T)").unwrap();
        assert_eq!(n.roots.len(), 2);
        assert!(n.roots.iter().any(|r| r.exponent == Rational::one() && r.coefficient == GaussRational::from_integer(-1)));
        // t³ = T: one rational leading coefficient, two irrational ones
        let n = leading("t^3 - T").unwrap();
        assert_eq!(n.roots.len(), 1);
        assert_eq!(n.symbolic[0].polynomial, "z^2 + z + 1");
    }
}
