use std::collections::BTreeMap;

use super::CritError;
use crate::multiseries::{Precision, Series};
use crate::novikov::{ExtRational, GaussRational, Novikov, Rational};

const MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct HenselResult {
    pub point: BTreeMap<String, Novikov>,
    /// Cutoff of the coordinates; `inf` for an exact solution.
    pub lifted_to: ExtRational,
    /// Smallest valuation among the equation values at the point.
    pub residual: ExtRational,
    pub iterations: usize,
}

/// Valuation of a value, with a zero value counting at its cutoff.
pub(crate) fn residual_val(x: &Novikov) -> ExtRational {
    if x.is_zero() {
        x.cutoff().clone()
    } else {
        x.val()
    }
}

/// `min_k (val(c_k) + Σ m_kj γ_j)` over the terms of `s`.
pub(crate) fn tropical_value(s: &Series, gamma: &BTreeMap<String, Rational>) -> ExtRational {
    let mut best = ExtRational::Infinite;
    for (m, c) in s.terms() {
        if let ExtRational::Finite(v) = c.val() {
            let mut value = v;
            for (var, e) in m.exponents() {
                value = &value + &(&gamma[var] * &Rational::from_integer(e));
            }
            best = best.min(ExtRational::Finite(value));
        }
    }
    best
}

fn gauss_det(mut a: Vec<Vec<GaussRational>>) -> GaussRational {
    let n = a.len();
    let mut det = GaussRational::one();
    for k in 0..n {
        let Some(p) = (k..n).find(|&r| !a[r][k].is_zero()) else {
            return GaussRational::zero();
        };
        if p != k {
            a.swap(p, k);
            det = -det;
        }
        det = &det * &a[k][k];
        let inv = a[k][k].inverse().expect("nonzero pivot");
        for r in k + 1..n {
            let f = &a[r][k] * &inv;
            if !f.is_zero() {
                for c in k..n {
                    let sub = &f * &a[k][c];
                    a[r][c] = &a[r][c] - &sub;
                }
            }
        }
    }
    det
}

/// Solves `a·x = b` over the Novikov field, pivoting on the smallest valuation.
fn solve_linear(
    mut a: Vec<Vec<Novikov>>,
    mut b: Vec<Novikov>,
    energy: &Rational,
) -> Result<Vec<Novikov>, CritError> {
    let n = b.len();
    let singular = || CritError::SingularJacobian("Jacobian is singular along the iteration".into());
    for k in 0..n {
        let p = (k..n)
            .filter(|&r| !a[r][k].is_zero())
            .min_by_key(|&r| a[r][k].val())
            .ok_or_else(singular)?;
        a.swap(p, k);
        b.swap(p, k);
        let inv = a[k][k].invert_to(energy).map_err(|_| singular())?;
        for r in k + 1..n {
            if a[r][k].is_zero() {
                continue;
            }
            let f = a[r][k].mul(&inv);
            for c in k..n {
                let sub = f.mul(&a[k][c]);
                a[r][c] = a[r][c].sub(&sub).truncate(energy);
            }
            b[r] = b[r].sub(&f.mul(&b[k])).truncate(energy);
        }
    }
    let mut x = vec![Novikov::zero(); n];
    for k in (0..n).rev() {
        let mut acc = b[k].clone();
        for c in k + 1..n {
            acc = acc.sub(&a[k][c].mul(&x[c]));
        }
        let inv = a[k][k].invert_to(energy).map_err(|_| singular())?;
        x[k] = acc.mul(&inv).truncate(energy);
    }
    Ok(x)
}

fn describe(point: &BTreeMap<String, Novikov>) -> String {
    point.iter().map(|(v, x)| format!("{v} = {x}")).collect::<Vec<_>>().join(", ")
}

/// Newton iteration over the Novikov field from a leading solution.
///
/// With `γ` the valuations of the leading solution and `μᵢ` the tropical
/// values of the equations there, the leading Jacobian has entries
/// `[T^{μᵢ−γⱼ}] ∂ⱼFᵢ` and must be invertible over the Gaussian rationals.
/// Iteration stops once every equation value has valuation at least
/// `target` and the coordinate error bound `γⱼ + minᵢ(val Fᵢ − μᵢ)` reaches
/// the reported cutoff.
pub fn hensel_lift(
    system: &[Series],
    unknowns: &[String],
    leading: &BTreeMap<String, Novikov>,
    target: &Rational,
    prec: &Precision,
) -> Result<HenselResult, CritError> {
    let n = unknowns.len();
    if system.len() != n {
        return Err(CritError::Invalid(format!("{} equations for {n} unknowns", system.len())));
    }
    for f in system {
        if let Some(v) = f.vars_used().into_iter().find(|v| !unknowns.contains(v)) {
            return Err(CritError::Invalid(format!("equation involves `{v}`, which is not an unknown")));
        }
    }
    let mut gamma = BTreeMap::new();
    let mut x0 = BTreeMap::new();
    for u in unknowns {
        let lead = leading
            .get(u)
            .and_then(Novikov::leading)
            .ok_or_else(|| CritError::Invalid(format!("leading solution has no nonzero value for `{u}`")))?;
        gamma.insert(u.clone(), lead.0.clone());
        x0.insert(u.clone(), Novikov::monomial(lead.1.clone(), lead.0.clone()));
    }
    let mu: Vec<Rational> = system
        .iter()
        .map(|f| match tropical_value(f, &gamma) {
            ExtRational::Finite(m) => Ok(m),
            ExtRational::Infinite => Err(CritError::SingularJacobian("an equation vanishes identically".into())),
        })
        .collect::<Result<_, _>>()?;

    let spread = gamma.values().chain(mu.iter()).map(Rational::abs).max().unwrap_or_else(Rational::zero);
    let mut work = Precision {
        energy: &(target + &(&spread + &spread)) + &(&spread + &Rational::from_integer(2)),
        degree: prec.degree,
    };
    let mut leading_jacobian = vec![vec![GaussRational::zero(); n]; n];
    for (i, f) in system.iter().enumerate() {
        let value = f.evaluate(&x0, &work)?;
        if !value.coefficient(&mu[i]).is_zero() {
            return Err(CritError::Invalid(format!(
                "{} does not solve the leading-order equations",
                describe(&x0)
            )));
        }
        for (j, u) in unknowns.iter().enumerate() {
            let d = f.partial_derivative(u).evaluate(&x0, &work)?;
            leading_jacobian[i][j] = d.coefficient(&(&mu[i] - &gamma[u]));
        }
    }
    if gauss_det(leading_jacobian).is_zero() {
        return Err(CritError::SingularJacobian(format!(
            "leading Jacobian at {} is singular",
            describe(&x0)
        )));
    }

    let min_gamma = gamma.values().min().expect("at least one unknown").clone();
    let slack = unknowns
        .iter()
        .flat_map(|u| mu.iter().map(|m| &gamma[u] - m))
        .max()
        .expect("at least one unknown")
        .max(Rational::zero());
    let goal = target + &slack;
    let needed = ExtRational::Finite(&goal - &min_gamma);

    let mut x = x0;
    let mut best = ExtRational::Finite(Rational::zero());
    for iteration in 0..MAX_ITERATIONS {
        // a finite cutoff keeps intermediate products below the working energy
        let at: BTreeMap<String, Novikov> = x.iter().map(|(v, c)| (v.clone(), c.truncate(&work.energy))).collect();
        let mut values: Vec<Novikov> =
            system.iter().map(|f| f.evaluate(&at, &work)).collect::<Result<_, _>>()?;
        if values.iter().all(Novikov::is_zero) {
            // possibly an exact solution, which only exact evaluation can confirm
            values = system.iter().map(|f| f.evaluate(&x, &work)).collect::<Result<_, _>>()?;
        }
        let residual = ExtRational::min_of(values.iter().map(residual_val).collect::<Vec<_>>().iter());
        if residual.is_infinite() {
            log::debug!("exact solution after {iteration} Newton steps");
            return Ok(HenselResult {
                point: x,
                lifted_to: ExtRational::Infinite,
                residual,
                iterations: iteration,
            });
        }
        let delta = ExtRational::min_of(
            values
                .iter()
                .zip(&mu)
                .map(|(v, m)| residual_val(v).plus_rational(&-m))
                .collect::<Vec<_>>()
                .iter(),
        );
        if delta >= needed && residual >= ExtRational::Finite(target.clone()) {
            log::debug!("lifted to energy {goal} after {iteration} Newton steps");
            return Ok(HenselResult {
                point: x.into_iter().map(|(v, c)| (v, c.truncate(&goal))).collect(),
                lifted_to: ExtRational::Finite(goal),
                residual,
                iterations: iteration,
            });
        }
        let stalled = delta <= best;
        best = best.max(delta.clone());
        if values.iter().all(Novikov::is_zero) || stalled {
            work.energy = &(&work.energy + &work.energy) + &Rational::one();
            if !values.iter().all(Novikov::is_zero) {
                best = ExtRational::Finite(Rational::zero());
            }
            continue;
        }
        let jac: Vec<Vec<Novikov>> = system
            .iter()
            .map(|f| {
                unknowns
                    .iter()
                    .map(|u| f.partial_derivative(u).evaluate(&at, &work))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<_, _>>()?;
        let step = solve_linear(jac, values, &work.energy)?;
        // a Newton step at most doubles the accuracy `delta`; terms above that
        // are not yet meaningful and only inflate the coefficients
        let reach = match &delta {
            ExtRational::Finite(d) => &(d + d) + &Rational::one(),
            ExtRational::Infinite => work.energy.clone(),
        };
        for (u, s) in unknowns.iter().zip(step) {
            let keep = std::cmp::min(work.energy.clone(), &gamma[u] + &reach);
            let next = x[u].sub(&s).truncate(&keep).to_exact();
            x.insert(u.clone(), next);
        }
    }
    Err(CritError::NoConvergence { iterations: MAX_ITERATIONS })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_scalar, parse_series, Params};
    use crate::multiseries::ambient;

    fn lift(eq: &str, start: &str, target: i64) -> Result<HenselResult, CritError> {
        let prec = Precision::default();
        let f = parse_series(eq, &ambient(["t"]), &Params::new(), &prec).unwrap();
        let x0 = parse_scalar(start, &Params::new(), &prec).unwrap();
        hensel_lift(
            &[f],
            &["t".to_string()],
            &BTreeMap::from([("t".to_string(), x0)]),
            &Rational::from_integer(target),
            &prec,
        )
    }

    #[test]
    fn exact_root_needs_no_correction() {
        let r = lift("1 - T*t^-2", "T^(1/2)", 5).unwrap();
        assert_eq!(r.point["t"], Novikov::t_power(Rational::new(1, 2)));
        assert_eq!(r.iterations, 0);
        assert!(r.residual.is_infinite());
    }

    #[test]
    fn perturbed_root_gains_corrections() {
        // t² + T²·t = T  gives  t = T^{1/2} − T²/2 + T^{7/2}/8 + ...
        let r = lift("1 - T*t^-2 + T^2*t^-1", "T^(1/2)", 3).unwrap();
        let t = &r.point["t"];
        assert!(r.iterations > 0);
        assert_eq!(t.coefficient(&Rational::new(1, 2)), GaussRational::one());
        assert_eq!(t.coefficient(&Rational::from_integer(1)), GaussRational::zero());
        assert_eq!(t.coefficient(&Rational::from_integer(2)), GaussRational::real(Rational::new(-1, 2)));
        assert!(r.residual >= ExtRational::Finite(Rational::from_integer(3)));
        assert!(t.cutoff() >= &ExtRational::Finite(Rational::from_integer(3)));
    }

    #[test]
    fn degenerate_root_is_refused() {
        // (t − 1)² has a double root
        assert!(matches!(lift("t^2 - 2*t + 1", "1", 3), Err(CritError::SingularJacobian(_))));
        assert!(matches!(lift("t^2 - 1", "2", 3), Err(CritError::Invalid(_))));
    }
}
