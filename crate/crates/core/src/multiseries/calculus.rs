use std::collections::{BTreeMap, HashMap};

use super::{Ambient, Precision, Series, SeriesError};
use crate::novikov::{ExtRational, GaussRational, Novikov, Rational};

fn min_nonpositive(v: ExtRational) -> Rational {
    match v {
        ExtRational::Finite(r) if r.is_negative() => r,
        _ => Rational::zero(),
    }
}

impl Series {
    /// Formal substitution `v ↦ σ(v)`; the images live in `target`.
    ///
    /// Negative powers invert the image at the given precision. When this
    /// series has a finite degree cutoff, its unknown tail must map to a
    /// convergent remainder: either every image has minimum degree `≥ 1`
    /// (the degree cutoff scales) or every image has positive valuation
    /// (the tail becomes an energy cutoff).
    pub fn substitute(
        &self,
        sigma: &BTreeMap<String, Series>,
        target: &Ambient,
        prec: &Precision,
    ) -> Result<Series, SeriesError> {
        for image in sigma.values() {
            if image.ambient() != target {
                return Err(SeriesError::VariableMismatch {
                    left: target.iter().cloned().collect(),
                    right: image.ambient().iter().cloned().collect(),
                });
            }
        }
        let image_of = |v: &String| {
            sigma
                .get(v)
                .ok_or_else(|| SeriesError::MissingAssignment { var: v.clone() })
        };
        let mut powers: HashMap<(String, i64), Series> = HashMap::new();
        let mut result = Series::zero(target).with_cutoffs(self.energy_cutoff(), None);
        // lowest valuation first, so eager truncation in products sees the tightest cutoffs early
        let mut order: Vec<_> = self.terms().iter().collect();
        order.sort_by_key(|(m, c)| (c.val(), (*m).clone()));
        for (m, c) in order {
            let mut img = Series::constant(target, c.clone());
            for (v, e) in m.exponents() {
                let key = (v.clone(), e);
                if !powers.contains_key(&key) {
                    let base = image_of(v)?;
                    let p = if e < 0 {
                        base.invert(prec)
                            .map_err(|_| SeriesError::NonInvertibleSubstitution { var: v.clone() })?
                            .pow(-e, prec)?
                    } else {
                        base.pow(e, prec)?
                    };
                    powers.insert(key.clone(), p);
                }
                img = img.mul(&powers[&key])?;
            }
            result = result.add(&img)?;
        }
        if let Some(d) = self.degree_cutoff() {
            let images = self
                .ambient()
                .iter()
                .map(|v| image_of(v).map(|s| (v, s)))
                .collect::<Result<Vec<_>, _>>()?;
            let min_deg = images.iter().filter_map(|(_, s)| s.min_degree()).min();
            if images.iter().all(|(_, s)| s.min_degree().is_none_or(|k| k >= 1)) {
                result = result.with_cutoffs(&ExtRational::Infinite, min_deg.map(|k| d * k));
            } else if let Some((v, _)) =
                images.iter().find(|(_, s)| s.val() <= ExtRational::Finite(Rational::zero()))
            {
                return Err(SeriesError::DivergentSubstitution { var: (*v).clone() });
            } else {
                let mu = ExtRational::min_of(images.iter().map(|(_, s)| s.val()).collect::<Vec<_>>().iter());
                let bound = mu
                    .finite()
                    .map(|mu| &(mu * &Rational::from_integer(d)) + &min_nonpositive(self.val()));
                if let Some(b) = bound {
                    result = result.with_cutoffs(&ExtRational::Finite(b), None);
                }
            }
        }
        Ok(result)
    }

    /// Term-by-term partial derivative; the degree cutoff drops by one.
    pub fn partial_derivative(&self, v: &str) -> Series {
        let terms = self.terms().iter().filter_map(|(m, c)| {
            let e = m.exponent(v);
            (e != 0).then(|| (m.shifted(v, -1), c.scale(&GaussRational::from_integer(e))))
        });
        Series::build(
            self.ambient().clone(),
            terms.collect::<Vec<_>>(),
            self.energy_cutoff().clone(),
            self.degree_cutoff().map(|d| d - 1),
        )
    }

    /// Evaluates at a point. Negative powers invert at the given precision.
    /// A finite degree cutoff requires every variable to have positive
    /// valuation, and becomes an energy cutoff on the value.
    pub fn evaluate(
        &self,
        point: &BTreeMap<String, Novikov>,
        prec: &Precision,
    ) -> Result<Novikov, SeriesError> {
        let value_of = |v: &String| {
            point
                .get(v)
                .ok_or_else(|| SeriesError::MissingAssignment { var: v.clone() })
        };
        let mut acc = Novikov::zero_with_cutoff(self.energy_cutoff().clone());
        // powers and inverses are shared between monomials
        let mut inverses: BTreeMap<&String, Novikov> = BTreeMap::new();
        let mut powers: BTreeMap<(&String, i64), Novikov> = BTreeMap::new();
        for (m, c) in self.terms() {
            let mut term = c.clone();
            for (v, e) in m.exponents() {
                let p = value_of(v)?;
                if e < 0 && p.is_zero() {
                    return Err(SeriesError::DivisionByZero { var: v.clone() });
                }
                if !powers.contains_key(&(v, e)) {
                    let power = if e < 0 {
                        if !inverses.contains_key(v) {
                            inverses.insert(v, p.invert_to(&prec.energy)?);
                        }
                        inverses[v].pow(-e, &prec.energy)?
                    } else {
                        p.pow(e, &prec.energy)?
                    };
                    powers.insert((v, e), power);
                }
                term = term.mul(&powers[&(v, e)]);
            }
            acc = acc.add(&term);
        }
        if let Some(d) = self.degree_cutoff() {
            let mut mu = ExtRational::Infinite;
            for v in self.ambient() {
                let val = value_of(v)?.val();
                if val <= ExtRational::Finite(Rational::zero()) {
                    return Err(SeriesError::DivergentEvaluation { var: v.clone() });
                }
                mu = std::cmp::min(mu, val);
            }
            if let ExtRational::Finite(mu) = mu {
                let bound = &(&mu * &Rational::from_integer(d)) + &min_nonpositive(self.val());
                acc = acc.truncate(&bound);
            }
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{ambient, Monomial};
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    fn var(a: &Ambient, n: &str) -> Series {
        Series::var(a, n).unwrap()
    }

    fn mono(a: &Ambient, pairs: &[(&str, i64)], c: Novikov) -> Series {
        Series::monomial(a, Monomial::from_pairs(pairs.iter().map(|(v, e)| (v.to_string(), *e))), c).unwrap()
    }

    #[test]
    fn gauge_twist_preserves_potential() {
        let a = ambient(["t", "y0", "z0"]);
        let w = mono(&a, &[("t", 1), ("y0", 1), ("z0", 1)], Novikov::one());
        for (ta, tb) in [(0, 2), (1, 1), (2, 0)] {
            let sigma = BTreeMap::from([
                ("t".to_string(), mono(&a, &[("t", -1)], Novikov::one())),
                ("y0".to_string(), mono(&a, &[("t", ta), ("y0", 1)], Novikov::one())),
                ("z0".to_string(), mono(&a, &[("t", tb), ("z0", 1)], Novikov::one())),
            ]);
            assert_eq!(w.substitute(&sigma, &a, &Precision::default()).unwrap(), w);
        }
    }

    #[test]
    fn laurent_derivative() {
        let a = ambient(["t"]);
        let w = var(&a, "t").add(&mono(&a, &[("t", -1)], Novikov::t_power(q(1, 1)))).unwrap();
        let dw = w.partial_derivative("t");
        assert_eq!(dw.to_string(), "-T*t^-2 + 1");
        assert!(Series::one(&a).partial_derivative("t").is_zero());
    }

    #[test]
    fn evaluation_examples() {
        let a = ambient(["t"]);
        let w = var(&a, "t").add(&mono(&a, &[("t", -1)], Novikov::t_power(q(1, 1)))).unwrap();
        let p = BTreeMap::from([("t".to_string(), Novikov::t_power(q(1, 2)))]);
        let value = w.evaluate(&p, &Precision::default()).unwrap();
        assert_eq!(value, Novikov::monomial(GaussRational::from_integer(2), q(1, 2)));
        let zero_point = BTreeMap::from([("t".to_string(), Novikov::zero())]);
        assert!(matches!(
            w.evaluate(&zero_point, &Precision::default()),
            Err(SeriesError::DivisionByZero { .. })
        ));
    }

    #[test]
    fn divergent_evaluation_of_truncated_series() {
        let a = ambient(["x"]);
        let geometric = Series::one(&a).add(&var(&a, "x")).unwrap().invert(&Precision::default()).unwrap();
        let p = BTreeMap::from([("x".to_string(), Novikov::one())]);
        assert!(matches!(
            geometric.evaluate(&p, &Precision::default()),
            Err(SeriesError::DivergentEvaluation { .. })
        ));
        let p = BTreeMap::from([("x".to_string(), Novikov::t_power(q(1, 1)))]);
        let value = geometric.evaluate(&p, &Precision::default()).unwrap();
        assert_eq!(value.cutoff(), &ExtRational::Finite(q(8, 1)));
        assert_eq!(value.terms().len(), 8);
    }
}
