//! Univariate polynomials over the Gaussian rationals and their exact roots.

use std::fmt;

use num_complex::Complex64;

use crate::novikov::{GaussRational, Rational};

/// Coefficient of `z^k` at index `k`; no trailing zeros.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Poly(Vec<GaussRational>);

impl Poly {
    pub fn new(mut coeffs: Vec<GaussRational>) -> Self {
        while coeffs.last().is_some_and(GaussRational::is_zero) {
            coeffs.pop();
        }
        Poly(coeffs)
    }

    pub fn coeffs(&self) -> &[GaussRational] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    /// Degree; the zero polynomial has degree 0 here.
    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn eval(&self, z: &GaussRational) -> GaussRational {
        self.0.iter().rev().fold(GaussRational::zero(), |acc, c| &(&acc * z) + c)
    }

    pub fn derivative(&self) -> Poly {
        Poly::new(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c.scale(&Rational::from_integer(k as i64)))
                .collect(),
        )
    }

    fn monic(&self) -> Poly {
        match self.0.last() {
            None => self.clone(),
            Some(lead) => {
                let inv = lead.inverse().expect("nonzero leading coefficient");
                Poly(self.0.iter().map(|c| c * &inv).collect())
            }
        }
    }

    /// Quotient and remainder; `d` must be nonzero.
    pub fn divrem(&self, d: &Poly) -> (Poly, Poly) {
        let lead_inv = d.0.last().expect("nonzero divisor").inverse().expect("nonzero");
        let mut rem = self.0.clone();
        if rem.len() < d.0.len() {
            return (Poly(Vec::new()), self.clone());
        }
        let mut quot = vec![GaussRational::zero(); rem.len() - d.0.len() + 1];
        for k in (0..quot.len()).rev() {
            let c = &rem[k + d.0.len() - 1] * &lead_inv;
            if !c.is_zero() {
                for (j, dj) in d.0.iter().enumerate() {
                    rem[k + j] = &rem[k + j] - &(&c * dj);
                }
            }
            quot[k] = c;
        }
        (Poly::new(quot), Poly::new(rem))
    }

    /// Monic greatest common divisor.
    pub fn gcd(&self, other: &Poly) -> Poly {
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let (_, r) = a.divrem(&b);
            a = b;
            b = r;
        }
        a.monic()
    }

    /// Product of the distinct irreducible factors, monic.
    pub fn squarefree(&self) -> Poly {
        let g = self.gcd(&self.derivative());
        self.divrem(&g).0.monic()
    }

    /// Division by `z − r`, when exact.
    fn deflate(&self, r: &GaussRational) -> Option<Poly> {
        let lin = Poly(vec![-r, GaussRational::one()]);
        let (q, rem) = self.divrem(&lin);
        rem.is_zero().then_some(q)
    }

    fn to_complex(&self) -> Vec<Complex64> {
        self.0.iter().map(GaussRational::to_complex_f64).collect()
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts = self.0.iter().enumerate().rev().filter(|(_, c)| !c.is_zero()).map(|(k, c)| {
            let z = match k {
                0 => String::new(),
                1 => "z".to_string(),
                _ => format!("z^{k}"),
            };
            if z.is_empty() {
                c.to_string()
            } else {
                crate::novikov::format_scaled(c, &z)
            }
        });
        let s = crate::novikov::join_sum(parts);
        write!(f, "{}", if s.is_empty() { "0".to_string() } else { s })
    }
}

/// Simultaneous Weierstrass iteration for all roots of a monic polynomial.
fn durand_kerner(monic: &[Complex64]) -> Vec<Complex64> {
    let n = monic.len() - 1;
    let eval = |z: Complex64| monic.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c);
    let radius = 1.0 + monic[..n].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..n).map(|k| seed.powu(k as u32) * radius).collect();
    for _ in 0..2000 {
        let mut delta = 0.0f64;
        for i in 0..n {
            let denom = (0..n).filter(|&j| j != i).fold(Complex64::new(1.0, 0.0), |acc, j| acc * (roots[i] - roots[j]));
            if denom.norm() == 0.0 {
                roots[i] += Complex64::new(1e-9, 1e-9);
                continue;
            }
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 * radius {
            break;
        }
    }
    roots
}

fn rationalize(x: f64) -> Vec<Rational> {
    [1_000, 100_000, 10_000_000]
        .into_iter()
        .filter_map(|d| Rational::approximate(x, d))
        .collect()
}

/// Roots of `p` in the Gaussian rationals with multiplicities, and the
/// squarefree part of what remains after removing them.
pub fn gaussian_roots(p: &Poly) -> (Vec<(GaussRational, usize)>, Poly) {
    let mut rest = p.clone();
    let mut roots: Vec<(GaussRational, usize)> = Vec::new();
    if p.degree() == 0 {
        return (roots, Poly::new(vec![GaussRational::one()]));
    }
    let sf = p.squarefree();
    let candidates: Vec<GaussRational> = if sf.degree() == 1 {
        vec![-&sf.0[0]]
    } else {
        durand_kerner(&sf.to_complex())
            .into_iter()
            .flat_map(|z| {
                let res = rationalize(z.re);
                let ims = rationalize(z.im);
                res.into_iter()
                    .flat_map(move |re| ims.clone().into_iter().map(move |im| GaussRational::new(re.clone(), im)))
            })
            .collect()
    };
    for r in candidates {
        if roots.iter().any(|(s, _)| *s == r) || !sf.eval(&r).is_zero() {
            continue;
        }
        let mut mult = 0;
        while let Some(q) = rest.deflate(&r) {
            rest = q;
            mult += 1;
        }
        roots.push((r, mult));
    }
    roots.sort();
    let leftover = if rest.degree() == 0 { Poly::new(vec![GaussRational::one()]) } else { rest.squarefree() };
    (roots, leftover)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(re: i64, im: i64) -> GaussRational {
        GaussRational::new(Rational::from_integer(re), Rational::from_integer(im))
    }

    fn poly(cs: &[(i64, i64)]) -> Poly {
        Poly::new(cs.iter().map(|&(a, b)| g(a, b)).collect())
    }

    #[test]
    fn squares_and_units() {
        // z² − 1
        let (roots, rest) = gaussian_roots(&poly(&[(-1, 0), (0, 0), (1, 0)]));
        assert_eq!(roots, vec![(g(-1, 0), 1), (g(1, 0), 1)]);
        assert_eq!(rest.degree(), 0);
        // z² + 1
        let (roots, _) = gaussian_roots(&poly(&[(1, 0), (0, 0), (1, 0)]));
        assert_eq!(roots.len(), 2);
        assert!(roots.iter().any(|(r, _)| *r == GaussRational::i()));
    }

    #[test]
    fn repeated_and_fractional_roots() {
        // (2z − 1)² (z + 3) = 4z³ + 8z² − 11z + 3
        let p = poly(&[(3, 0), (-11, 0), (8, 0), (4, 0)]);
        let (roots, rest) = gaussian_roots(&p);
        assert_eq!(roots, vec![(g(-3, 0), 1), (GaussRational::real(Rational::new(1, 2)), 2)]);
        assert_eq!(rest.degree(), 0);
    }

    #[test]
    fn irrational_roots_are_left_over() {
        // (z − 1)(z² + z + 1) = z³ − 1
        let (roots, rest) = gaussian_roots(&poly(&[(-1, 0), (0, 0), (0, 0), (1, 0)]));
        assert_eq!(roots, vec![(g(1, 0), 1)]);
        assert_eq!(rest.to_string(), "z^2 + z + 1");
        // z² − 2
        let (roots, rest) = gaussian_roots(&poly(&[(-2, 0), (0, 0), (1, 0)]));
        assert!(roots.is_empty());
        assert_eq!(rest.to_string(), "z^2 - 2");
    }
}
