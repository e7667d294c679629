//! Truncated Novikov series `Σ aᵢ T^{Aᵢ}` with rational exponents and
//! Gaussian-rational coefficients.
//!
//! Every scalar carries a cutoff energy: terms at or above it are unknown.
//! Exact values carry the cutoff `+∞`. Binary operations never claim more
//! precision than the less precise operand, and products shrink the cutoff
//! further when an operand has negative valuation.

pub mod rational;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use rational::{ExtRational, GaussRational, ParseRationalError, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NovikovError {
    #[error("zero is not invertible")]
    ZeroNotInvertible,
    #[error("inverse is an infinite series but no finite cutoff was set")]
    InfiniteCutoff,
}

/// Membership classes of the Novikov ring, its ideal, field and unit groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RingClass {
    Lambda,
    Lambda0,
    LambdaPlus,
    Lambda0Units,
    LambdaUnits,
}

/// An element of the Novikov field, known below its cutoff energy.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Novikov {
    terms: Vec<(Rational, GaussRational)>,
    cutoff: ExtRational,
}

impl Novikov {
    pub fn zero() -> Self {
        Novikov { terms: Vec::new(), cutoff: ExtRational::Infinite }
    }

    pub fn zero_with_cutoff(cutoff: ExtRational) -> Self {
        Novikov { terms: Vec::new(), cutoff }
    }

    pub fn one() -> Self {
        Novikov::constant(GaussRational::one())
    }

    pub fn constant(c: GaussRational) -> Self {
        Novikov::monomial(c, Rational::zero())
    }

    pub fn from_rational(r: Rational) -> Self {
        Novikov::constant(GaussRational::real(r))
    }

    pub fn from_integer(n: i64) -> Self {
        Novikov::constant(GaussRational::from_integer(n))
    }

    /// `c·T^exp`, exact.
    pub fn monomial(c: GaussRational, exp: Rational) -> Self {
        Novikov::from_terms([(exp, c)], ExtRational::Infinite)
    }

    /// `T^exp`, exact.
    pub fn t_power(exp: Rational) -> Self {
        Novikov::monomial(GaussRational::one(), exp)
    }

    /// Builds a scalar from arbitrary terms, merging equal exponents and
    /// dropping zero coefficients and terms at or above the cutoff.
    pub fn from_terms(
        terms: impl IntoIterator<Item = (Rational, GaussRational)>,
        cutoff: ExtRational,
    ) -> Self {
        let mut acc: BTreeMap<Rational, GaussRational> = BTreeMap::new();
        for (e, c) in terms {
            if !cutoff.exceeds(&e) {
                continue;
            }
            let slot = acc.entry(e).or_default();
            *slot = &*slot + &c;
        }
        Novikov {
            terms: acc.into_iter().filter(|(_, c)| !c.is_zero()).collect(),
            cutoff,
        }
    }

    pub fn terms(&self) -> &[(Rational, GaussRational)] {
        &self.terms
    }

    pub fn cutoff(&self) -> &ExtRational {
        &self.cutoff
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_exact(&self) -> bool {
        self.cutoff.is_infinite()
    }

    /// Single-term scalar `c·T^e`.
    pub fn is_monomial(&self) -> bool {
        self.terms.len() == 1
    }

    /// Smallest exponent with nonzero coefficient; `+∞` for zero.
    pub fn val(&self) -> ExtRational {
        match self.terms.first() {
            Some((e, _)) => ExtRational::Finite(e.clone()),
            None => ExtRational::Infinite,
        }
    }

    pub fn leading(&self) -> Option<(&Rational, &GaussRational)> {
        self.terms.first().map(|(e, c)| (e, c))
    }

    /// Coefficient of `T^exp` (zero when absent).
    pub fn coefficient(&self, exp: &Rational) -> GaussRational {
        self.terms
            .binary_search_by(|(e, _)| e.cmp(exp))
            .map(|i| self.terms[i].1.clone())
            .unwrap_or_default()
    }

    /// The constant (`T^0`) coefficient.
    pub fn constant_term(&self) -> GaussRational {
        self.coefficient(&Rational::zero())
    }

    /// Drops all terms with exponent `≥ energy` and lowers the cutoff to it.
    pub fn truncate(&self, energy: &Rational) -> Novikov {
        self.truncate_ext(&ExtRational::Finite(energy.clone()))
    }

    pub fn truncate_ext(&self, energy: &ExtRational) -> Novikov {
        let cutoff = if *energy < self.cutoff { energy.clone() } else { self.cutoff.clone() };
        Novikov {
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| cutoff.exceeds(e))
                .cloned()
                .collect(),
            cutoff,
        }
    }

    /// Forgets the cutoff, treating the stored terms as an exact value.
    pub fn to_exact(&self) -> Novikov {
        Novikov { terms: self.terms.clone(), cutoff: ExtRational::Infinite }
    }

    pub fn add(&self, other: &Novikov) -> Novikov {
        let cutoff = std::cmp::min(&self.cutoff, &other.cutoff).clone();
        Novikov::from_terms(
            self.terms.iter().chain(other.terms.iter()).cloned(),
            cutoff,
        )
    }

    pub fn neg(&self) -> Novikov {
        Novikov {
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect(),
            cutoff: self.cutoff.clone(),
        }
    }

    pub fn sub(&self, other: &Novikov) -> Novikov {
        self.add(&other.neg())
    }

    /// Cutoff of a product: never above either operand's cutoff, and shifted
    /// down by a negative valuation (or negative cutoff) of the other factor.
    fn product_cutoff(&self, other: &Novikov) -> ExtRational {
        let candidates = [
            self.cutoff.clone(),
            other.cutoff.clone(),
            self.cutoff.plus(std::cmp::min(&other.val(), &other.cutoff)),
            other.cutoff.plus(std::cmp::min(&self.val(), &self.cutoff)),
        ];
        ExtRational::min_of(candidates.iter())
    }

    pub fn mul(&self, other: &Novikov) -> Novikov {
        let cutoff = self.product_cutoff(other);
        Novikov::from_terms(raw_product(&self.terms, &other.terms, &cutoff), cutoff)
    }

    pub fn scale(&self, c: &GaussRational) -> Novikov {
        if c.is_zero() {
            return Novikov::zero_with_cutoff(self.cutoff.clone());
        }
        Novikov {
            terms: self.terms.iter().map(|(e, a)| (e.clone(), a * c)).collect(),
            cutoff: self.cutoff.clone(),
        }
    }

    /// Multiplication by `T^exp`; shifts the cutoff as well.
    pub fn shift(&self, exp: &Rational) -> Novikov {
        Novikov {
            terms: self.terms.iter().map(|(e, c)| (e + exp, c.clone())).collect(),
            cutoff: self.cutoff.plus_rational(exp),
        }
    }

    /// Inverse in the Novikov field.
    ///
    /// A monomial inverts exactly. Otherwise the inverse is an infinite
    /// geometric series, computed up to the cutoff `C − 2·val(s)` where `C` is
    /// this scalar's own cutoff.
    pub fn invert(&self) -> Result<Novikov, NovikovError> {
        let (v, a0) = self.leading().ok_or(NovikovError::ZeroNotInvertible)?;
        let a0_inv = a0.inverse().expect("leading coefficient is nonzero");
        let target = self.cutoff.plus_rational(&(-(v + v)));
        if self.is_monomial() {
            return Ok(Novikov::from_terms([(-v, a0_inv)], target));
        }
        let ExtRational::Finite(target_energy) = target.clone() else {
            return Err(NovikovError::InfiniteCutoff);
        };
        // self = a0 T^v (1 + r), all exponents of r positive
        let r: Vec<(Rational, GaussRational)> = self.terms[1..]
            .iter()
            .map(|(e, c)| (e - v, -(c * &a0_inv)))
            .collect();
        let need = ExtRational::Finite(&target_energy + v);
        // 1/(1 - r) = Σ b_e T^e with b_0 = 1 and b_e = Σ_k r_k b_{e-k}; every
        // exponent with b_e ≠ 0 is reached from a smaller one by adding some k.
        let mut sum: BTreeMap<Rational, GaussRational> = BTreeMap::new();
        let mut pending = BTreeSet::from([Rational::zero()]);
        while let Some(e) = pending.pop_first() {
            let b = if e.is_zero() {
                GaussRational::one()
            } else {
                let mut acc = GaussRational::zero();
                for (k, c) in r.iter().take_while(|(k, _)| *k <= e) {
                    if let Some(prev) = sum.get(&(&e - k)) {
                        acc = &acc + &(c * prev);
                    }
                }
                acc
            };
            if b.is_zero() {
                continue;
            }
            for (k, _) in &r {
                let next = &e + k;
                if !need.exceeds(&next) {
                    break;
                }
                pending.insert(next);
            }
            sum.insert(e, b);
        }
        Ok(Novikov::from_terms(
            sum.into_iter().map(|(e, c)| (e - v, &c * &a0_inv)),
            target,
        ))
    }

    /// Inverse reliable up to `energy`, truncating this scalar first when it is
    /// exact. Monomials invert exactly regardless.
    pub fn invert_to(&self, energy: &Rational) -> Result<Novikov, NovikovError> {
        let v = self.val();
        let ExtRational::Finite(v) = v else {
            return Err(NovikovError::ZeroNotInvertible);
        };
        if self.is_monomial() {
            return self.invert();
        }
        if *energy <= -&v {
            // the inverse has valuation -v, so nothing of it lies below `energy`
            return Ok(Novikov::zero_with_cutoff(ExtRational::Finite(energy.clone())));
        }
        self.truncate(&(energy + &v + &v)).invert()
    }

    /// Integer power; negative powers invert up to `energy`.
    pub fn pow(&self, n: i64, energy: &Rational) -> Result<Novikov, NovikovError> {
        if n < 0 {
            return self.invert_to(energy)?.pow(-n, energy);
        }
        let mut acc = Novikov::one();
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        Ok(acc)
    }

    /// Equality of the known parts: the difference vanishes below the common cutoff.
    pub fn eq_mod(&self, other: &Novikov) -> bool {
        self.sub(other).is_zero()
    }

    pub fn classify(&self) -> BTreeSet<RingClass> {
        let mut out = BTreeSet::from([RingClass::Lambda]);
        let v = self.val();
        let zero = ExtRational::Finite(Rational::zero());
        if v >= zero {
            out.insert(RingClass::Lambda0);
        }
        if v > zero {
            out.insert(RingClass::LambdaPlus);
        }
        if v == zero {
            out.insert(RingClass::Lambda0Units);
        }
        if !self.is_zero() {
            out.insert(RingClass::LambdaUnits);
        }
        out
    }
}

/// Term-list product keeping only exponents below `bound`.
fn raw_product(
    a: &[(Rational, GaussRational)],
    b: &[(Rational, GaussRational)],
    bound: &ExtRational,
) -> Vec<(Rational, GaussRational)> {
    let mut out = Vec::new();
    for (ea, ca) in a {
        for (eb, cb) in b {
            let e = ea + eb;
            if !bound.exceeds(&e) {
                break;
            }
            out.push((e, ca * cb));
        }
    }
    out
}

pub(crate) fn format_t_power(exp: &Rational) -> String {
    if *exp == Rational::one() {
        "T".to_string()
    } else if exp.is_integer() {
        format!("T^{exp}")
    } else {
        format!("T^({exp})")
    }
}

/// Formats `c·(rest)` where `rest` is a product string (possibly empty).
pub(crate) fn format_scaled(c: &GaussRational, rest: &str) -> String {
    if rest.is_empty() {
        return if c.is_compound() { format!("({c})") } else { c.to_string() };
    }
    if c.is_one() {
        rest.to_string()
    } else if *c == -GaussRational::one() {
        format!("-{rest}")
    } else if c.is_compound() {
        format!("({c})*{rest}")
    } else {
        format!("{c}*{rest}")
    }
}

/// Joins signed summands as `a + b - c`.
pub(crate) fn join_sum(parts: impl IntoIterator<Item = String>) -> String {
    let mut out = String::new();
    for p in parts {
        if out.is_empty() {
            out = p;
        } else if let Some(rest) = p.strip_prefix('-') {
            out.push_str(" - ");
            out.push_str(rest);
        } else {
            out.push_str(" + ");
            out.push_str(&p);
        }
    }
    if out.is_empty() {
        "0".to_string()
    } else {
        out
    }
}

impl Novikov {
    /// The value without its cutoff, in the expression syntax.
    pub fn value_string(&self) -> String {
        join_sum(self.terms.iter().map(|(e, c)| {
            if e.is_zero() {
                format_scaled(c, "")
            } else {
                format_scaled(c, &format_t_power(e))
            }
        }))
    }
}

impl fmt::Display for Novikov {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.cutoff {
            ExtRational::Infinite => write!(f, "{}", self.value_string()),
            ExtRational::Finite(c) if self.is_zero() => write!(f, "O({})", format_t_power(c)),
            ExtRational::Finite(c) => {
                write!(f, "{} + O({})", self.value_string(), format_t_power(c))
            }
        }
    }
}

impl fmt::Debug for Novikov {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Serialize, Deserialize)]
struct TermRepr {
    exp: Rational,
    re: Rational,
    im: Rational,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct ScalarObject {
    terms: Vec<TermRepr>,
    cutoff: ExtRational,
}

impl ScalarObject {
    pub(crate) fn into_scalar(self) -> Novikov {
        Novikov::from_terms(
            self.terms
                .into_iter()
                .map(|t| (t.exp, GaussRational::new(t.re, t.im))),
            self.cutoff,
        )
    }
}

impl Serialize for Novikov {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ScalarObject {
            terms: self
                .terms
                .iter()
                .map(|(e, c)| TermRepr { exp: e.clone(), re: c.re.clone(), im: c.im.clone() })
                .collect(),
            cutoff: self.cutoff.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Novikov {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        ScalarObject::deserialize(d).map(ScalarObject::into_scalar)
    }
}
