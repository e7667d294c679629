use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A Laurent monomial `Π vᵢ^{eᵢ}` in named variables. Zero exponents are never stored.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial(BTreeMap<String, i64>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(BTreeMap::new())
    }

    pub fn var(name: &str) -> Self {
        Monomial::from_pairs([(name.to_string(), 1)])
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, i64)>) -> Self {
        let mut map = BTreeMap::new();
        for (v, e) in pairs {
            *map.entry(v).or_insert(0) += e;
        }
        map.retain(|_, e| *e != 0);
        Monomial(map)
    }

    pub fn exponent(&self, v: &str) -> i64 {
        self.0.get(v).copied().unwrap_or(0)
    }

    pub fn exponents(&self) -> impl Iterator<Item = (&String, i64)> {
        self.0.iter().map(|(v, e)| (v, *e))
    }

    pub fn vars(&self) -> impl Iterator<Item = &String> {
        self.0.keys()
    }

    /// Total degree `Σ eᵢ`.
    pub fn degree(&self) -> i64 {
        self.0.values().sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn has_negative_exponent(&self) -> bool {
        self.0.values().any(|e| *e < 0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial::from_pairs(
            self.0
                .iter()
                .chain(other.0.iter())
                .map(|(v, e)| (v.clone(), *e)),
        )
    }

    pub fn pow(&self, n: i64) -> Monomial {
        Monomial::from_pairs(self.0.iter().map(|(v, e)| (v.clone(), e * n)))
    }

    /// The monomial with the exponent of `v` changed by `delta`.
    pub fn shifted(&self, v: &str, delta: i64) -> Monomial {
        self.mul(&Monomial::from_pairs([(v.to_string(), delta)]))
    }

    pub fn as_map(&self) -> &BTreeMap<String, i64> {
        &self.0
    }
}

/// Graded order: total degree first, then lexicographic on the exponent map.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.iter().cmp(other.0.iter()))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|(v, e)| if *e == 1 { v.clone() } else { format!("{v}^{e}") })
            .collect();
        write!(f, "{}", parts.join("*"))
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for Monomial {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Monomial {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let map = BTreeMap::<String, i64>::deserialize(d)?;
        Ok(Monomial::from_pairs(map))
    }
}
