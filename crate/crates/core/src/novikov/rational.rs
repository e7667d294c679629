//! Exact rationals and Gaussian rationals.
//!
//! `Rational` carries energies, areas and exponents. `GaussRational` carries
//! the complex coefficients of Novikov series, restricted to Q(i) so every
//! computation stays exact.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// An exact rational number in canonical reduced form (denominator positive).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Rational(BigRational);

impl Rational {
    pub fn new(numer: i64, denom: i64) -> Self {
        assert!(denom != 0, "zero denominator");
        Rational(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn from_integer(n: i64) -> Self {
        Rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn from_big(numer: BigInt, denom: BigInt) -> Self {
        assert!(!denom.is_zero(), "zero denominator");
        Rational(BigRational::new(numer, denom))
    }

    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn abs(&self) -> Self {
        Rational(self.0.abs())
    }

    pub fn recip(&self) -> Self {
        Rational(self.0.recip())
    }

    pub fn floor(&self) -> Self {
        Rational(self.0.floor())
    }

    pub fn ceil(&self) -> Self {
        Rational(self.0.ceil())
    }

    /// Integer value, if this rational is an integer fitting in `i64`.
    pub fn to_i64(&self) -> Option<i64> {
        if self.is_integer() {
            self.0.numer().to_i64()
        } else {
            None
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn pow(&self, exp: i32) -> Self {
        Rational(num_traits::Pow::pow(&self.0, exp))
    }

    /// Best rational approximation with denominator at most `max_denom`.
    pub fn approximate(x: f64, max_denom: i64) -> Option<Self> {
        if !x.is_finite() {
            return None;
        }
        // continued fraction convergents
        let (mut h0, mut h1) = (0i128, 1i128);
        let (mut k0, mut k1) = (1i128, 0i128);
        let mut v = x;
        for _ in 0..64 {
            let a = v.floor();
            if a.abs() > 1e15 {
                break;
            }
            let ai = a as i128;
            let h2 = ai * h1 + h0;
            let k2 = ai * k1 + k0;
            if k2 > max_denom as i128 {
                break;
            }
            h0 = h1;
            h1 = h2;
            k0 = k1;
            k1 = k2;
            let frac = v - a;
            if frac.abs() < 1e-12 {
                break;
            }
            v = 1.0 / frac;
        }
        if k1 == 0 {
            return None;
        }
        Some(Rational::from_big(BigInt::from(h1), BigInt::from(k1)))
    }

    pub fn lcm_denom(values: impl IntoIterator<Item = Rational>) -> BigInt {
        values
            .into_iter()
            .fold(BigInt::one(), |acc, r| acc.lcm(r.denom()))
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rational literal `{0}`")]
pub struct ParseRationalError(pub String);

impl FromStr for Rational {
    type Err = ParseRationalError;

    /// Accepts `p`, `-p` and `p/q`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseRationalError(s.to_string());
        let t = s.trim();
        let (n, d) = match t.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (t, "1"),
        };
        let n: BigInt = n.parse().map_err(|_| err())?;
        let d: BigInt = d.parse().map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        Ok(Rational::from_big(n, d))
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl From<i64> for Rational {
    fn from(n: i64) -> Self {
        Rational::from_integer(n)
    }
}

macro_rules! rational_binop {
    ($trait:ident, $method:ident) => {
        impl $trait<&Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational((&self.0).$method(&rhs.0))
            }
        }
        impl $trait<Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational(self.0.$method(rhs.0))
            }
        }
        impl $trait<&Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational(self.0.$method(&rhs.0))
            }
        }
        impl $trait<Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational((&self.0).$method(rhs.0))
            }
        }
    };
}

rational_binop!(Add, add);
rational_binop!(Sub, sub);
rational_binop!(Mul, mul);
rational_binop!(Div, div);

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-&self.0)
    }
}

/// A rational extended by `+∞`; used for valuations and cutoffs.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum ExtRational {
    Finite(Rational),
    Infinite,
}

impl ExtRational {
    pub fn finite(&self) -> Option<&Rational> {
        match self {
            ExtRational::Finite(r) => Some(r),
            ExtRational::Infinite => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtRational::Infinite)
    }

    /// Sum with `+∞` absorbing.
    pub fn plus(&self, other: &ExtRational) -> ExtRational {
        match (self, other) {
            (ExtRational::Finite(a), ExtRational::Finite(b)) => ExtRational::Finite(a + b),
            _ => ExtRational::Infinite,
        }
    }

    pub fn plus_rational(&self, r: &Rational) -> ExtRational {
        match self {
            ExtRational::Finite(a) => ExtRational::Finite(a + r),
            ExtRational::Infinite => ExtRational::Infinite,
        }
    }

    pub fn min_of<'a>(values: impl IntoIterator<Item = &'a ExtRational>) -> ExtRational {
        values
            .into_iter()
            .fold(ExtRational::Infinite, |acc, v| if *v < acc { v.clone() } else { acc })
    }

    /// `true` when the finite rational `r` lies strictly below this bound.
    pub fn exceeds(&self, r: &Rational) -> bool {
        match self {
            ExtRational::Finite(c) => r < c,
            ExtRational::Infinite => true,
        }
    }
}

impl From<Rational> for ExtRational {
    fn from(r: Rational) -> Self {
        ExtRational::Finite(r)
    }
}

impl PartialOrd for ExtRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtRational {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtRational::Finite(a), ExtRational::Finite(b)) => a.cmp(b),
            (ExtRational::Finite(_), ExtRational::Infinite) => Ordering::Less,
            (ExtRational::Infinite, ExtRational::Finite(_)) => Ordering::Greater,
            (ExtRational::Infinite, ExtRational::Infinite) => Ordering::Equal,
        }
    }
}

impl fmt::Display for ExtRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtRational::Finite(r) => write!(f, "{r}"),
            ExtRational::Infinite => write!(f, "inf"),
        }
    }
}

impl fmt::Debug for ExtRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for ExtRational {
    type Err = ParseRationalError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "inf" | "+inf" | "∞" | "+∞" => Ok(ExtRational::Infinite),
            other => other.parse().map(ExtRational::Finite),
        }
    }
}

impl Serialize for ExtRational {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ExtRational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A Gaussian rational `re + im·i`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct GaussRational {
    pub re: Rational,
    pub im: Rational,
}

impl GaussRational {
    pub fn new(re: Rational, im: Rational) -> Self {
        GaussRational { re, im }
    }

    pub fn real(re: Rational) -> Self {
        GaussRational { re, im: Rational::zero() }
    }

    pub fn from_integer(n: i64) -> Self {
        GaussRational::real(Rational::from_integer(n))
    }

    pub fn zero() -> Self {
        GaussRational::default()
    }

    pub fn one() -> Self {
        GaussRational::from_integer(1)
    }

    pub fn i() -> Self {
        GaussRational::new(Rational::zero(), Rational::one())
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.im.is_zero() && self.re == Rational::one()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        GaussRational::new(self.re.clone(), -&self.im)
    }

    pub fn norm_sqr(&self) -> Rational {
        &self.re * &self.re + &self.im * &self.im
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inverse(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        let n = self.norm_sqr();
        Some(GaussRational::new(&self.re / &n, -(&self.im / &n)))
    }

    pub fn scale(&self, r: &Rational) -> Self {
        GaussRational::new(&self.re * r, &self.im * r)
    }

    pub fn pow(&self, exp: i64) -> Self {
        if exp < 0 {
            return self
                .inverse()
                .expect("negative power of zero")
                .pow(-exp);
        }
        let mut base = self.clone();
        let mut acc = GaussRational::one();
        let mut e = exp;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            e >>= 1;
        }
        acc
    }

    pub fn to_complex_f64(&self) -> num_complex::Complex64 {
        num_complex::Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    /// `true` when the printed form needs parentheses inside a product.
    pub fn is_compound(&self) -> bool {
        !self.re.is_zero() && !self.im.is_zero()
    }
}

impl fmt::Display for GaussRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let im_part = |im: &Rational| -> String {
            if *im == Rational::one() {
                "i".to_string()
            } else if *im == -Rational::one() {
                "-i".to_string()
            } else if im.is_integer() {
                format!("{im}i")
            } else {
                format!("{im}*i")
            }
        };
        match (self.re.is_zero(), self.im.is_zero()) {
            (_, true) => write!(f, "{}", self.re),
            (true, false) => write!(f, "{}", im_part(&self.im)),
            (false, false) => {
                let im = im_part(&self.im);
                if im.starts_with('-') {
                    write!(f, "{} - {}", self.re, &im[1..])
                } else {
                    write!(f, "{} + {}", self.re, im)
                }
            }
        }
    }
}

impl fmt::Debug for GaussRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for GaussRational {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl From<Rational> for GaussRational {
    fn from(r: Rational) -> Self {
        GaussRational::real(r)
    }
}

impl Add<&GaussRational> for &GaussRational {
    type Output = GaussRational;
    fn add(self, rhs: &GaussRational) -> GaussRational {
        GaussRational::new(&self.re + &rhs.re, &self.im + &rhs.im)
    }
}

impl Sub<&GaussRational> for &GaussRational {
    type Output = GaussRational;
    fn sub(self, rhs: &GaussRational) -> GaussRational {
        GaussRational::new(&self.re - &rhs.re, &self.im - &rhs.im)
    }
}

impl Mul<&GaussRational> for &GaussRational {
    type Output = GaussRational;
    fn mul(self, rhs: &GaussRational) -> GaussRational {
        if self.im.is_zero() && rhs.im.is_zero() {
            return GaussRational::real(&self.re * &rhs.re);
        }
        GaussRational::new(
            &self.re * &rhs.re - &self.im * &rhs.im,
            &self.re * &rhs.im + &self.im * &rhs.re,
        )
    }
}

impl Div<&GaussRational> for &GaussRational {
    type Output = GaussRational;
    fn div(self, rhs: &GaussRational) -> GaussRational {
        self * &rhs.inverse().expect("division by zero Gaussian rational")
    }
}

impl Neg for &GaussRational {
    type Output = GaussRational;
    fn neg(self) -> GaussRational {
        GaussRational::new(-&self.re, -&self.im)
    }
}

impl Neg for GaussRational {
    type Output = GaussRational;
    fn neg(self) -> GaussRational {
        -&self
    }
}
