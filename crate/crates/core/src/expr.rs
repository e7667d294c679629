//! Text syntax for scalars, series and rational parameter expressions.
//!
//! ```text
//! sum      := ['+'|'-'] term (('+'|'-') term)*
//! term     := 'O' '(' ('T' '^' exp | 'deg' '^' int) ')' | product
//! product  := power (('*'|'/') ['-'] power | power)*
//! power    := atom ['^' exp]
//! atom     := number | 'T' | 'i' | variable | parameter | '(' sum ')'
//! exp      := ['-'] (number | parameter | '(' rational ')' | '{' rational '}')
//! ```
//!
//! `T` takes rational exponents; every other base takes integer exponents.
//! `O(T^e)` and `O(deg^n)` set the energy and degree cutoffs.

use std::collections::BTreeMap;

use num_bigint::BigInt;

use crate::multiseries::{Ambient, Precision, Series};
use crate::novikov::{ExtRational, GaussRational, Novikov, Rational};

pub type Params = BTreeMap<String, Rational>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("column {column}: {message}")]
pub struct ParseError {
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(BigInt),
    Ident(String),
    Sym(char),
    End,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let digits: String = chars[start..i].iter().collect();
            out.push((Tok::Num(digits.parse().expect("digits")), col));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len()
                && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '\'')
            {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), col));
        } else if "+-*/^(){}".contains(c) {
            out.push((Tok::Sym(c), col));
            i += 1;
        } else {
            return Err(ParseError { column: col, message: format!("unexpected character `{c}`") });
        }
    }
    out.push((Tok::End, chars.len() + 1));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    ambient: &'a Ambient,
    params: &'a Params,
    prec: &'a Precision,
    energy: ExtRational,
    degree: Option<i64>,
}

impl<'a> Parser<'a> {
    fn new(text: &str, ambient: &'a Ambient, params: &'a Params, prec: &'a Precision) -> Result<Self, ParseError> {
        Ok(Parser {
            toks: tokenize(text)?,
            pos: 0,
            ambient,
            params,
            prec,
            energy: ExtRational::Infinite,
            degree: None,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].0
    }

    fn col(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { column: self.col(), message: message.into() })
    }

    fn eat(&mut self, c: char) -> bool {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected `{c}`"))
        }
    }

    fn expect_end(&self) -> Result<(), ParseError> {
        if *self.peek() == Tok::End {
            Ok(())
        } else {
            self.err("unexpected trailing input")
        }
    }

    fn lift<T, E: std::fmt::Display>(&self, col: usize, r: Result<T, E>) -> Result<T, ParseError> {
        r.map_err(|e| ParseError { column: col, message: e.to_string() })
    }

    fn constant(&self, c: Novikov) -> Series {
        Series::constant(self.ambient, c)
    }

    // ---- rational expressions ----

    fn rat_sum(&mut self) -> Result<Rational, ParseError> {
        let mut acc = if self.eat('-') {
            -self.rat_product()?
        } else {
            self.eat('+');
            self.rat_product()?
        };
        loop {
            if self.eat('+') {
                acc = &acc + &self.rat_product()?;
            } else if self.eat('-') {
                acc = &acc - &self.rat_product()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn rat_product(&mut self) -> Result<Rational, ParseError> {
        let mut acc = self.rat_factor()?;
        loop {
            if self.eat('*') {
                acc = &acc * &self.rat_factor()?;
            } else if *self.peek() == Tok::Sym('/') {
                self.bump();
                let col = self.col();
                let d = self.rat_factor()?;
                if d.is_zero() {
                    return Err(ParseError { column: col, message: "division by zero".into() });
                }
                acc = &acc / &d;
            } else {
                return Ok(acc);
            }
        }
    }

    fn rat_factor(&mut self) -> Result<Rational, ParseError> {
        if self.eat('-') {
            return Ok(-self.rat_factor()?);
        }
        let base = self.rat_atom()?;
        if self.eat('^') {
            let col = self.col();
            let n = self.int_exponent()?;
            if base.is_zero() && n < 0 {
                return Err(ParseError { column: col, message: "division by zero".into() });
            }
            return Ok(base.pow(n as i32));
        }
        Ok(base)
    }

    fn rat_atom(&mut self) -> Result<Rational, ParseError> {
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                Ok(Rational::from_big(n, BigInt::from(1)))
            }
            Tok::Ident(name) => match self.params.get(&name) {
                Some(v) => {
                    self.bump();
                    Ok(v.clone())
                }
                None => self.err(format!("unknown parameter `{name}`")),
            },
            Tok::Sym('(') => {
                self.bump();
                let v = self.rat_sum()?;
                self.expect(')')?;
                Ok(v)
            }
            Tok::Sym('{') => {
                self.bump();
                let v = self.rat_sum()?;
                self.expect('}')?;
                Ok(v)
            }
            _ => self.err("expected a rational value"),
        }
    }

    /// Exponent after `^`: a signed number, parameter or bracketed rational expression.
    fn exponent(&mut self) -> Result<Rational, ParseError> {
        let negative = self.eat('-');
        let v = match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                Rational::from_big(n, BigInt::from(1))
            }
            Tok::Ident(_) | Tok::Sym('(') | Tok::Sym('{') => self.rat_atom()?,
            _ => return self.err("expected an exponent"),
        };
        Ok(if negative { -v } else { v })
    }

    fn int_exponent(&mut self) -> Result<i64, ParseError> {
        let col = self.col();
        let e = self.exponent()?;
        match e.to_i64() {
            Some(n) if e.is_integer() => Ok(n),
            _ => Err(ParseError { column: col, message: format!("exponent {e} must be an integer") }),
        }
    }

    // ---- series expressions ----

    fn sum(&mut self) -> Result<Series, ParseError> {
        let mut acc = Series::zero(self.ambient);
        let mut first = true;
        loop {
            let col = self.col();
            let negative = if self.eat('-') {
                true
            } else {
                let had_plus = self.eat('+');
                if !first && !had_plus {
                    return Ok(acc);
                }
                false
            };
            first = false;
            if let Some(()) = self.cutoff_term()? {
                if negative {
                    return Err(ParseError { column: col, message: "a cutoff term cannot be negated".into() });
                }
                continue;
            }
            let t = self.product()?;
            let t = if negative { t.neg() } else { t };
            acc = self.lift(col, acc.add(&t))?;
        }
    }

    fn cutoff_term(&mut self) -> Result<Option<()>, ParseError> {
        let is_o = matches!(self.peek(), Tok::Ident(s) if s == "O") && *self.peek_at(1) == Tok::Sym('(');
        if !is_o {
            return Ok(None);
        }
        self.bump();
        self.bump();
        match self.bump() {
            Tok::Ident(s) if s == "T" => {
                self.expect('^')?;
                let e = self.exponent()?;
                if ExtRational::Finite(e.clone()) < self.energy {
                    self.energy = ExtRational::Finite(e);
                }
            }
            Tok::Ident(s) if s == "deg" => {
                self.expect('^')?;
                let d = self.int_exponent()?;
                self.degree = Some(self.degree.map_or(d, |old| old.min(d)));
            }
            _ => return self.err("expected `T^e` or `deg^n` inside O(...)"),
        }
        self.expect(')')?;
        Ok(Some(()))
    }

    fn product(&mut self) -> Result<Series, ParseError> {
        let mut acc = self.power()?;
        loop {
            let col = self.col();
            if self.eat('*') {
                let f = self.signed_power()?;
                acc = self.lift(col, acc.mul(&f))?;
            } else if self.eat('/') {
                let f = self.signed_power()?;
                let inv = self.lift(col, f.invert(self.prec))?;
                acc = self.lift(col, acc.mul(&inv))?;
            } else if matches!(self.peek(), Tok::Ident(_) | Tok::Num(_) | Tok::Sym('(')) {
                let f = self.power()?;
                acc = self.lift(col, acc.mul(&f))?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn signed_power(&mut self) -> Result<Series, ParseError> {
        if self.eat('-') {
            Ok(self.signed_power()?.neg())
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Series, ParseError> {
        let col = self.col();
        if matches!(self.peek(), Tok::Ident(s) if s == "T" && !self.ambient.contains("T")) {
            self.bump();
            let e = if self.eat('^') { self.exponent()? } else { Rational::one() };
            return Ok(self.constant(Novikov::t_power(e)));
        }
        let base = self.atom()?;
        if self.eat('^') {
            let n = self.int_exponent()?;
            return self.lift(col, base.pow(n, self.prec));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Series, ParseError> {
        let col = self.col();
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                Ok(self.constant(Novikov::from_rational(Rational::from_big(n, BigInt::from(1)))))
            }
            Tok::Ident(name) => {
                self.bump();
                if self.ambient.contains(&name) {
                    Ok(Series::var(self.ambient, &name).expect("ambient variable"))
                } else if name == "i" {
                    Ok(self.constant(Novikov::constant(GaussRational::i())))
                } else if let Some(v) = self.params.get(&name) {
                    Ok(self.constant(Novikov::from_rational(v.clone())))
                } else {
                    Err(ParseError { column: col, message: format!("unknown identifier `{name}`") })
                }
            }
            Tok::Sym('(') => {
                self.bump();
                let s = self.sum()?;
                self.expect(')')?;
                Ok(s)
            }
            Tok::End => self.err("unexpected end of input"),
            Tok::Sym(c) => self.err(format!("unexpected `{c}`")),
        }
    }

    fn finish_series(mut self) -> Result<Series, ParseError> {
        let s = self.sum()?;
        self.expect_end()?;
        let energy = std::mem::replace(&mut self.energy, ExtRational::Infinite);
        Ok(s.with_cutoffs(&energy, self.degree))
    }
}

/// Parses a series over `ambient`. Identifiers outside the ambient set are
/// looked up in `params` and become rational constants.
pub fn parse_series(
    text: &str,
    ambient: &Ambient,
    params: &Params,
    prec: &Precision,
) -> Result<Series, ParseError> {
    Parser::new(text, ambient, params, prec)?.finish_series()
}

/// Parses a Novikov scalar (a series without variables).
pub fn parse_scalar(text: &str, params: &Params, prec: &Precision) -> Result<Novikov, ParseError> {
    let empty = Ambient::new();
    let s = parse_series(text, &empty, params, prec)?;
    Ok(s.coefficient(&crate::multiseries::Monomial::one()))
}

/// Parses a rational expression in numbers and parameters, such as `A1+A2-A7` or `A_S/2`.
pub fn parse_rational(text: &str, params: &Params) -> Result<Rational, ParseError> {
    let empty = Ambient::new();
    let prec = Precision::default();
    let mut p = Parser::new(text, &empty, params, &prec)?;
    let v = p.rat_sum()?;
    p.expect_end()?;
    Ok(v)
}

/// Parses a point literal `u=T^(1/2), v=T^(1/2)`.
pub fn parse_point(
    text: &str,
    params: &Params,
    prec: &Precision,
) -> Result<BTreeMap<String, Novikov>, ParseError> {
    let mut out = BTreeMap::new();
    let mut part_start = 0;
    for part in text.split(',') {
        let Some((name, value)) = part.split_once('=') else {
            return Err(ParseError { column: part_start + 1, message: "expected `name=value`".into() });
        };
        let name_trimmed = name.trim();
        if name_trimmed.is_empty() {
            return Err(ParseError { column: part_start + 1, message: "missing coordinate name".into() });
        }
        let value_start = part_start + name.chars().count() + 1;
        let v = parse_scalar(value, params, prec)
            .map_err(|e| ParseError { column: e.column + value_start, ..e })?;
        out.insert(name_trimmed.to_string(), v);
        part_start += part.chars().count() + 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiseries::ambient;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn scalars() {
        let p = Params::new();
        let prec = Precision::default();
        let s = parse_scalar("2 + T^(1/2) - 3/4*T^2", &p, &prec).unwrap();
        assert_eq!(s.to_string(), "2 + T^(1/2) - 3/4*T^2");
        assert_eq!(parse_scalar("(1+2i)T^3", &p, &prec).unwrap().to_string(), "(1 + 2i)*T^3");
        let inv = parse_scalar("1/(1-T) + O(T^3)", &p, &prec).unwrap();
        assert_eq!(inv.to_string(), "1 + T + T^2 + O(T^3)");
    }

    #[test]
    fn params_in_exponents() {
        let p = Params::from([("A_S".to_string(), q(1, 1)), ("B".to_string(), q(3, 2))]);
        let prec = Precision::default();
        let a = ambient(["t"]);
        let w = parse_series("t + T^A_S*t^-1", &a, &p, &prec).unwrap();
        assert_eq!(w.to_string(), "T*t^-1 + t");
        let s = parse_scalar("T^{A_S/2} + T^(-B)", &p, &prec).unwrap();
        assert_eq!(s.to_string(), "T^(-3/2) + T^(1/2)");
    }

    #[test]
    fn rational_expressions() {
        let p = Params::from([("A1".to_string(), q(1, 5)), ("A7".to_string(), q(1, 1))]);
        assert_eq!(parse_rational("A1+A1-A7", &p).unwrap(), q(-3, 5));
        assert_eq!(parse_rational("-3/2", &p).unwrap(), q(-3, 2));
        assert_eq!(parse_rational("A7/0", &p).unwrap_err().column, 4);
    }

    #[test]
    fn series_round_trip_through_display() {
        let a = ambient(["x", "y"]);
        let p = Params::new();
        let prec = Precision::default();
        let s = parse_series("(x+1)^-1*y + i*T^(2/3)*x^-1 + O(T^4) + O(deg^5)", &a, &p, &prec).unwrap();
        let back = parse_series(&s.to_string(), &a, &p, &prec).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn error_columns() {
        let a = ambient(["x"]);
        let p = Params::new();
        let prec = Precision::default();
        let e = parse_series("x + q", &a, &p, &prec).unwrap_err();
        assert_eq!(e.column, 5);
        let e = parse_series("x^(1/2)", &a, &p, &prec).unwrap_err();
        assert_eq!(e.column, 3);
        let e = parse_series("(x + 1", &a, &p, &prec).unwrap_err();
        assert_eq!(e.column, 7);
    }

    #[test]
    fn points() {
        let p = Params::new();
        let prec = Precision::default();
        let pt = parse_point("u=T^(1/2), v=0", &p, &prec).unwrap();
        assert_eq!(pt["u"], Novikov::t_power(q(1, 2)));
        assert!(pt["v"].is_zero());
        let e = parse_point("u=T^(1/2), v=$", &p, &prec).unwrap_err();
        assert_eq!(e.column, 14);
    }
}
