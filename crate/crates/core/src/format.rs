//! JSON files for atlases, disc data and constraint systems.
//!
//! Scalars, series and bounds are strings in the expression syntax of
//! [`crate::expr`]; bare integers are accepted where a rational is expected.
//! A top-level `params` object assigns rational expressions to names, which
//! may refer to each other; overrides replace file values before resolution.

use std::collections::{BTreeMap, BTreeSet};

use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::atlas::{Atlas, AtlasError, Chart, Domain, InverseMap, LoopStep, Relation, Transition, ValuationConstraint};
use crate::expr::{parse_rational, parse_series, ParseError, Params};
use crate::mc::{DiscContribution, DiscData, Generator, HolonomyFactor, McError};
use crate::multiseries::{Ambient, Precision, Series};
use crate::novikov::{ExtRational, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormatError {
    #[error("line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error("{path}, column {column}: {message}")]
    Expr { path: String, column: usize, message: String },
    #[error("{path}: {message}")]
    Field { path: String, message: String },
    #[error(transparent)]
    Atlas(#[from] AtlasError),
    #[error(transparent)]
    Mc(#[from] McError),
}

impl FormatError {
    fn field(path: &str, message: impl Into<String>) -> Self {
        FormatError::Field { path: path.to_string(), message: message.into() }
    }

    fn expr(path: &str, e: ParseError) -> Self {
        FormatError::Expr { path: path.to_string(), column: e.column, message: e.message }
    }
}

impl From<serde_json::Error> for FormatError {
    fn from(e: serde_json::Error) -> Self {
        let text = e.to_string();
        let message = match text.rfind(" at line ") {
            Some(i) => text[..i].to_string(),
            None => text,
        };
        FormatError::Json { line: e.line(), column: e.column(), message }
    }
}

/// Parameter overrides as unparsed expressions, e.g. from `--param A7=1`.
pub type Overrides = BTreeMap<String, String>;

fn value_text(v: &Value, path: &str) -> Result<String, FormatError> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) if n.is_i64() => Ok(n.to_string()),
        _ => Err(FormatError::field(path, "expected an expression string or an integer")),
    }
}

/// Resolves parameters that may refer to each other.
pub fn resolve_params(raw: &Map<String, Value>, overrides: &Overrides) -> Result<Params, FormatError> {
    let mut pending: BTreeMap<String, String> = BTreeMap::new();
    for (k, v) in raw {
        pending.insert(k.clone(), value_text(v, &format!("params.{k}"))?);
    }
    for (k, v) in overrides {
        pending.insert(k.clone(), v.clone());
    }
    let mut params = Params::new();
    while !pending.is_empty() {
        let ready: Vec<(String, Rational)> = pending
            .iter()
            .filter_map(|(k, text)| parse_rational(text, &params).ok().map(|r| (k.clone(), r)))
            .collect();
        if ready.is_empty() {
            let (k, text) = pending.iter().next().expect("nonempty");
            let e = parse_rational(text, &params).expect_err("unresolved");
            let waiting: Vec<&String> = pending.keys().collect();
            let message = if pending.keys().any(|p| e.message.contains(&format!("`{p}`"))) {
                format!("{} (parameters {:?} refer to each other)", e.message, waiting)
            } else {
                e.message
            };
            return Err(FormatError::Expr { path: format!("params.{k}"), column: e.column, message });
        }
        for (k, r) in ready {
            pending.remove(&k);
            params.insert(k, r);
        }
    }
    Ok(params)
}

fn rational_at(v: &Value, path: &str, params: &Params) -> Result<Rational, FormatError> {
    parse_rational(&value_text(v, path)?, params).map_err(|e| FormatError::expr(path, e))
}

fn bound_at(v: &Value, path: &str, params: &Params) -> Result<ExtRational, FormatError> {
    let text = value_text(v, path)?;
    if text.trim() == "inf" {
        return Ok(ExtRational::Infinite);
    }
    Ok(ExtRational::Finite(parse_rational(&text, params).map_err(|e| FormatError::expr(path, e))?))
}

fn series_at(
    v: &Value,
    path: &str,
    ambient: &Ambient,
    params: &Params,
    prec: &Precision,
) -> Result<Series, FormatError> {
    parse_series(&value_text(v, path)?, ambient, params, prec).map_err(|e| FormatError::expr(path, e))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstraint {
    form: Value,
    #[serde(default)]
    constant: Option<Value>,
    rel: Relation,
    bound: Value,
}

fn constraint_at(v: &Value, path: &str, params: &Params) -> Result<ValuationConstraint, FormatError> {
    let raw: RawConstraint =
        serde_json::from_value(v.clone()).map_err(|e| FormatError::field(path, e.to_string()))?;
    let form: BTreeMap<String, i64> = match &raw.form {
        Value::String(var) => BTreeMap::from([(var.clone(), 1)]),
        Value::Object(m) => m
            .iter()
            .map(|(k, n)| {
                n.as_i64()
                    .map(|n| (k.clone(), n))
                    .ok_or_else(|| FormatError::field(&format!("{path}.form.{k}"), "expected an integer"))
            })
            .collect::<Result<_, _>>()?,
        _ => return Err(FormatError::field(&format!("{path}.form"), "expected a variable name or an object")),
    };
    if form.is_empty() {
        return Err(FormatError::field(&format!("{path}.form"), "empty linear form"));
    }
    let constant = match &raw.constant {
        Some(c) => rational_at(c, &format!("{path}.constant"), params)?,
        None => Rational::zero(),
    };
    let bound = bound_at(&raw.bound, &format!("{path}.bound"), params)?;
    if bound.is_infinite() && !matches!(raw.rel, Relation::Lt | Relation::Le) {
        return Err(FormatError::field(&format!("{path}.bound"), "an infinite bound needs `<` or `<=`"));
    }
    Ok(ValuationConstraint::new(form, constant, raw.rel, bound))
}

fn conjunction_at(items: &[Value], path: &str, params: &Params) -> Result<Vec<ValuationConstraint>, FormatError> {
    items
        .iter()
        .enumerate()
        .map(|(i, c)| constraint_at(c, &format!("{path}[{i}]"), params))
        .collect()
}

/// `true`, `false`, a list of constraints (conjunction) or a list of such
/// lists (union). A missing domain is everything.
pub fn domain_at(v: Option<&Value>, path: &str, params: &Params) -> Result<Domain, FormatError> {
    match v {
        None | Some(Value::Null) | Some(Value::Bool(true)) => Ok(Domain::everything()),
        Some(Value::Bool(false)) => Ok(Domain::union(Vec::new())),
        Some(Value::Array(items)) if !items.is_empty() && items.iter().all(Value::is_array) => {
            let pieces = items
                .iter()
                .enumerate()
                .map(|(i, p)| conjunction_at(p.as_array().expect("array"), &format!("{path}[{i}]"), params))
                .collect::<Result<_, _>>()?;
            Ok(Domain::union(pieces))
        }
        Some(Value::Array(items)) => Ok(Domain::conjunction(conjunction_at(items, path, params)?)),
        Some(_) => Err(FormatError::field(path, "expected a boolean or a list of constraints")),
    }
}

pub fn domain_to_value(d: &Domain) -> Value {
    match d.pieces.as_slice() {
        [] => Value::Bool(false),
        [piece] => json!(piece),
        pieces => json!(pieces),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChart {
    name: String,
    vars: Vec<String>,
    #[serde(default)]
    domain: Option<Value>,
    #[serde(default)]
    potential: Option<Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInverse {
    map: BTreeMap<String, Value>,
    #[serde(default)]
    overlap: Option<Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTransition {
    #[serde(default)]
    id: Option<String>,
    src: String,
    dst: String,
    #[serde(default)]
    overlap: Option<Value>,
    map: BTreeMap<String, Value>,
    #[serde(default)]
    inverse: Option<RawInverse>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAtlas {
    #[serde(default)]
    params: Map<String, Value>,
    charts: Vec<RawChart>,
    #[serde(default)]
    transitions: Vec<RawTransition>,
    #[serde(default)]
    loops: Vec<Vec<String>>,
}

fn map_at(
    raw: &BTreeMap<String, Value>,
    path: &str,
    ambient: &Ambient,
    params: &Params,
    prec: &Precision,
) -> Result<BTreeMap<String, Series>, FormatError> {
    raw.iter()
        .map(|(w, v)| Ok((w.clone(), series_at(v, &format!("{path}.{w}"), ambient, params, prec)?)))
        .collect()
}

/// Parses an atlas file. Transitions without an `id` get `src->dst`.
pub fn parse_atlas(text: &str, overrides: &Overrides, prec: &Precision) -> Result<Atlas, FormatError> {
    let raw: RawAtlas = serde_json::from_str(text)?;
    let params = resolve_params(&raw.params, overrides)?;
    let mut charts = Vec::new();
    let mut names = BTreeSet::new();
    for (i, c) in raw.charts.iter().enumerate() {
        let path = format!("charts[{i}]");
        if !names.insert(c.name.clone()) {
            return Err(FormatError::field(&path, format!("duplicate chart `{}`", c.name)));
        }
        let amb: Ambient = c.vars.iter().cloned().collect();
        if amb.len() != c.vars.len() {
            return Err(FormatError::field(&format!("{path}.vars"), "repeated variable"));
        }
        let potential = match &c.potential {
            Some(v) => series_at(v, &format!("{path}.potential"), &amb, &params, prec)?,
            None => Series::zero(&amb),
        };
        charts.push(Chart {
            name: c.name.clone(),
            vars: c.vars.clone(),
            domain: domain_at(c.domain.as_ref(), &format!("{path}.domain"), &params)?,
            potential,
        });
    }
    let ambient_of = |name: &str, path: &str| -> Result<Ambient, FormatError> {
        charts
            .iter()
            .find(|c| c.name == name)
            .map(Chart::ambient)
            .ok_or_else(|| FormatError::field(path, format!("unknown chart `{name}`")))
    };
    let mut transitions = Vec::new();
    let mut ids = BTreeSet::new();
    for (i, t) in raw.transitions.iter().enumerate() {
        let path = format!("transitions[{i}]");
        let id = t.id.clone().unwrap_or_else(|| format!("{}->{}", t.src, t.dst));
        if !ids.insert(id.clone()) {
            return Err(FormatError::field(&path, format!("duplicate transition id `{id}`")));
        }
        let src_amb = ambient_of(&t.src, &format!("{path}.src"))?;
        let dst_amb = ambient_of(&t.dst, &format!("{path}.dst"))?;
        let inverse = match &t.inverse {
            None => None,
            Some(inv) => Some(InverseMap {
                map: map_at(&inv.map, &format!("{path}.inverse.map"), &dst_amb, &params, prec)?,
                overlap: domain_at(inv.overlap.as_ref(), &format!("{path}.inverse.overlap"), &params)?,
            }),
        };
        transitions.push(Transition {
            id,
            src: t.src.clone(),
            dst: t.dst.clone(),
            overlap: domain_at(t.overlap.as_ref(), &format!("{path}.overlap"), &params)?,
            map: map_at(&t.map, &format!("{path}.map"), &src_amb, &params, prec)?,
            inverse,
        });
    }
    let loops = raw.loops.iter().map(|l| l.iter().map(|s| LoopStep::parse(s)).collect()).collect();
    Ok(Atlas::new(params, charts, transitions, loops)?)
}

fn params_to_value(params: &Params) -> Value {
    Value::Object(params.iter().map(|(k, v)| (k.clone(), Value::String(v.to_string()))).collect())
}

fn map_to_value(map: &BTreeMap<String, Series>) -> Value {
    Value::Object(map.iter().map(|(k, s)| (k.clone(), Value::String(s.to_string()))).collect())
}

/// The atlas in file form; parsing the result gives back an equal atlas.
pub fn atlas_to_value(atlas: &Atlas) -> Value {
    let charts: Vec<Value> = atlas
        .charts
        .iter()
        .map(|c| {
            json!({
                "name": c.name,
                "vars": c.vars,
                "domain": domain_to_value(&c.domain),
                "potential": c.potential.to_string(),
            })
        })
        .collect();
    let transitions: Vec<Value> = atlas
        .transitions
        .iter()
        .map(|t| {
            let mut obj = Map::new();
            obj.insert("id".into(), json!(t.id));
            obj.insert("src".into(), json!(t.src));
            obj.insert("dst".into(), json!(t.dst));
            obj.insert("overlap".into(), domain_to_value(&t.overlap));
            obj.insert("map".into(), map_to_value(&t.map));
            if let Some(inv) = &t.inverse {
                obj.insert(
                    "inverse".into(),
                    json!({ "map": map_to_value(&inv.map), "overlap": domain_to_value(&inv.overlap) }),
                );
            }
            Value::Object(obj)
        })
        .collect();
    let loops: Vec<Vec<String>> =
        atlas.loops.iter().map(|l| l.iter().map(|s| s.to_string()).collect()).collect();
    json!({
        "params": params_to_value(&atlas.params),
        "charts": charts,
        "transitions": transitions,
        "loops": loops,
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawContribution {
    corners: Vec<String>,
    output: String,
    area: Value,
    sign: i64,
    #[serde(default)]
    holonomy: Vec<HolonomyFactor>,
    #[serde(default)]
    constant: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDiscData {
    #[serde(default)]
    params: Map<String, Value>,
    #[serde(default)]
    object_pairs: Value,
    generators: Vec<Generator>,
    #[serde(default)]
    deformation: BTreeMap<String, String>,
    #[serde(default = "default_true")]
    commutative: bool,
    #[serde(default)]
    normalized_areas: bool,
    #[serde(default)]
    variables: Vec<String>,
    #[serde(default)]
    contributions: Vec<RawContribution>,
}

/// Parses a disc-data file. Areas are rational expressions in the parameters.
pub fn parse_disc_data(text: &str, overrides: &Overrides) -> Result<DiscData, FormatError> {
    let raw: RawDiscData = serde_json::from_str(text)?;
    let params = resolve_params(&raw.params, overrides)?;
    let contributions = raw
        .contributions
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            Ok(DiscContribution {
                area: rational_at(&c.area, &format!("contributions[{i}].area"), &params)?,
                corners: c.corners,
                output: c.output,
                sign: c.sign,
                holonomy: c.holonomy,
                constant: c.constant,
            })
        })
        .collect::<Result<Vec<_>, FormatError>>()?;
    Ok(DiscData::new(
        raw.generators,
        raw.deformation,
        raw.commutative,
        raw.normalized_areas,
        raw.variables,
        contributions,
        raw.object_pairs,
    )?)
}

/// The disc data in file form, with resolved areas.
pub fn disc_data_to_value(data: &DiscData) -> Value {
    serde_json::to_value(data).expect("disc data serializes")
}

/// A constraint file: empty, a domain, or `{"params": …, "domain": …}`.
pub fn parse_constraints(text: &str, overrides: &Overrides) -> Result<Domain, FormatError> {
    if text.trim().is_empty() {
        return Ok(Domain::everything());
    }
    let v: Value = serde_json::from_str(text)?;
    match v {
        Value::Object(mut obj) => {
            let params = match obj.remove("params") {
                None => resolve_params(&Map::new(), overrides)?,
                Some(Value::Object(p)) => resolve_params(&p, overrides)?,
                Some(_) => return Err(FormatError::field("params", "expected an object")),
            };
            let domain = obj.remove("domain");
            if let Some(k) = obj.keys().next() {
                return Err(FormatError::field(k, "unknown field"));
            }
            domain_at(domain.as_ref(), "domain", &params)
        }
        other => domain_at(Some(&other), "domain", &resolve_params(&Map::new(), overrides)?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const WALL: &str = r#"{
      "charts": [
        {"name": "L", "vars": ["u", "v"],
         "domain": [[{"form": "u", "rel": ">=", "bound": 0}, {"form": "v", "rel": ">", "bound": 0}],
                    [{"form": "u", "rel": ">", "bound": 0}, {"form": "v", "rel": ">=", "bound": 0}]]},
        {"name": "L1", "vars": ["x", "y"], "domain": [{"form": {"y": 1}, "rel": "=", "bound": "0"}]}
      ],
      "transitions": [
        {"src": "L", "dst": "L1", "map": {"x": "u*v - 1", "y": "u^-1"},
         "inverse": {"map": {"u": "y^-1", "v": "(x + 1)*y"}}}
      ]
    }"#;

    #[test]
    fn parses_and_round_trips() {
        let prec = Precision::default();
        let atlas = parse_atlas(WALL, &Overrides::new(), &prec).unwrap();
        assert_eq!(atlas.transitions[0].id, "L->L1");
        assert_eq!(atlas.charts[0].domain.pieces.len(), 2);
        let text = atlas_to_value(&atlas).to_string();
        let again = parse_atlas(&text, &Overrides::new(), &prec).unwrap();
        assert_eq!(again, atlas);
        assert_eq!(atlas_to_value(&again).to_string(), text);
    }

    #[test]
    fn json_errors_carry_line_and_column() {
        let err = parse_atlas("{\n  \"charts\": [,]\n}", &Overrides::new(), &Precision::default()).unwrap_err();
        assert!(matches!(err, FormatError::Json { line: 2, .. }), "{err}");
    }

    #[test]
    fn expression_errors_carry_path_and_column() {
        let text = r#"{"charts": [{"name": "C", "vars": ["t"], "potential": "t + q*"}]}"#;
        let err = parse_atlas(text, &Overrides::new(), &Precision::default()).unwrap_err();
        assert_eq!(
            err,
            FormatError::Expr { path: "charts[0].potential".into(), column: 5, message: "unknown identifier `q`".into() }
        );
    }

    #[test]
    fn params_resolve_in_any_order_and_accept_overrides() {
        let raw: Map<String, Value> =
            serde_json::from_str(r#"{"S": "A1 + A2 - A7", "A1": "1/5", "A2": 1, "A7": "A1*5"}"#).unwrap();
        let p = resolve_params(&raw, &Overrides::new()).unwrap();
        assert_eq!(p["S"], Rational::new(1, 5));
        let p = resolve_params(&raw, &Overrides::from([("A7".to_string(), "3".to_string())])).unwrap();
        assert_eq!(p["S"], Rational::new(-9, 5));
        let cyclic: Map<String, Value> = serde_json::from_str(r#"{"a": "b", "b": "a"}"#).unwrap();
        assert!(matches!(resolve_params(&cyclic, &Overrides::new()), Err(FormatError::Expr { .. })));
    }

    #[test]
    fn constraint_files() {
        assert!(parse_constraints("", &Overrides::new()).unwrap().is_everything());
        let d = parse_constraints(
            r#"{"params": {"A": "1/2"}, "domain": [{"form": "x1", "rel": "<=", "bound": "A"}]}"#,
            &Overrides::new(),
        )
        .unwrap();
        assert_eq!(d.to_string(), "val(x1) <= 1/2");
        assert!(parse_constraints(r#"[{"form": "x", "rel": ">", "bound": "inf"}]"#, &Overrides::new()).is_err());
    }
}
