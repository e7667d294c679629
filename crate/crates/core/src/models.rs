//! Bundled model files and their expected-results manifests.
//!
//! A model is a directory holding `manifest.json`, an optional atlas file,
//! disc-data files and constraint files. The manifest names the files and
//! lists checks; variants rerun further checks with parameter overrides.
//! The layout and schema are described in `models/README.md`.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::atlas::{
    check_potential_match, compose, domain_feasible, effective_overlap, overlap_intersection,
    transport_point, verify_cocycle, Atlas, AtlasError, CocycleStatus, Domain, Feasibility,
    LoopStep, Regime, Transition,
};
use crate::crit::{critical_locus, CritConfig};
use crate::expr::{parse_scalar, parse_series, Params};
use crate::format::{parse_atlas, parse_constraints, parse_disc_data, resolve_params, FormatError, Overrides};
use crate::mc::{
    check_isomorphism_pair, classify_obstruction, m0_deformed, m1_between, solve_cocycle, CocycleSolution,
    Composition, DiscData, Obstruction, SolvedRelation,
};
use crate::multiseries::{Ambient, Precision, Series};
use crate::novikov::{ExtRational, Novikov};

macro_rules! bundled {
    ($($name:literal => [$($file:literal),* $(,)?]),* $(,)?) => {
        &[$(($name, &[$(($file, include_str!(concat!("../models/", $name, "/", $file)))),*])),*]
    };
}

type BundledFiles = &'static [(&'static str, &'static str)];

const BUNDLED: &[(&str, BundledFiles)] = bundled! {
    "p1" => ["manifest.json", "atlas.json", "discs.json", "strips.json"],
    "pants" => ["manifest.json", "atlas.json", "seidel.json", "immersed-sphere.json"],
    "four-punctured" => ["manifest.json", "atlas.json", "cocycle.json"],
    "paradox" => ["manifest.json", "atlas.json", "regions.json", "area-criterion.json"],
    "three-pants" => ["manifest.json", "atlas.json"],
    "wall-crossing" => ["manifest.json", "atlas.json", "strips.json"],
};

/// Names of the bundled models.
pub fn bundled_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _)| *n).collect()
}

/// The raw text of a bundled model file.
pub fn bundled_file(model: &str, file: &str) -> Option<&'static str> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == model)
        .and_then(|(_, files)| files.iter().find(|(f, _)| *f == file))
        .map(|(_, text)| *text)
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{file}: {error}")]
    Format { file: String, error: FormatError },
    #[error("manifest: {0}")]
    Manifest(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub atlas: Option<String>,
    #[serde(default)]
    pub disc_data: Vec<String>,
    #[serde(default)]
    pub constraints: Vec<String>,
    #[serde(default)]
    pub checks: Vec<Check>,
    #[serde(default)]
    pub variants: Vec<Variant>,
}

/// Checks rerun with parameter overrides applied to every file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, String>,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstructionKind {
    Unobstructed,
    Weakly,
    Obstructed,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSpec {
    pub source: String,
    pub unknowns: Vec<String>,
}

/// One manifest entry. Expressions are parsed with the parameters of the
/// file they refer to.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Check {
    PotentialMatch {
        transition: String,
        expect: bool,
    },
    /// Composes the steps in order; `expect` gives every target variable.
    Compose {
        steps: Vec<String>,
        expect: BTreeMap<String, String>,
    },
    Cocycle {
        #[serde(rename = "loop")]
        loop_index: usize,
        expect: CocycleStatus,
        /// Whether the honest chart domains along the loop meet.
        #[serde(default)]
        honest: Option<bool>,
    },
    /// Exactly one of `transition` (effective overlap), `steps` (common
    /// overlap of transitions from one chart) or `constraints` (file stem).
    Feasible {
        #[serde(default)]
        transition: Option<String>,
        #[serde(default)]
        steps: Option<Vec<String>>,
        #[serde(default)]
        constraints: Option<String>,
        expect: bool,
        #[serde(default)]
        certificate_size: Option<usize>,
    },
    McClassify {
        data: String,
        #[serde(default)]
        remove: Vec<usize>,
        #[serde(default)]
        commutative: Option<bool>,
        expect: ObstructionKind,
        #[serde(default)]
        potential: Option<String>,
    },
    McSolve {
        data: String,
        source: String,
        unknowns: Vec<String>,
        expect: BTreeMap<String, String>,
    },
    Isomorphism {
        data: String,
        #[serde(default)]
        relations: Option<BTreeMap<String, String>>,
        #[serde(default)]
        solve: Option<SolveSpec>,
        compositions: Vec<Composition>,
        expect: bool,
    },
    /// Installs solved relations as a transition with the endpoints and
    /// overlap of `transition`; it must preserve the potential and agree
    /// with the declared map.
    Install {
        data: String,
        source: String,
        unknowns: Vec<String>,
        transition: String,
    },
    Critical {
        chart: String,
        #[serde(default)]
        points: Option<usize>,
        #[serde(default)]
        coordinates: Option<Vec<BTreeMap<String, String>>>,
        #[serde(default)]
        values: Option<Vec<String>>,
        #[serde(default)]
        components: Option<Vec<String>>,
        #[serde(default)]
        excluded_points: Option<usize>,
    },
    Transport {
        transition: String,
        point: BTreeMap<String, String>,
        #[serde(default)]
        expect: Option<BTreeMap<String, String>>,
        #[serde(default)]
        regime: Option<Regime>,
        /// `outside_overlap` when the point must be refused.
        #[serde(default)]
        expect_error: Option<String>,
    },
    /// Critical points and component samples of `chart` that lie in the
    /// first overlap are carried along `steps`; every image must be critical
    /// with the same critical value.
    TransportCritical {
        chart: String,
        steps: Vec<String>,
    },
}

impl Check {
    pub fn label(&self) -> String {
        match self {
            Check::PotentialMatch { transition, .. } => format!("potential_match {transition}"),
            Check::Compose { steps, .. } => format!("compose {}", steps.join(" then ")),
            Check::Cocycle { loop_index, .. } => format!("cocycle loop {loop_index}"),
            Check::Feasible { transition, steps, constraints, .. } => {
                let target = transition
                    .clone()
                    .or_else(|| steps.as_ref().map(|s| s.join(" & ")))
                    .or_else(|| constraints.as_ref().map(|c| format!("constraints {c}")))
                    .unwrap_or_default();
                format!("feasible {target}")
            }
            Check::McClassify { data, remove, commutative, .. } => {
                let mut l = format!("mc_classify {data}");
                if !remove.is_empty() {
                    l += &format!(" without {remove:?}");
                }
                if *commutative == Some(false) {
                    l += " noncommutative";
                }
                l
            }
            Check::McSolve { data, source, .. } => format!("mc_solve {data} {source}"),
            Check::Isomorphism { data, relations, .. } => {
                format!("isomorphism {data}{}", if relations.is_some() { " with given relations" } else { "" })
            }
            Check::Install { data, transition, .. } => format!("install {data} as {transition}"),
            Check::Critical { chart, .. } => format!("critical {chart}"),
            Check::Transport { transition, point, .. } => {
                let p: Vec<String> = point.iter().map(|(k, v)| format!("{k}={v}")).collect();
                format!("transport {transition} at {}", p.join(", "))
            }
            Check::TransportCritical { chart, steps } => {
                format!("transport_critical {chart} along {}", steps.join(" then "))
            }
        }
    }
}

/// A parsed model with the overrides and cutoffs it was parsed under.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub name: String,
    pub manifest: Manifest,
    pub atlas: Option<Atlas>,
    /// Keyed by file stem.
    pub disc_data: BTreeMap<String, DiscData>,
    pub constraints: BTreeMap<String, Domain>,
    pub prec: Precision,
    pub overrides: Overrides,
    /// Resolved parameters per file stem.
    params: BTreeMap<String, Params>,
    files: BTreeMap<String, String>,
}

fn stem(file: &str) -> String {
    file.strip_suffix(".json").unwrap_or(file).to_string()
}

fn file_params(text: &str, overrides: &Overrides) -> Result<Params, FormatError> {
    let v: Value = serde_json::from_str(text)?;
    match v.get("params") {
        Some(Value::Object(p)) => resolve_params(p, overrides),
        _ => resolve_params(&Default::default(), overrides),
    }
}

/// Loads a bundled model with default cutoffs and no overrides.
pub fn load_model(name: &str) -> Result<ModelBundle, ModelError> {
    load_model_with(name, &Overrides::new(), &Precision::default())
}

pub fn load_model_with(name: &str, overrides: &Overrides, prec: &Precision) -> Result<ModelBundle, ModelError> {
    let (_, files) = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| ModelError::UnknownModel(name.to_string()))?;
    let files = files.iter().map(|(f, t)| (f.to_string(), t.to_string())).collect();
    ModelBundle::from_files(name, files, overrides, prec)
}

/// Loads a model directory: `manifest.json` and the files it names.
pub fn load_model_dir(dir: &Path, overrides: &Overrides, prec: &Precision) -> Result<ModelBundle, ModelError> {
    let read = |f: &str| {
        let path = dir.join(f);
        std::fs::read_to_string(&path)
            .map_err(|e| ModelError::Io { path: path.display().to_string(), message: e.to_string() })
    };
    let manifest_text = read("manifest.json")?;
    let manifest = parse_manifest(&manifest_text)?;
    let mut files = BTreeMap::from([("manifest.json".to_string(), manifest_text)]);
    for f in manifest.atlas.iter().chain(&manifest.disc_data).chain(&manifest.constraints) {
        files.insert(f.clone(), read(f)?);
    }
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    ModelBundle::from_files(&name, files, overrides, prec)
}

pub fn parse_manifest(text: &str) -> Result<Manifest, ModelError> {
    serde_json::from_str(text).map_err(|e| ModelError::Format { file: "manifest.json".into(), error: e.into() })
}

impl ModelBundle {
    /// Parses every file named by the manifest in `files`.
    pub fn from_files(
        name: &str,
        files: BTreeMap<String, String>,
        overrides: &Overrides,
        prec: &Precision,
    ) -> Result<ModelBundle, ModelError> {
        let text = |f: &str| {
            files.get(f).ok_or_else(|| ModelError::Manifest(format!("file `{f}` is missing from the model")))
        };
        let manifest = parse_manifest(text("manifest.json")?)?;
        let wrap = |f: &str| {
            let file = f.to_string();
            move |error: FormatError| ModelError::Format { file, error }
        };
        let mut params = BTreeMap::new();
        let atlas = match &manifest.atlas {
            Some(f) => {
                let t = text(f)?;
                params.insert(stem(f), file_params(t, overrides).map_err(wrap(f))?);
                Some(parse_atlas(t, overrides, prec).map_err(wrap(f))?)
            }
            None => None,
        };
        let mut disc_data = BTreeMap::new();
        for f in &manifest.disc_data {
            let t = text(f)?;
            params.insert(stem(f), file_params(t, overrides).map_err(wrap(f))?);
            disc_data.insert(stem(f), parse_disc_data(t, overrides).map_err(wrap(f))?);
        }
        let mut constraints = BTreeMap::new();
        for f in &manifest.constraints {
            constraints.insert(stem(f), parse_constraints(text(f)?, overrides).map_err(wrap(f))?);
        }
        let bundle = ModelBundle {
            name: name.to_string(),
            manifest,
            atlas,
            disc_data,
            constraints,
            prec: prec.clone(),
            overrides: overrides.clone(),
            params,
            files,
        };
        bundle.validate_manifest()?;
        Ok(bundle)
    }

    /// Reparses the model with extra overrides on top of the current ones.
    pub fn with_overrides(&self, extra: &Overrides) -> Result<ModelBundle, ModelError> {
        let mut overrides = self.overrides.clone();
        overrides.extend(extra.iter().map(|(k, v)| (k.clone(), v.clone())));
        ModelBundle::from_files(&self.name, self.files.clone(), &overrides, &self.prec)
    }

    pub fn file_text(&self, file: &str) -> Option<&str> {
        self.files.get(file).map(String::as_str)
    }

    fn atlas(&self) -> Result<&Atlas, String> {
        self.atlas.as_ref().ok_or_else(|| "the model has no atlas".to_string())
    }

    fn atlas_params(&self) -> Params {
        self.manifest.atlas.as_ref().and_then(|f| self.params.get(&stem(f))).cloned().unwrap_or_default()
    }

    fn data(&self, name: &str) -> Result<(&DiscData, Params), String> {
        let d = self.disc_data.get(name).ok_or_else(|| format!("unknown disc data `{name}`"))?;
        Ok((d, self.params.get(name).cloned().unwrap_or_default()))
    }

    fn validate_manifest(&self) -> Result<(), ModelError> {
        let checks = self.manifest.checks.iter().chain(self.manifest.variants.iter().flat_map(|v| &v.checks));
        for check in checks {
            self.validate_check(check).map_err(|m| ModelError::Manifest(format!("{}: {m}", check.label())))?;
        }
        Ok(())
    }

    fn validate_check(&self, check: &Check) -> Result<(), String> {
        let step = |s: &str| -> Result<(), String> {
            self.atlas()?.step(&LoopStep::parse(s)).map(|_| ()).map_err(|e| e.to_string())
        };
        let chart = |c: &str| -> Result<(), String> { self.atlas()?.chart(c).map(|_| ()).map_err(|e| e.to_string()) };
        match check {
            Check::PotentialMatch { transition, .. } | Check::Transport { transition, .. } => step(transition),
            Check::Compose { steps, .. } => steps.iter().try_for_each(|s| step(s)),
            Check::Cocycle { loop_index, .. } => {
                if *loop_index < self.atlas()?.loops.len() {
                    Ok(())
                } else {
                    Err(format!("the atlas has no loop {loop_index}"))
                }
            }
            Check::Feasible { transition, steps, constraints, .. } => {
                match (transition, steps, constraints) {
                    (Some(t), None, None) => step(t),
                    (None, Some(s), None) => s.iter().try_for_each(|s| step(s)),
                    (None, None, Some(c)) if self.constraints.contains_key(c) => Ok(()),
                    (None, None, Some(c)) => Err(format!("unknown constraint file `{c}`")),
                    _ => Err("give exactly one of `transition`, `steps` and `constraints`".into()),
                }
            }
            Check::McClassify { data, .. } | Check::McSolve { data, .. } => self.data(data).map(|_| ()),
            Check::Isomorphism { data, relations, solve, .. } => {
                if relations.is_some() && solve.is_some() {
                    return Err("give at most one of `relations` and `solve`".into());
                }
                self.data(data).map(|_| ())
            }
            Check::Install { data, transition, .. } => {
                self.data(data)?;
                self.atlas()?.transition(transition).map(|_| ()).map_err(|e| e.to_string())
            }
            Check::Critical { chart: c, .. } => chart(c),
            Check::TransportCritical { chart: c, steps } => {
                chart(c)?;
                steps.iter().try_for_each(|s| step(s))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    pub check: String,
    pub passed: bool,
    pub detail: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub diffs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestReport {
    pub model: String,
    pub passed: bool,
    pub outcomes: Vec<CheckOutcome>,
}

impl ManifestReport {
    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.outcomes.iter().filter(|o| !o.passed)
    }
}

/// Runs every check of the manifest and of its variants. Failures are
/// collected; the run never stops early.
pub fn run_manifest(bundle: &ModelBundle) -> ManifestReport {
    let mut jobs: Vec<(Option<String>, Result<ModelBundle, String>, &Check)> = Vec::new();
    for check in &bundle.manifest.checks {
        jobs.push((None, Ok(bundle.clone()), check));
    }
    for v in &bundle.manifest.variants {
        let b = bundle.with_overrides(&v.params).map_err(|e| e.to_string());
        for check in &v.checks {
            jobs.push((Some(v.name.clone()), b.clone(), check));
        }
    }
    let outcomes: Vec<CheckOutcome> = jobs
        .par_iter()
        .map(|(variant, b, check)| {
            let result = match b {
                Ok(b) => run_check(b, check),
                Err(e) => Err(format!("variant does not load: {e}")),
            };
            let (passed, detail, diffs) = match result {
                Ok(r) => (r.diffs.is_empty(), r.detail, r.diffs),
                Err(e) => (false, e, Vec::new()),
            };
            CheckOutcome { variant: variant.clone(), check: check.label(), passed, detail, diffs }
        })
        .collect();
    ManifestReport { model: bundle.name.clone(), passed: outcomes.iter().all(|o| o.passed), outcomes }
}

struct Ran {
    detail: String,
    diffs: Vec<String>,
}

impl Ran {
    fn new(detail: impl Into<String>) -> Self {
        Ran { detail: detail.into(), diffs: Vec::new() }
    }

    fn expect(&mut self, ok: bool, diff: impl FnOnce() -> String) {
        if !ok {
            self.diffs.push(diff());
        }
    }
}

fn series_expr(text: &str, ambient: &Ambient, params: &Params, prec: &Precision) -> Result<Series, String> {
    parse_series(text, ambient, params, prec).map_err(|e| format!("expected value `{text}`: {e}"))
}

fn scalar_expr(text: &str, params: &Params, prec: &Precision) -> Result<Novikov, String> {
    parse_scalar(text, params, prec).map_err(|e| format!("expected value `{text}`: {e}"))
}

/// Equal below the smaller cutoff.
fn agree(a: &Novikov, b: &Novikov) -> bool {
    a.sub(b).is_zero()
}

fn series_agree(a: &Series, b: &Series) -> bool {
    a.sub(b).is_ok_and(|d| d.is_zero())
}

/// Valuation, with a zero value counting at its cutoff.
fn residual(x: &Novikov) -> ExtRational {
    if x.is_zero() {
        x.cutoff().clone()
    } else {
        x.val()
    }
}

fn compare_map(
    ran: &mut Ran,
    got: &BTreeMap<String, Series>,
    expect: &BTreeMap<String, String>,
    ambient: &Ambient,
    params: &Params,
    prec: &Precision,
) -> Result<(), String> {
    for (var, text) in expect {
        let want = series_expr(text, ambient, params, prec)?;
        match got.get(var) {
            Some(s) => ran.expect(series_agree(s, &want), || format!("{var}: got {s}, expected {want}")),
            None => ran.diffs.push(format!("{var}: missing, expected {want}")),
        }
    }
    for var in got.keys().filter(|v| !expect.contains_key(*v)) {
        ran.diffs.push(format!("{var}: not listed in the expectation"));
    }
    Ok(())
}

fn solve_relations(data: &DiscData, source: &str, unknowns: &[String], prec: &Precision) -> Result<CocycleSolution, String> {
    let m1 = m1_between(data, source).map_err(|e| e.to_string())?;
    let mut coeffs = BTreeMap::new();
    for (g, w) in m1 {
        let s = w.as_series().ok_or_else(|| format!("component `{g}` is not commutative"))?;
        coeffs.insert(g, s);
    }
    solve_cocycle(&coeffs, unknowns, prec).map_err(|e| e.to_string())
}

fn relations_map(sol: &CocycleSolution) -> BTreeMap<String, Series> {
    sol.relations.iter().map(|r| (r.var.clone(), r.value.clone())).collect()
}

fn run_check(b: &ModelBundle, check: &Check) -> Result<Ran, String> {
    let prec = &b.prec;
    let err = |e: AtlasError| e.to_string();
    match check {
        Check::PotentialMatch { transition, expect } => {
            let atlas = b.atlas()?;
            let t = atlas.step(&LoopStep::parse(transition)).map_err(err)?;
            let r = check_potential_match(atlas, &t, prec).map_err(err)?;
            let mut ran = Ran::new(format!("residual {}", r.residual));
            ran.expect(r.ok == *expect, || format!("potential match is {}, expected {expect}", r.ok));
            Ok(ran)
        }
        Check::Compose { steps, expect } => {
            let atlas = b.atlas()?;
            let ts = steps
                .iter()
                .map(|s| atlas.step(&LoopStep::parse(s)))
                .collect::<Result<Vec<Transition>, _>>()
                .map_err(err)?;
            let mut acc = ts[0].clone();
            for t in &ts[1..] {
                acc = compose(atlas, &acc, t, prec).map_err(err)?.transition;
            }
            let shown: Vec<String> = acc.map.iter().map(|(k, v)| format!("{k} = {v}")).collect();
            let mut ran = Ran::new(shown.join(", "));
            let amb = atlas.chart(&acc.src).map_err(err)?.ambient();
            compare_map(&mut ran, &acc.map, expect, &amb, &b.atlas_params(), prec)?;
            Ok(ran)
        }
        Check::Cocycle { loop_index, expect, honest } => {
            let atlas = b.atlas()?;
            let r = verify_cocycle(atlas, &atlas.loops[*loop_index], prec).map_err(err)?;
            let mut ran = Ran::new(format!("{:?} over {}", r.status, r.overlap));
            ran.expect(r.status == *expect, || {
                let res: Vec<String> = r
                    .residuals
                    .iter()
                    .filter(|(_, s)| !s.is_zero())
                    .map(|(v, s)| format!("{v}: {s}"))
                    .collect();
                format!("status {:?}, expected {expect:?}; residuals {}", r.status, res.join(", "))
            });
            if let Some(h) = honest {
                let got = r.honest_feasibility.is_feasible();
                ran.expect(got == *h, || format!("honest overlap nonempty is {got}, expected {h}"));
            }
            Ok(ran)
        }
        Check::Feasible { transition, steps, constraints, expect, certificate_size } => {
            let domain = match (transition, steps, constraints) {
                (Some(t), _, _) => {
                    let atlas = b.atlas()?;
                    let t = atlas.step(&LoopStep::parse(t)).map_err(err)?;
                    effective_overlap(atlas, &t).map_err(err)?.0
                }
                (_, Some(s), _) => {
                    let steps: Vec<LoopStep> = s.iter().map(|s| LoopStep::parse(s)).collect();
                    overlap_intersection(b.atlas()?, &steps).map_err(err)?.0
                }
                (_, _, Some(c)) => b.constraints[c].clone(),
                _ => return Err("nothing to check".into()),
            };
            let f = domain_feasible(&domain);
            let mut ran = Ran::new(match &f {
                Feasibility::Feasible { witness, .. } => {
                    let w: Vec<String> = witness.iter().map(|(v, r)| format!("val({v}) = {r}")).collect();
                    format!("feasible: {} within {domain}", w.join(", "))
                }
                Feasibility::Infeasible { certificates } => {
                    let c: Vec<String> = certificates
                        .iter()
                        .map(|c| c.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" and "))
                        .collect();
                    format!("infeasible: {}", c.join("; "))
                }
            });
            ran.expect(f.is_feasible() == *expect, || format!("feasible is {}, expected {expect}", f.is_feasible()));
            if let (Some(n), Feasibility::Infeasible { certificates }) = (certificate_size, &f) {
                ran.expect(certificates.iter().all(|c| c.len() == *n), || {
                    format!("certificate sizes {:?}, expected {n}", certificates.iter().map(Vec::len).collect::<Vec<_>>())
                });
            }
            Ok(ran)
        }
        Check::McClassify { data, remove, commutative, expect, potential } => {
            let (d, params) = b.data(data)?;
            let mut d = d.without(remove);
            if let Some(c) = commutative {
                d.commutative = *c;
            }
            let m0 = m0_deformed(&d).map_err(|e| e.to_string())?;
            let o = classify_obstruction(&d, &m0).map_err(|e| e.to_string())?;
            let (kind, detail) = match &o {
                Obstruction::Unobstructed => (ObstructionKind::Unobstructed, "unobstructed".to_string()),
                Obstruction::Weakly { unit, potential } => {
                    (ObstructionKind::Weakly, format!("weakly unobstructed, m0 = ({potential})*{unit}"))
                }
                Obstruction::Obstructed { offending } => {
                    let parts: Vec<String> = offending.iter().map(|(g, w)| format!("({w})*{g}")).collect();
                    (ObstructionKind::Obstructed, format!("obstructed, m0 = {}", parts.join(" + ")))
                }
            };
            let mut ran = Ran::new(detail);
            ran.expect(kind == *expect, || format!("classified {kind:?}, expected {expect:?}"));
            if let (Some(text), Obstruction::Weakly { potential: w, .. }) = (potential, &o) {
                match w.as_series() {
                    Some(s) => {
                        let want = series_expr(text, &d.ambient(), &params, prec)?;
                        ran.expect(series_agree(&s, &want), || format!("potential {s}, expected {want}"));
                    }
                    None => ran.expect(&w.to_string() == text, || format!("potential {w}, expected {text}")),
                }
            }
            Ok(ran)
        }
        Check::McSolve { data, source, unknowns, expect } => {
            let (d, params) = b.data(data)?;
            let sol = solve_relations(d, source, unknowns, prec)?;
            let got = relations_map(&sol);
            let shown: Vec<String> = sol.relations.iter().map(|r| format!("{} = {}", r.var, r.value)).collect();
            let mut ran = Ran::new(shown.join(", "));
            compare_map(&mut ran, &got, expect, &d.ambient(), &params, prec)?;
            for (g, s) in &sol.residual {
                ran.diffs.push(format!("equation `{g}` left unsolved: {s}"));
            }
            Ok(ran)
        }
        Check::Isomorphism { data, relations, solve, compositions, expect } => {
            let (d, params) = b.data(data)?;
            let rels: Vec<SolvedRelation> = match (relations, solve) {
                (Some(map), _) => map
                    .iter()
                    .map(|(v, text)| {
                        Ok(SolvedRelation { var: v.clone(), value: series_expr(text, &d.ambient(), &params, prec)? })
                    })
                    .collect::<Result<_, String>>()?,
                (None, Some(s)) => solve_relations(d, &s.source, &s.unknowns, prec)?.relations,
                (None, None) => Vec::new(),
            };
            let r = check_isomorphism_pair(d, compositions, &rels, prec).map_err(|e| e.to_string())?;
            let parts: Vec<String> = r
                .compositions
                .iter()
                .map(|c| match &c.coefficient {
                    Some(k) => format!("{} = ({k})*{}", c.target, c.target),
                    None => {
                        let comps: Vec<String> = c.components.iter().map(|(g, w)| format!("({w})*{g}")).collect();
                        format!("{}: {}", c.target, if comps.is_empty() { "0".into() } else { comps.join(" + ") })
                    }
                })
                .collect();
            let mut ran = Ran::new(parts.join("; "));
            ran.expect(r.ok == *expect, || format!("isomorphism is {}, expected {expect}", r.ok));
            Ok(ran)
        }
        Check::Install { data, source, unknowns, transition } => {
            let atlas = b.atlas()?;
            let (d, _) = b.data(data)?;
            let declared = atlas.transition(transition).map_err(err)?;
            let src = atlas.chart(&declared.src).map_err(err)?;
            let dst = atlas.chart(&declared.dst).map_err(err)?;
            let sol = solve_relations(d, source, unknowns, prec)?;
            let mut map = BTreeMap::new();
            for r in &sol.relations {
                let s = r
                    .value
                    .with_ambient(&src.ambient())
                    .map_err(|e| format!("relation for `{}` is not a function on `{}`: {e}", r.var, src.name))?;
                map.insert(r.var.clone(), s);
            }
            if let Some(v) = dst.vars.iter().find(|v| !map.contains_key(*v)) {
                return Err(format!("no relation determines `{v}`"));
            }
            let installed = Transition {
                id: format!("{transition} (solved)"),
                src: declared.src.clone(),
                dst: declared.dst.clone(),
                overlap: declared.overlap.clone(),
                map,
                inverse: None,
            };
            let pm = check_potential_match(atlas, &installed, prec).map_err(err)?;
            let shown: Vec<String> = installed.map.iter().map(|(k, v)| format!("{k} = {v}")).collect();
            let mut ran = Ran::new(format!("{}; potential residual {}", shown.join(", "), pm.residual));
            ran.expect(pm.ok, || format!("installed map changes the potential by {}", pm.residual));
            for (v, s) in &installed.map {
                ran.expect(series_agree(s, &declared.map[v]), || {
                    format!("{v}: solved {s}, declared {}", declared.map[v])
                });
            }
            ran.expect(sol.residual.is_empty(), || format!("{} equations left unsolved", sol.residual.len()));
            Ok(ran)
        }
        Check::Critical { chart, points, coordinates, values, components, excluded_points } => {
            let atlas = b.atlas()?;
            let c = atlas.chart(chart).map_err(err)?;
            let locus = critical_locus(c, &CritConfig::new(prec.clone())).map_err(|e| e.to_string())?;
            let params = b.atlas_params();
            let comps: Vec<String> = locus.components.iter().map(|c| c.to_string()).collect();
            let vals: Vec<String> = locus.points.iter().map(|p| p.value.to_string()).collect();
            let mut ran = Ran::new(format!(
                "{} points with values [{}], components [{}], {} excluded points",
                locus.points.len(),
                vals.join(", "),
                comps.join(", "),
                locus.excluded_points.len()
            ));
            if let Some(n) = points {
                ran.expect(locus.points.len() == *n, || format!("{} points, expected {n}", locus.points.len()));
            }
            if let Some(n) = excluded_points {
                ran.expect(locus.excluded_points.len() == *n, || {
                    format!("{} excluded points, expected {n}", locus.excluded_points.len())
                });
            }
            if let Some(expected) = coordinates {
                for e in expected {
                    let want: BTreeMap<String, Novikov> = e
                        .iter()
                        .map(|(v, t)| Ok((v.clone(), scalar_expr(t, &params, prec)?)))
                        .collect::<Result<_, String>>()?;
                    let found = locus.points.iter().any(|p| {
                        want.iter().all(|(v, x)| p.coordinates.get(v).is_some_and(|y| agree(x, y)))
                    });
                    ran.expect(found, || format!("no critical point at {e:?}"));
                }
            }
            if let Some(expected) = values {
                for t in expected {
                    let want = scalar_expr(t, &params, prec)?;
                    ran.expect(locus.points.iter().any(|p| agree(&p.value, &want)), || {
                        format!("no critical value {want}")
                    });
                }
            }
            if let Some(expected) = components {
                let mut want = expected.clone();
                want.sort();
                let mut got = comps.clone();
                got.sort();
                ran.expect(got == want, || format!("components {got:?}, expected {want:?}"));
            }
            Ok(ran)
        }
        Check::Transport { transition, point, expect, regime, expect_error } => {
            let atlas = b.atlas()?;
            let params = b.atlas_params();
            let t = atlas.step(&LoopStep::parse(transition)).map_err(err)?;
            let p: BTreeMap<String, Novikov> = point
                .iter()
                .map(|(v, text)| Ok((v.clone(), scalar_expr(text, &params, prec)?)))
                .collect::<Result<_, String>>()?;
            match transport_point(atlas, &t, &p, prec) {
                Err(e) => {
                    let mut ran = Ran::new(e.to_string());
                    let kind = match e {
                        AtlasError::OutsideOverlap { .. } => "outside_overlap",
                        _ => "other",
                    };
                    ran.expect(expect_error.as_deref() == Some(kind), || format!("unexpected error: {e}"));
                    Ok(ran)
                }
                Ok(r) => {
                    let shown: Vec<String> = r.image.iter().map(|(k, v)| format!("{k} = {v}")).collect();
                    let mut ran = Ran::new(format!("{} ({:?})", shown.join(", "), r.regime));
                    if let Some(e) = expect_error {
                        ran.diffs.push(format!("expected error {e}"));
                    }
                    if let Some(expect) = expect {
                        for (v, text) in expect {
                            let want = scalar_expr(text, &params, prec)?;
                            match r.image.get(v) {
                                Some(x) => ran.expect(agree(x, &want), || format!("{v}: got {x}, expected {want}")),
                                None => ran.diffs.push(format!("{v}: missing")),
                            }
                        }
                    }
                    if let Some(want) = regime {
                        ran.expect(r.regime == *want, || format!("regime {:?}, expected {want:?}", r.regime));
                    }
                    Ok(ran)
                }
            }
        }
        Check::TransportCritical { chart, steps } => transport_critical(b, chart, steps),
    }
}

fn transport_critical(b: &ModelBundle, chart: &str, steps: &[String]) -> Result<Ran, String> {
    let prec = &b.prec;
    let err = |e: AtlasError| e.to_string();
    let atlas = b.atlas()?;
    let src = atlas.chart(chart).map_err(err)?;
    let ts = steps
        .iter()
        .map(|s| atlas.step(&LoopStep::parse(s)))
        .collect::<Result<Vec<Transition>, _>>()
        .map_err(err)?;
    if ts[0].src != src.name {
        return Err(format!("the first step leaves `{}`, not `{chart}`", ts[0].src));
    }
    let locus = critical_locus(src, &CritConfig::new(prec.clone())).map_err(|e| e.to_string())?;
    let (first_overlap, _) = effective_overlap(atlas, &ts[0]).map_err(err)?;
    let mut starts: Vec<(String, BTreeMap<String, Novikov>)> = Vec::new();
    for p in &locus.points {
        if first_overlap.contains(&p.coordinates) {
            starts.push((format!("point with value {}", p.value), p.coordinates.clone()));
        }
    }
    for c in &locus.components {
        if let Some(s) = c.sample_in(&first_overlap) {
            starts.push((format!("component {c}"), s));
        }
    }
    let target = ExtRational::Finite(prec.energy.clone());
    let mut ran = Ran::new(format!(
        "{} of {} critical points and components meet the overlap of {}",
        starts.len(),
        locus.points.len() + locus.components.len(),
        steps[0]
    ));
    ran.expect(!starts.is_empty(), || "nothing to transport".into());
    for (label, start) in starts {
        let value = src.potential.evaluate(&start, prec).map_err(|e| e.to_string())?;
        let mut point = start;
        for t in &ts {
            let image = match transport_point(atlas, t, &point, prec) {
                Ok(r) => r.image,
                Err(e) => {
                    ran.diffs.push(format!("{label}: {} refuses the point: {e}", t.id));
                    break;
                }
            };
            let dst = atlas.chart(&t.dst).map_err(err)?;
            for v in &dst.vars {
                let g = dst.potential.partial_derivative(v).evaluate(&image, prec).map_err(|e| e.to_string())?;
                ran.expect(residual(&g) >= target, || {
                    format!("{label}: after {} the derivative in `{v}` is {g}", t.id)
                });
            }
            let w = dst.potential.evaluate(&image, prec).map_err(|e| e.to_string())?;
            ran.expect(residual(&w.sub(&value)) >= target, || {
                format!("{label}: after {} the critical value is {w}, started at {value}", t.id)
            });
            point = image;
        }
    }
    Ok(ran)
}
