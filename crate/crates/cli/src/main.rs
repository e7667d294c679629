//! `novikov`: validate chart atlases, classify disc data, solve for critical
//! loci and run model manifests.
//!
//! Exit status: 0 when every check passes, 1 when a check fails, 2 when the
//! input cannot be read or parsed.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use novikov_core::atlas::{
    check_potential_match, domain_feasible, transport_point, verify_cocycle, Atlas, AtlasError, CocycleReport,
    CocycleStatus, Domain, Feasibility, PotentialReport, Regime,
};
use novikov_core::crit::{critical_locus, CritConfig, CriticalLocus};
use novikov_core::expr::{parse_point, parse_rational, Params};
use novikov_core::format::{parse_atlas, parse_constraints, parse_disc_data, Overrides};
use novikov_core::mc::{classify_obstruction, m0_deformed, Obstruction};
use novikov_core::models::{self, ManifestReport, ModelBundle};
use novikov_core::multiseries::Precision;
use novikov_core::novikov::Rational;

#[derive(Parser)]
#[command(name = "novikov", version, about = "Exact checks for Novikov-ring deformation spaces")]
struct Cli {
    /// Energy cutoff, a positive rational.
    #[arg(long, global = true, env = "NOVIKOV_ENERGY", default_value = "5")]
    energy: String,
    /// Degree cutoff, a positive integer.
    #[arg(long, global = true, env = "NOVIKOV_DEGREE", default_value_t = 8)]
    degree: i64,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Text)]
    format: OutputFormat,
    /// Parameter override `NAME=EXPR`, applied to every input file.
    #[arg(long = "param", global = true, value_name = "NAME=EXPR")]
    params: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Text,
    Json,
}

/// An input file given by path or taken from a bundled model.
#[derive(Args)]
struct Input {
    path: Option<PathBuf>,
    /// Use a bundled model instead of a file.
    #[arg(long, conflicts_with = "path")]
    model: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Check potential matching on every transition and every declared loop.
    Validate {
        #[command(flatten)]
        input: Input,
    },
    /// Critical points and components of a chart potential.
    Critical {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        chart: String,
    },
    /// Classify m0 of disc data as unobstructed, weakly unobstructed or obstructed.
    McCheck {
        #[command(flatten)]
        input: Input,
        /// Disc-data file stem inside the model given by --model.
        #[arg(long, requires = "model")]
        data: Option<String>,
        /// Keep deformation variables as noncommuting letters.
        #[arg(long)]
        noncommutative: bool,
        /// Drop the contributions at these indices.
        #[arg(long, value_delimiter = ',')]
        remove: Vec<usize>,
    },
    /// Carry a point through a transition (`id` or `id^-1`).
    Transport {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        transition: String,
        /// Point literal such as `u=T^(1/2), v=T^(1/2)`.
        #[arg(long)]
        point: String,
    },
    /// Feasibility of a constraint file, with a witness or a certificate.
    Feasible {
        #[command(flatten)]
        input: Input,
        /// Constraint file stem inside the model given by --model.
        #[arg(long, requires = "model")]
        constraints: Option<String>,
    },
    /// Run model manifests.
    RunManifest {
        /// Bundled model; repeat for several.
        #[arg(long)]
        model: Vec<String>,
        /// Model directory with a manifest.json.
        #[arg(long)]
        dir: Option<PathBuf>,
        /// Every bundled model.
        #[arg(long)]
        all: bool,
    },
}

/// Problems with the input itself; exit status 2.
struct InputError(String);

impl<E: std::fmt::Display> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.to_string())
    }
}

struct Report {
    passed: bool,
    text: String,
    json: Value,
}

struct Config {
    prec: Precision,
    overrides: Overrides,
}

fn config(cli: &Cli) -> Result<Config, InputError> {
    let energy = parse_rational(&cli.energy, &Params::new()).map_err(|e| InputError(format!("--energy: {e}")))?;
    if energy <= Rational::zero() {
        return Err(InputError(format!("--energy must be positive, got {energy}")));
    }
    if cli.degree <= 0 {
        return Err(InputError(format!("--degree must be positive, got {}", cli.degree)));
    }
    let mut overrides = Overrides::new();
    for p in &cli.params {
        let (k, v) = p.split_once('=').ok_or_else(|| InputError(format!("--param `{p}` is not NAME=EXPR")))?;
        overrides.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(Config { prec: Precision::new(energy, cli.degree), overrides })
}

fn read(path: &Path) -> Result<String, InputError> {
    std::fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

/// Text of the input file; `bundled` names the model file used with --model.
fn input_text(input: &Input, bundled: Option<&str>, what: &str) -> Result<(String, String), InputError> {
    match (&input.path, &input.model) {
        (Some(p), _) => Ok((read(p)?, p.display().to_string())),
        (None, Some(m)) => {
            models::bundled_names()
                .contains(&m.as_str())
                .then_some(())
                .ok_or_else(|| InputError(format!("unknown model `{m}`")))?;
            let file = bundled.ok_or_else(|| InputError(format!("--model needs a {what} name")))?;
            let text = models::bundled_file(m, file)
                .ok_or_else(|| InputError(format!("model `{m}` has no file `{file}`")))?;
            Ok((text.to_string(), format!("{m}/{file}")))
        }
        (None, None) => Err(InputError(format!("give a {what} file or --model"))),
    }
}

fn load_atlas(input: &Input, cfg: &Config) -> Result<Atlas, InputError> {
    let (text, name) = input_text(input, Some("atlas.json"), "atlas")?;
    parse_atlas(&text, &cfg.overrides, &cfg.prec).map_err(|e| InputError(format!("{name}: {e}")))
}

fn residual_lines(r: &CocycleReport) -> Vec<String> {
    r.residuals.iter().filter(|(_, s)| !s.is_zero()).map(|(v, s)| format!("{v}: {s}")).collect()
}

fn cmd_validate(input: &Input, cfg: &Config) -> Result<Report, InputError> {
    let atlas = load_atlas(input, cfg)?;
    let mut text = String::new();
    let mut passed = true;
    let mut transitions: Vec<PotentialReport> = Vec::new();
    for t in &atlas.transitions {
        let r = check_potential_match(&atlas, t, &cfg.prec)?;
        passed &= r.ok;
        if r.ok {
            text += &format!("transition {}: potential preserved\n", r.transition);
        } else {
            text += &format!("transition {}: FAIL, residual W_src - W_dst(map) = {}\n", r.transition, r.residual);
        }
        transitions.push(r);
    }
    let mut loops: Vec<CocycleReport> = Vec::new();
    for l in &atlas.loops {
        let r = verify_cocycle(&atlas, l, &cfg.prec)?;
        let steps = r.steps.join(", ");
        match r.status {
            CocycleStatus::Identity => {
                let honest = if r.honest_feasibility.is_feasible() { "" } else { " (honest domains do not meet)" };
                text += &format!("loop [{steps}]: identity{honest}\n");
            }
            CocycleStatus::EmptyOverlap => text += &format!("loop [{steps}]: empty overlap\n"),
            CocycleStatus::Failed => {
                passed = false;
                text += &format!("loop [{steps}]: FAIL, residuals {}\n", residual_lines(&r).join(", "));
            }
        }
        loops.push(r);
    }
    if atlas.transitions.is_empty() && atlas.loops.is_empty() {
        text += "no transitions or loops to check\n";
    }
    text += if passed { "all checks pass\n" } else { "some checks fail\n" };
    let json = json!({ "passed": passed, "transitions": transitions, "loops": loops });
    Ok(Report { passed, text, json })
}

fn locus_text(l: &CriticalLocus) -> String {
    let mut out = format!("chart {} ({:?} potential)\n", l.chart, l.shape);
    let coords = |c: &BTreeMap<String, novikov_core::novikov::Novikov>| {
        c.iter().map(|(v, x)| format!("{v} = {x}")).collect::<Vec<_>>().join(", ")
    };
    out += &format!("{} critical points\n", l.points.len());
    for p in &l.points {
        out += &format!("  {}; W = {}; lifted to {}, residual {}\n", coords(&p.coordinates), p.value, p.lifted_to, p.residual);
    }
    if !l.components.is_empty() {
        out += &format!("{} critical components\n", l.components.len());
        for c in &l.components {
            out += &format!("  {c}, e.g. at {}\n", coords(&c.sample));
        }
    }
    for p in &l.excluded_points {
        out += &format!("outside the domain: {}; W = {}\n", coords(&p.coordinates), p.value);
    }
    for c in &l.excluded_components {
        out += &format!("outside the domain: {c}\n");
    }
    for u in &l.unlifted {
        out += &format!("not lifted: {} ({})\n", coords(&u.leading), u.reason);
    }
    for s in &l.symbolic {
        out += &format!("{} roots with {} a root of {}\n", s.count, s.variable, s.polynomial);
    }
    for u in &l.unresolved {
        out += &format!("unresolved: {u}\n");
    }
    out
}

fn cmd_critical(input: &Input, chart: &str, cfg: &Config) -> Result<Report, InputError> {
    let atlas = load_atlas(input, cfg)?;
    let c = atlas.chart(chart)?;
    let locus = critical_locus(c, &CritConfig::new(cfg.prec.clone()))?;
    Ok(Report { passed: true, text: locus_text(&locus), json: serde_json::to_value(&locus)? })
}

fn cmd_mc_check(
    input: &Input,
    data: Option<&str>,
    noncommutative: bool,
    remove: &[usize],
    cfg: &Config,
) -> Result<Report, InputError> {
    let file = data.map(|d| format!("{d}.json"));
    let (text, name) = input_text(input, file.as_deref(), "disc data")?;
    let mut d = parse_disc_data(&text, &cfg.overrides).map_err(|e| InputError(format!("{name}: {e}")))?;
    if let Some(&i) = remove.iter().find(|&&i| i >= d.contributions.len()) {
        return Err(InputError(format!("--remove {i}: there are {} contributions", d.contributions.len())));
    }
    d = d.without(remove);
    if noncommutative {
        d.commutative = false;
    }
    let o = classify_obstruction(&d, &m0_deformed(&d)?)?;
    let (passed, text) = match &o {
        Obstruction::Unobstructed => (true, "unobstructed: m0 = 0\n".to_string()),
        Obstruction::Weakly { unit, potential } => {
            (true, format!("weakly unobstructed: m0 = W*{unit}\nW = {potential}\n"))
        }
        Obstruction::Obstructed { offending } => {
            let mut t = "obstructed\n".to_string();
            for (g, w) in offending {
                t += &format!("  {g}: {w}\n");
            }
            (false, t)
        }
    };
    Ok(Report { passed, text, json: serde_json::to_value(&o)? })
}

fn cmd_transport(input: &Input, id: &str, point: &str, cfg: &Config) -> Result<Report, InputError> {
    let atlas = load_atlas(input, cfg)?;
    let t = atlas.step(&novikov_core::atlas::LoopStep::parse(id))?;
    let p = parse_point(point, &atlas.params, &cfg.prec).map_err(|e| InputError(format!("--point: {e}")))?;
    let src = atlas.chart(&t.src)?;
    if let Some(v) = p.keys().find(|v| !src.vars.contains(v)) {
        return Err(InputError(format!("`{v}` is not a variable of chart `{}`", src.name)));
    }
    match transport_point(&atlas, &t, &p, &cfg.prec) {
        Ok(r) => {
            let coords: Vec<String> = r.image.iter().map(|(v, x)| format!("{v} = {x}")).collect();
            let regime = match r.regime {
                Regime::Honest => "honest",
                Regime::Pseudo => "pseudo",
            };
            let text = format!("{} ({regime}): {}\n", r.transition, coords.join(", "));
            Ok(Report { passed: true, text, json: serde_json::to_value(&r)? })
        }
        Err(AtlasError::OutsideOverlap { constraint }) => Ok(Report {
            passed: false,
            text: format!("outside the overlap of {}: {constraint} fails\n", t.id),
            json: json!({ "transition": t.id, "error": "outside_overlap", "constraint": constraint }),
        }),
        Err(e) => Err(e.into()),
    }
}

fn feasibility_text(domain: &Domain, f: &Feasibility) -> String {
    match f {
        Feasibility::Feasible { witness, .. } => {
            let w: Vec<String> = witness.iter().map(|(v, r)| format!("val({v}) = {r}")).collect();
            format!("feasible: {domain}\nwitness: {}\n", if w.is_empty() { "(no variables)".into() } else { w.join(", ") })
        }
        Feasibility::Infeasible { certificates } => {
            let mut t = format!("infeasible: {domain}\n");
            for c in certificates {
                let parts: Vec<String> = c.iter().map(|x| x.to_string()).collect();
                t += &format!("certificate: {}\n", parts.join(" contradicts "));
            }
            t
        }
    }
}

fn cmd_feasible(input: &Input, constraints: Option<&str>, cfg: &Config) -> Result<Report, InputError> {
    let file = constraints.map(|c| format!("{c}.json"));
    let (text, name) = input_text(input, file.as_deref(), "constraint")?;
    let domain = parse_constraints(&text, &cfg.overrides).map_err(|e| InputError(format!("{name}: {e}")))?;
    let f = domain_feasible(&domain);
    #[derive(Serialize)]
    struct Out<'a> {
        domain: String,
        #[serde(flatten)]
        result: &'a Feasibility,
    }
    let json = serde_json::to_value(Out { domain: domain.to_string(), result: &f })?;
    Ok(Report { passed: f.is_feasible(), text: feasibility_text(&domain, &f), json })
}

fn manifest_text(r: &ManifestReport) -> String {
    let mut t = String::new();
    for o in &r.outcomes {
        let variant = o.variant.as_ref().map(|v| format!(" [{v}]")).unwrap_or_default();
        t += &format!("{} {}{variant} {}: {}\n", if o.passed { "PASS" } else { "FAIL" }, r.model, o.check, o.detail);
        for d in &o.diffs {
            t += &format!("    {d}\n");
        }
    }
    t
}

fn cmd_run_manifest(names: &[String], dir: Option<&Path>, all: bool, cfg: &Config) -> Result<Report, InputError> {
    let mut bundles: Vec<ModelBundle> = Vec::new();
    let mut names: Vec<String> = names.to_vec();
    if all {
        names.extend(models::bundled_names().into_iter().map(String::from));
    }
    for n in &names {
        bundles.push(models::load_model_with(n, &cfg.overrides, &cfg.prec)?);
    }
    if let Some(d) = dir {
        bundles.push(models::load_model_dir(d, &cfg.overrides, &cfg.prec)?);
    }
    if bundles.is_empty() {
        return Err(InputError("give --model, --dir or --all".into()));
    }
    let reports: Vec<ManifestReport> = bundles.iter().map(models::run_manifest).collect();
    let passed = reports.iter().all(|r| r.passed);
    let total: usize = reports.iter().map(|r| r.outcomes.len()).sum();
    let failed: usize = reports.iter().map(|r| r.failures().count()).sum();
    let mut text: String = reports.iter().map(manifest_text).collect();
    text += &format!("{} of {total} checks pass\n", total - failed);
    Ok(Report { passed, text, json: serde_json::to_value(&reports)? })
}

fn run(cli: &Cli) -> Result<Report, InputError> {
    let cfg = config(cli)?;
    match &cli.command {
        Command::Validate { input } => cmd_validate(input, &cfg),
        Command::Critical { input, chart } => cmd_critical(input, chart, &cfg),
        Command::McCheck { input, data, noncommutative, remove } => {
            cmd_mc_check(input, data.as_deref(), *noncommutative, remove, &cfg)
        }
        Command::Transport { input, transition, point } => cmd_transport(input, transition, point, &cfg),
        Command::Feasible { input, constraints } => cmd_feasible(input, constraints.as_deref(), &cfg),
        Command::RunManifest { model, dir, all } => cmd_run_manifest(model, dir.as_deref(), *all, &cfg),
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match run(&cli) {
        Ok(report) => {
            let body = match cli.format {
                OutputFormat::Text => report.text,
                OutputFormat::Json => {
                    serde_json::to_string_pretty(&report.json).expect("reports serialize") + "\n"
                }
            };
            // a closed pipe is not worth a panic
            let _ = out.write_all(body.as_bytes());
            ExitCode::from(if report.passed { 0 } else { 1 })
        }
        Err(InputError(message)) => {
            match cli.format {
                OutputFormat::Text => eprintln!("error: {message}"),
                OutputFormat::Json => {
                    let _ = writeln!(out, "{}", serde_json::to_string_pretty(&json!({ "error": message })).expect("json"));
                }
            }
            ExitCode::from(2)
        }
    }
}
