use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use choquet_core::classifier::{attach_cross_checks, classify, Budgets, Outcome};
use choquet_core::construction::{build_nonliouville_measure, verify_certificate, ConstructionConfig, Validity};
use choquet_core::corpus::{generate_corpus, CorpusSpec};
use choquet_core::groupoids::{rotation_action, uniform_weights, GroupoidHandle};
use choquet_core::groups::{fc_tower, GroupElement, GroupHandle, TowerStatus};
use choquet_core::harmonic::harmonic_space;
use choquet_core::markov::{hitting_measure, monte_carlo_chunk, sample_path, HittingMode, McCounts, MarkovOperator};
use choquet_core::rational::{fmt_q, q};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::formats::{
    build_group, build_groupoid, build_operator, groupoid_spec_of, operator_spec_of, parse_json, rational, read_json,
    CertificateFile, GroupSpec, Instance,
};
use crate::report::{rat, Report};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "choquet", version, about = "Random walks on discrete measured groupoids")]
pub struct Cli {
    /// Write the report here as well as to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide Choquet–Deny for a groupoid, within budgets.
    Classify(ClassifyArgs),
    /// Harmonic spaces of an operator, fiber by fiber.
    Liouville(InstanceArgs),
    /// Hitting measure of the walk on the isotropy group.
    Hitting(HittingArgs),
    /// Sample a path of the walk.
    Walk(WalkArgs),
    /// Iterated FC-centers of a group inside a ball.
    FcTower(FcTowerArgs),
    /// Build a non-Liouville symmetric measure with its certificate.
    Construct(ConstructArgs),
    /// Re-check a certificate written by `construct`.
    Verify(VerifyArgs),
    /// Write the seeded finite-fiber corpus as instance files.
    Corpus(CorpusArgs),
}

#[derive(Debug, Args)]
pub struct InstanceArgs {
    /// Instance file (groupoid plus operator).
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Restrict to one unit.
    #[arg(long)]
    pub unit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub radius: usize,
    #[arg(long, default_value_t = 20)]
    pub class_budget: usize,
    #[arg(long, default_value_t = 6)]
    pub max_levels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Exact,
    Enumerated,
    MonteCarlo,
}

#[derive(Debug, Args)]
pub struct HittingArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub unit: usize,
    #[arg(long, value_enum, default_value_t = Mode::Exact)]
    pub mode: Mode,
    #[arg(long, default_value_t = 8)]
    pub horizon: usize,
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub workers: u64,
    #[arg(long, default_value_t = 10_000)]
    pub step_cap: usize,
}

#[derive(Debug, Args)]
pub struct WalkArgs {
    /// Instance file; defaults to the swap walk of ℤ on two points.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub unit: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub length: usize,
}

#[derive(Debug, Args)]
pub struct FcTowerArgs {
    /// Group description, inline JSON or a file.
    #[arg(long)]
    pub group: String,
    #[arg(long, default_value_t = 4)]
    pub radius: usize,
    #[arg(long, default_value_t = 20)]
    pub class_budget: usize,
    #[arg(long, default_value_t = 6)]
    pub max_levels: usize,
}

#[derive(Debug, Args)]
pub struct ConstructArgs {
    /// Group description, inline JSON or a file.
    #[arg(long)]
    pub group: String,
    #[arg(long, default_value = "1/16")]
    pub epsilon: String,
    #[arg(long, default_value_t = 4)]
    pub depth: usize,
    #[arg(long, default_value_t = 2)]
    pub identity_levels: usize,
    #[arg(long, default_value_t = 64)]
    pub search_radius: usize,
    #[arg(long, default_value_t = 6_000_000)]
    pub power_cap: usize,
    /// Also write the bare certificate here.
    #[arg(long)]
    pub cert: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// A certificate file, or a `construct` report containing one.
    #[arg(long)]
    pub cert: PathBuf,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Directory receiving one instance file per member plus `index.json`.
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long, default_value_t = 20_240_229)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub relations: usize,
    #[arg(long, default_value_t = 16)]
    pub bundles: usize,
    #[arg(long, default_value_t = 16)]
    pub transformations: usize,
    #[arg(long, default_value_t = 16)]
    pub semidirects: usize,
    #[arg(long, default_value_t = 2)]
    pub min_orbit: usize,
    #[arg(long, default_value_t = 8)]
    pub max_orbit: usize,
}

/// A finished command: its report and the exit code it asks for.
#[derive(Debug)]
pub struct RunOutcome {
    pub report: Report,
    pub exit_code: u8,
}

fn positive(name: &str, v: usize) -> Result<(), CliError> {
    if v == 0 {
        return Err(CliError::Validation(format!("{name} must be positive")));
    }
    Ok(())
}

fn load_instance(path: &Path) -> Result<(GroupoidHandle, Option<MarkovOperator>), CliError> {
    let inst: Instance = read_json(path)?;
    let g = build_groupoid(&inst.groupoid).map_err(|e| e.in_file(path))?;
    let p = match &inst.operator {
        Some(spec) => Some(build_operator(&g, spec).map_err(|e| e.in_file(path))?),
        None => None,
    };
    Ok((g, p))
}

fn load_operator(path: &Path) -> Result<MarkovOperator, CliError> {
    load_instance(path)?
        .1
        .ok_or_else(|| CliError::Validation(format!("{}: instance has no operator", path.display())))
}

fn load_group(text: &str) -> Result<(GroupSpec, GroupHandle), CliError> {
    let spec: GroupSpec = if text.trim_start().starts_with('{') {
        parse_json(Path::new("<--group>"), text)?
    } else {
        read_json(Path::new(text))?
    };
    let g = build_group(&spec)?;
    Ok((spec, g))
}

fn check_unit(p: &MarkovOperator, x: usize) -> Result<(), CliError> {
    if x >= p.groupoid().num_units() {
        return Err(CliError::Validation(format!("unit {x} is not materialized")));
    }
    Ok(())
}

fn measure_json(atoms: &BTreeMap<GroupElement, choquet_core::rational::Q>) -> Value {
    Value::Object(atoms.iter().map(|(g, m)| (g.to_string(), rat(m))).collect())
}

fn outcome_tag(o: Outcome) -> &'static str {
    match o {
        Outcome::ChoquetDeny => "ChoquetDeny",
        Outcome::NotChoquetDeny => "NotChoquetDeny",
        Outcome::Inconclusive => "Inconclusive",
    }
}

/// The walk used by `walk` without `--in`: ℤ acting on `{0, 1}` by swapping, with `μ = ½(δ_1 + δ_{-1})`.
pub fn swap_walk() -> MarkovOperator {
    let z = GroupHandle::integers();
    let g = GroupoidHandle::transformation(&z, rotation_action(2), uniform_weights(2)).expect("valid action");
    let mu = BTreeMap::from([(GroupElement::int(1), q(1, 2)), (GroupElement::int(-1), q(1, 2))]);
    MarkovOperator::from_group_measure(&g, &mu).expect("valid measure")
}

pub fn run(cli: &Cli) -> Result<RunOutcome, CliError> {
    let start = Instant::now();
    let (mut report, exit_code) = match &cli.command {
        Command::Classify(a) => (classify_cmd(a)?, 0),
        Command::Liouville(a) => (liouville_cmd(a)?, 0),
        Command::Hitting(a) => (hitting_cmd(a)?, 0),
        Command::Walk(a) => (walk_cmd(a)?, 0),
        Command::FcTower(a) => (fc_tower_cmd(a)?, 0),
        Command::Construct(a) => (construct_cmd(a)?, 0),
        Command::Verify(a) => verify_cmd(a)?,
        Command::Corpus(a) => (corpus_cmd(a)?, 0),
    };
    report.timing_ms = start.elapsed().as_millis();
    Ok(RunOutcome { report, exit_code })
}

fn classify_cmd(a: &ClassifyArgs) -> Result<Report, CliError> {
    positive("radius", a.radius)?;
    positive("class budget", a.class_budget)?;
    positive("max levels", a.max_levels)?;
    let budgets = Budgets { ball_radius: a.radius, class_budget: a.class_budget, max_levels: a.max_levels };
    let mut report = Report::new(
        "classify",
        json!({ "in": a.input, "radius": a.radius, "class_budget": a.class_budget, "max_levels": a.max_levels }),
    );
    let (g, p) = load_instance(&a.input)?;
    let mut v = classify(&g, &budgets)?;
    if let Some(p) = &p {
        attach_cross_checks(&mut v, std::slice::from_ref(p));
        if v.cross_checks.is_empty() {
            report.warnings.push("no finite fibers, so no exact cross-checks against the operator".into());
        }
    }
    report.warnings.extend(v.diagnostics.iter().cloned());
    report.results = json!({
        "outcome": outcome_tag(v.outcome),
        "evidence": v.evidence.iter().map(|e| json!({
            "criterion": e.criterion, "result": e.result, "budget": e.budget,
        })).collect::<Vec<_>>(),
        "cross_checks": v.cross_checks.iter().map(|c| json!({
            "unit": c.unit,
            "nondegenerate": c.nondegenerate,
            "harmonic_dimension": c.harmonic_dimension,
            "consistent": c.consistent,
        })).collect::<Vec<_>>(),
    });
    Ok(report)
}

fn liouville_cmd(a: &InstanceArgs) -> Result<Report, CliError> {
    let mut report = Report::new("liouville", json!({ "in": a.input, "unit": a.unit }));
    let p = load_operator(&a.input)?;
    let units: Vec<usize> = match a.unit {
        Some(x) => {
            check_unit(&p, x)?;
            vec![x]
        }
        None => (0..p.groupoid().num_units()).collect(),
    };
    let mut fibers = Vec::new();
    let mut liouville = true;
    for x in units {
        let h = harmonic_space(&p, x)?;
        liouville &= h.is_liouville();
        fibers.push(json!({
            "unit": x,
            "fiber_size": h.fiber.len(),
            "dimension": h.dimension(),
            "liouville": h.is_liouville(),
            "basis": h.basis.iter().map(|v| {
                Value::Object(h.fiber.iter().zip(v).map(|(arrow, c)| (arrow.to_string(), Value::String(fmt_q(c)))).collect())
            }).collect::<Vec<_>>(),
        }));
    }
    report.results = json!({ "liouville": liouville, "fibers": fibers });
    Ok(report)
}

/// Monte Carlo hitting with one thread per worker; chunks are merged in worker
/// order, so the result depends on `(samples, seed, workers)` only.
fn monte_carlo_parallel(p: &MarkovOperator, x: usize, samples: u64, seed: u64, workers: u64, step_cap: usize) -> McCounts {
    let chunks: Vec<McCounts> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let n = samples / workers + u64::from(w < samples % workers);
                s.spawn(move || monte_carlo_chunk(p, x, n, seed, w, step_cap))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut total = McCounts::default();
    for c in chunks {
        total.merge(c);
    }
    total
}

fn hitting_cmd(a: &HittingArgs) -> Result<Report, CliError> {
    let mode_name = match a.mode {
        Mode::Exact => "exact",
        Mode::Enumerated => "enumerated",
        Mode::MonteCarlo => "monte-carlo",
    };
    let mut config = Map::new();
    config.insert("in".into(), json!(a.input));
    config.insert("unit".into(), json!(a.unit));
    config.insert("mode".into(), json!(mode_name));
    match a.mode {
        Mode::Exact => {}
        Mode::Enumerated => {
            positive("horizon", a.horizon)?;
            config.insert("horizon".into(), json!(a.horizon));
        }
        Mode::MonteCarlo => {
            if a.samples == 0 || a.workers == 0 {
                return Err(CliError::Validation("samples and workers must be positive".into()));
            }
            positive("step cap", a.step_cap)?;
            config.insert("samples".into(), json!(a.samples));
            config.insert("workers".into(), json!(a.workers));
            config.insert("step_cap".into(), json!(a.step_cap));
        }
    }
    let seed = match (a.mode, a.seed) {
        (Mode::MonteCarlo, None) => return Err(CliError::Validation("monte-carlo mode needs --seed".into())),
        (Mode::MonteCarlo, Some(s)) => {
            config.insert("seed".into(), json!(s));
            s
        }
        _ => 0,
    };
    let mut report = Report::new("hitting", Value::Object(config));
    let p = load_operator(&a.input)?;
    check_unit(&p, a.unit)?;
    let h = match a.mode {
        Mode::Exact => hitting_measure(&p, a.unit, HittingMode::ExactFinite)?,
        Mode::Enumerated => hitting_measure(&p, a.unit, HittingMode::Enumerated { horizon: a.horizon })?,
        Mode::MonteCarlo => {
            let mode = HittingMode::MonteCarlo { samples: a.samples, seed, step_cap: a.step_cap, workers: a.workers };
            monte_carlo_parallel(&p, a.unit, a.samples, seed, a.workers, a.step_cap).into_measure(a.unit, mode)
        }
    };
    let mut results = Map::new();
    results.insert("measure".into(), measure_json(&h.atoms));
    results.insert("total".into(), rat(&h.total()));
    results.insert("unaccounted_mass".into(), rat(&h.unaccounted_mass));
    if let Some(b) = &h.certified_bound {
        results.insert("certified_bound".into(), rat(b));
        if !num_traits::Zero::is_zero(&h.unaccounted_mass) {
            report.warnings.push(format!(
                "enumeration truncated at horizon {}; unaccounted mass {} is at most {}",
                a.horizon,
                fmt_q(&h.unaccounted_mass),
                fmt_q(b)
            ));
        }
    }
    if a.mode == Mode::MonteCarlo {
        report.warnings.push(format!("empirical frequencies from {} samples, seed {}", a.samples, seed));
        if !num_traits::Zero::is_zero(&h.unaccounted_mass) {
            report.warnings.push(format!("some walks did not return within {} steps", a.step_cap));
        }
    }
    report.results = Value::Object(results);
    Ok(report)
}

fn walk_cmd(a: &WalkArgs) -> Result<Report, CliError> {
    let mut report = Report::new(
        "walk",
        json!({ "in": a.input, "unit": a.unit, "seed": a.seed, "length": a.length }),
    );
    let p = match &a.input {
        Some(path) => load_operator(path)?,
        None => swap_walk(),
    };
    check_unit(&p, a.unit)?;
    let path = sample_path(&p, a.unit, a.length, a.seed);
    let positions: Vec<String> = path.steps.iter().map(|g| g.to_string()).collect();
    report.results = json!({
        "start": path.start,
        "positions": positions,
        "end": positions.last(),
    });
    Ok(report)
}

fn fc_tower_cmd(a: &FcTowerArgs) -> Result<Report, CliError> {
    positive("radius", a.radius)?;
    positive("class budget", a.class_budget)?;
    positive("max levels", a.max_levels)?;
    let (spec, group) = load_group(&a.group)?;
    let mut report = Report::new(
        "fc-tower",
        json!({ "group": spec, "radius": a.radius, "class_budget": a.class_budget, "max_levels": a.max_levels }),
    );
    let t = fc_tower(&group, a.radius, a.class_budget, a.max_levels)?;
    let status = match t.status {
        TowerStatus::Hypercentral => "Hypercentral",
        TowerStatus::StabilizedProper => "StabilizedProper",
        TowerStatus::BudgetExhausted => "BudgetExhausted",
    };
    if let Some(n) = &t.note {
        report.warnings.push(n.clone());
    }
    report.warnings.push(format!("all sets are restricted to the ball of radius {}", a.radius));
    report.results = json!({
        "status": status,
        "hypercentral_level": t.hypercentral_level(),
        "length": t.length(),
        "levels": t.levels.iter().map(|l| json!({
            "level": l.level,
            "size": l.members.len(),
            "quotient": l.quotient,
            "members": l.members.iter().map(|g| g.to_string()).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
    });
    Ok(report)
}

fn construct_cmd(a: &ConstructArgs) -> Result<Report, CliError> {
    let (spec, group) = load_group(&a.group)?;
    let config = ConstructionConfig {
        epsilon: rational(&a.epsilon)?,
        depth: a.depth,
        identity_levels: a.identity_levels,
        search_radius: a.search_radius,
        power_cap: a.power_cap,
        ..Default::default()
    };
    let mut report = Report::new(
        "construct",
        json!({
            "group": spec,
            "epsilon": fmt_q(&config.epsilon),
            "depth": a.depth,
            "identity_levels": a.identity_levels,
            "search_radius": a.search_radius,
            "power_cap": a.power_cap,
        }),
    );
    let cert = build_nonliouville_measure(&group, &config)?;
    let file = CertificateFile::from_certificate(&cert, spec);
    if let Some(path) = &a.cert {
        let text = serde_json::to_string_pretty(&file).expect("certificates serialize");
        std::fs::write(path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    report.warnings.push(format!(
        "level distribution truncated at depth {}; removed mass {} was renormalized away",
        a.depth,
        fmt_q(&cert.truncated_mass)
    ));
    report.results = json!({
        "support_size": cert.measure.len(),
        "certificate": file,
    });
    Ok(report)
}

fn verify_cmd(a: &VerifyArgs) -> Result<(Report, u8), CliError> {
    let mut report = Report::new("verify", json!({ "cert": a.cert }));
    let raw: Value = read_json(&a.cert)?;
    // accept a construct report as well as a bare certificate
    let body = raw.pointer("/results/certificate").cloned().unwrap_or(raw);
    let file: CertificateFile = serde_json::from_value(body)
        .map_err(|e| CliError::Validation(format!("{}: not a certificate: {e}", a.cert.display())))?;
    let cert = file.to_certificate().map_err(|e| e.in_file(&a.cert))?;
    let (results, code) = match verify_certificate(&cert) {
        Validity::Valid => (json!({ "valid": true }), 0),
        Validity::Invalid(check) => (json!({ "valid": false, "failed_check": check.to_string() }), 2),
    };
    report.results = results;
    Ok((report, code))
}

fn corpus_cmd(a: &CorpusArgs) -> Result<Report, CliError> {
    let spec = CorpusSpec {
        seed: a.seed,
        relations: a.relations,
        bundles: a.bundles,
        transformations: a.transformations,
        semidirects: a.semidirects,
        min_orbit: a.min_orbit,
        max_orbit: a.max_orbit,
    };
    let mut report = Report::new(
        "corpus",
        json!({
            "dir": a.dir,
            "seed": a.seed,
            "relations": a.relations,
            "bundles": a.bundles,
            "transformations": a.transformations,
            "semidirects": a.semidirects,
            "min_orbit": a.min_orbit,
            "max_orbit": a.max_orbit,
        }),
    );
    let corpus = generate_corpus(&spec)?;
    std::fs::create_dir_all(&a.dir).map_err(|e| CliError::Io(format!("{}: {e}", a.dir.display())))?;
    let mut index = Vec::with_capacity(corpus.len());
    for inst in &corpus {
        let file = Instance {
            name: Some(inst.name.clone()),
            groupoid: groupoid_spec_of(inst.operator.groupoid()),
            operator: Some(operator_spec_of(&inst.operator)),
        };
        let name = format!("{}.json", inst.name);
        let text = serde_json::to_string_pretty(&file).expect("instances serialize");
        let path = a.dir.join(&name);
        std::fs::write(&path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        index.push(json!({
            "name": inst.name,
            "family": inst.family.tag(),
            "file": name,
            "units": inst.operator.groupoid().num_units(),
        }));
    }
    let index_path = a.dir.join("index.json");
    let text = serde_json::to_string_pretty(&json!({ "seed": a.seed, "instances": index })).expect("index serializes");
    std::fs::write(&index_path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", index_path.display())))?;
    let mut counts = BTreeMap::new();
    for inst in &corpus {
        *counts.entry(inst.family.tag()).or_insert(0usize) += 1;
    }
    report.results = json!({ "instances": corpus.len(), "families": counts });
    Ok(report)
}
