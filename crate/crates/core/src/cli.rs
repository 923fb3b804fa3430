//! Command-line front end: the instance file format, one report builder per
//! command, and the exit-code contract (0 pass, 1 violation, 2 input error).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::complex::{
    cohomology, contracting_homotopy, differential, lowest_cover, solve_type_i, solve_type_i_min, solve_type_ii_at, type_i_to_type_ii,
    type_ii_to_type_i, Cochain, CochainSpace, Outcome, SystemTag,
};
use crate::delta::{generate_uniform, DeltaCertificate, OrdSet, RootSpec};
use crate::error::{Error, Result};
use crate::family::{
    is_trivialization_type_i, is_trivialization_type_ii, Family, FunctionSet, SparseZFn, TableJson, Threshold, TypeIWitness,
};
use crate::forcing::{check_compatibility_lemma, family_over_system, sample_instance, CollapsedCondition, PlantSpec};
use crate::grid::{GridPoint, Index, IndexTuple};
use crate::par::Exec;
use crate::propagation::{
    cap, default_lower_solver, extend_by_zero, plant_propagation_instance, propagate, resume, verify_sigma_coherent, LadderCheckpoint,
    PropagationOutcome, TrivializationLadder, WitnessJson,
};
use crate::subdivision::{
    build_psi, check_a_c_form, check_cancellation, evaluate_at, plant_cancellation_instance, plant_search_instance, search_coord_epsilon,
    witness_combo, EpsilonAssignment, SearchShape, SymbolicCombo,
};

/// On-disk instance: functions, families and run parameters in one file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(rename = "J")]
    pub columns: usize,
    pub indices: Vec<IndexEntry>,
    #[serde(default)]
    pub families: Vec<FamilyEntry>,
    #[serde(default)]
    pub thresholds: Vec<u32>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    /// Ids of the subfamily `A` used by `propagate` and `subdivide`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<u32>>,
    /// Increasing id blocks for the per-point `ε` search, pool 0 ⊇ `A`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pools: Option<Vec<Vec<u32>>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexEntry {
    pub id: u32,
    pub f: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyEntry {
    pub arity: usize,
    pub table: TableJson,
}

/// A validated instance.
#[derive(Debug, Clone)]
pub struct Instance {
    pub functions: Option<Arc<FunctionSet>>,
    pub families: Vec<Family>,
    pub thresholds: Vec<u32>,
    pub seeds: Vec<u64>,
    pub a: Option<BTreeSet<Index>>,
    pub pools: Option<Vec<Vec<u32>>>,
}

impl InstanceFile {
    pub fn parse(text: &str) -> Result<InstanceFile> {
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance files always serialize")
    }

    pub fn from_parts(fs: Option<&FunctionSet>, columns: usize, families: &[Family]) -> InstanceFile {
        InstanceFile {
            columns: fs.map_or(columns, FunctionSet::columns),
            indices: fs
                .map(|fs| {
                    fs.iter()
                        .map(|(i, f)| IndexEntry {
                            id: i.0,
                            f: f.values().to_vec(),
                        })
                        .collect()
                })
                .unwrap_or_default(),
            families: families
                .iter()
                .map(|f| FamilyEntry {
                    arity: f.arity(),
                    table: f.to_table_json(),
                })
                .collect(),
            thresholds: Vec::new(),
            seeds: Vec::new(),
            a: None,
            pools: None,
        }
    }

    pub fn validate(&self) -> Result<Instance> {
        let mut ids = BTreeSet::new();
        for e in &self.indices {
            if e.f.len() != self.columns {
                return Err(Error::Schema(format!(
                    "index {} has {} columns, J = {}",
                    e.id,
                    e.f.len(),
                    self.columns
                )));
            }
            if !ids.insert(e.id) {
                return Err(Error::Schema(format!("duplicate index id {}", e.id)));
            }
        }
        let functions = if self.indices.is_empty() {
            None
        } else {
            let values: Vec<(u32, Vec<u32>)> = self.indices.iter().map(|e| (e.id, e.f.clone())).collect();
            Some(Arc::new(FunctionSet::from_values(&values).map_err(schema)?))
        };
        let families = self
            .families
            .iter()
            .enumerate()
            .map(|(i, fam)| {
                let fs = functions
                    .clone()
                    .ok_or_else(|| Error::Schema(format!("family {i} needs at least one index")))?;
                Family::from_table_json(fam.arity, fs, None, &fam.table).map_err(|e| match e {
                    Error::Schema(m) => Error::Schema(format!("family {i}: {m}")),
                    e => Error::Schema(format!("family {i}: {e}")),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let a = match &self.a {
            None => None,
            Some(a) => {
                if let Some(x) = a.iter().find(|x| !ids.contains(x)) {
                    return Err(Error::Schema(format!("A mentions unknown index {x}")));
                }
                Some(a.iter().map(|&i| Index(i)).collect())
            }
        };
        if let Some(x) = self.pools.iter().flatten().flatten().find(|x| !ids.contains(x)) {
            return Err(Error::Schema(format!("pools mention unknown index {x}")));
        }
        Ok(Instance {
            functions,
            families,
            thresholds: self.thresholds.clone(),
            seeds: self.seeds.clone(),
            a,
            pools: self.pools.clone(),
        })
    }
}

fn schema(e: Error) -> Error {
    match e {
        Error::Schema(_) => e,
        other => Error::Schema(other.to_string()),
    }
}

pub fn load_instance(path: &Path) -> Result<Instance> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Schema(format!("cannot read {}: {e}", path.display())))?;
    InstanceFile::parse(&text)?.validate()
}

/// One named check in a report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub anchor: String,
    pub subject: String,
    pub pass: bool,
    pub detail: String,
}

fn check(anchor: &str, subject: impl fmt::Display, pass: bool, detail: impl Into<String>) -> Check {
    Check {
        anchor: anchor.to_string(),
        subject: subject.to_string(),
        pass,
        detail: detail.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub checks: Vec<Check>,
    pub data: Value,
}

impl Report {
    fn new(command: &str) -> Self {
        Report {
            command: command.to_string(),
            checks: Vec::new(),
            data: Value::Null,
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{}: {}\n", self.command, if self.passed() { "pass" } else { "FAIL" });
        for c in &self.checks {
            out += &format!(
                "  {} {} [{}] {}\n",
                if c.pass { "ok  " } else { "FAIL" },
                c.anchor,
                c.subject,
                c.detail
            );
        }
        out
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "derlim",
    version,
    about = "Exact checks on coherent families, derived limits and Δ-systems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Emit the JSON report (the default).
    #[arg(long, global = true)]
    pub json: bool,
    /// Emit a line per check instead of JSON.
    #[arg(long, global = true, conflicts_with = "json")]
    pub text: bool,
    /// Wall-clock budget in milliseconds; running past it exits with 2.
    #[arg(long, global = true, value_name = "MS")]
    pub budget: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded instance file.
    Gen(GenArgs),
    /// Check coherence of each family above the threshold.
    Check(InstanceArgs),
    /// Solve for type-I and type-II trivializations and cross-check them.
    Solve(InstanceArgs),
    /// Cohomology of a truncated system.
    Lim(LimArgs),
    /// Subdivision engine: symbolic forms, cancellation, per-point search.
    Subdivide(SubdivideArgs),
    /// Generate and verify a uniform Δ-system and condition family.
    Delta(DeltaArgs),
    /// Propagate a trivialization of `Φ↾A` to `Φ`.
    Propagate(PropagateArgs),
    /// Run a seeded batch of every lemma check.
    VerifyLemmas(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of indexed functions.
    #[arg(long, default_value_t = 3)]
    pub indices: usize,
    /// Column bound `J`.
    #[arg(long, default_value_t = 3)]
    pub columns: usize,
    #[arg(long, default_value_t = 3)]
    pub max_value: u32,
    /// Arity of the generated family; no family when omitted.
    #[arg(long)]
    pub degree: Option<usize>,
    /// Make the family trivial above the threshold.
    #[arg(long, requires = "degree")]
    pub planted: bool,
    #[arg(long, default_value_t = 0)]
    pub threshold: u32,
    /// Write the instance here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InstanceArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub threshold: Option<u32>,
    /// Only this family (position in the file).
    #[arg(long)]
    pub family: Option<usize>,
}

#[derive(Debug, Args)]
pub struct LimArgs {
    /// Functions come from here; otherwise a seeded set is generated.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "B", value_parser = parse_tag)]
    pub system: SystemTag,
    /// One degree; 1..=3 when omitted.
    #[arg(long)]
    pub degree: Option<usize>,
    /// Column split between `A` and `B/A`.
    #[arg(long)]
    pub threshold: Option<u32>,
}

#[derive(Debug, Args)]
pub struct SubdivideArgs {
    /// Needs one family plus `a` and `pools`; otherwise a planted instance.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2)]
    pub degree: usize,
    #[arg(long)]
    pub threshold: Option<u32>,
    /// Search nodes allowed per grid point.
    #[arg(long, default_value_t = 200_000)]
    pub nodes: u64,
    /// Constant boundary added to the planted family (even degree only);
    /// defaults to 1 for even degree, 0 otherwise.
    #[arg(long, allow_hyphen_values = true)]
    pub offset: Option<i64>,
}

#[derive(Debug, Args)]
pub struct DeltaArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2)]
    pub degree: usize,
    /// Ground size `h`.
    #[arg(long, default_value_t = 5)]
    pub ground: usize,
    /// Order type `ρ` of each member.
    #[arg(long, default_value_t = 3)]
    pub rho: usize,
    /// Cells in the collapsed condition pattern.
    #[arg(long, default_value_t = 4)]
    pub cells: usize,
}

#[derive(Debug, Args)]
pub struct PropagateArgs {
    /// Needs one family plus `a`; otherwise a planted instance.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2)]
    pub degree: usize,
    #[arg(long)]
    pub threshold: Option<u32>,
    /// Write the finished ladder here.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Continue from a saved ladder.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Instances per lemma.
    #[arg(long, default_value_t = 5)]
    pub count: u64,
}

fn parse_tag(s: &str) -> std::result::Result<SystemTag, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// What a run prints and returns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl CliOutput {
    fn input_error(e: &Error) -> Self {
        let diag = json!({ "error": { "kind": error_kind(e), "message": e.to_string() } });
        CliOutput {
            code: 2,
            stdout: serde_json::to_string_pretty(&diag).expect("json value") + "\n",
            stderr: format!("derlim: {e}\n"),
        }
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Domain(_) => "domain",
        Error::Arity { .. } => "arity",
        Error::Precondition(_) => "precondition",
        Error::Budget(_) => "budget",
        Error::Overflow(_) => "overflow",
        Error::Schema(_) => "schema",
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run_from<I, T>(args: I) -> CliOutput
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                CliOutput {
                    code,
                    stdout: text,
                    stderr: String::new(),
                }
            } else {
                CliOutput {
                    code,
                    stdout: String::new(),
                    stderr: text,
                }
            }
        }
    }
}

pub fn run(cli: &Cli) -> CliOutput {
    let deadline = Deadline::new(cli.budget);
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(a).and_then(|inst| {
            let text = inst.to_json() + "\n";
            match &a.output {
                Some(path) => std::fs::write(path, &text)
                    .map(|_| Output::Text(String::new()))
                    .map_err(|e| Error::Schema(format!("cannot write {}: {e}", path.display()))),
                None => Ok(Output::Text(text)),
            }
        }),
        Command::Check(a) => cmd_check(a).map(Output::Report),
        Command::Solve(a) => cmd_solve(a).map(Output::Report),
        Command::Lim(a) => cmd_lim(a).map(Output::Report),
        Command::Subdivide(a) => cmd_subdivide(a).map(Output::Report),
        Command::Delta(a) => cmd_delta(a).map(Output::Report),
        Command::Propagate(a) => cmd_propagate(a).map(Output::Report),
        Command::VerifyLemmas(a) => cmd_verify_lemmas(a, &deadline).map(Output::Report),
    };
    match result.and_then(|o| deadline.check().map(|_| o)) {
        Err(e) => CliOutput::input_error(&e),
        Ok(Output::Text(stdout)) => CliOutput {
            code: 0,
            stdout,
            stderr: String::new(),
        },
        Ok(Output::Report(r)) => CliOutput {
            code: r.exit_code(),
            stdout: if cli.text { r.to_text() } else { r.to_json() + "\n" },
            stderr: String::new(),
        },
    }
}

enum Output {
    Text(String),
    Report(Report),
}

struct Deadline {
    start: Instant,
    limit: Option<Duration>,
}

impl Deadline {
    fn new(ms: Option<u64>) -> Self {
        Deadline {
            start: Instant::now(),
            limit: ms.map(Duration::from_millis),
        }
    }

    fn check(&self) -> Result<()> {
        match self.limit {
            Some(l) if self.start.elapsed() > l => Err(Error::Budget(format!("run exceeded {} ms", l.as_millis()))),
            _ => Ok(()),
        }
    }
}

fn threshold_of(flag: Option<u32>, inst: &Instance) -> Threshold {
    Threshold(flag.or_else(|| inst.thresholds.first().copied()).unwrap_or(0))
}

fn selected(inst: &Instance, which: Option<usize>) -> Result<Vec<(usize, &Family)>> {
    match which {
        Some(i) => inst
            .families
            .get(i)
            .map(|f| vec![(i, f)])
            .ok_or_else(|| Error::Schema(format!("no family at position {i}"))),
        None => Ok(inst.families.iter().enumerate().collect()),
    }
}

fn first_family(inst: &Instance) -> Result<&Family> {
    inst.families
        .first()
        .ok_or_else(|| Error::Schema("instance has no families".into()))
}

fn point(p: GridPoint) -> String {
    format!("({}, {})", p.j, p.k)
}

pub fn witness_json(w: &TypeIWitness) -> Value {
    let j = match w {
        TypeIWitness::Single(psi) => WitnessJson::Single(psi.to_cells()),
        TypeIWitness::Family(f) => WitnessJson::Family(f.to_table_json()),
    };
    serde_json::to_value(j).expect("witness json")
}

fn random_family(seed: u64, fs: &Arc<FunctionSet>, arity: usize) -> Result<Family> {
    if arity == 0 || arity > fs.len() {
        return Err(Error::Domain(format!("cannot build arity {arity} on {} indices", fs.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_fa11);
    Family::from_fn(arity, fs.clone(), None, |_, d| {
        SparseZFn::from_entries(d.clone(), d.points().map(|p| (p, rng.gen_range(-1..=1))))
    })
}

pub fn cmd_gen(a: &GenArgs) -> Result<InstanceFile> {
    let mut file = if a.indices == 0 || a.columns == 0 {
        if a.degree.is_some() {
            return Err(Error::Domain("a family needs at least one index and one column".into()));
        }
        InstanceFile::from_parts(None, a.columns, &[])
    } else {
        let plant = a.degree.filter(|_| a.planted).map(|arity| PlantSpec {
            arity,
            threshold: a.threshold,
        });
        let s = sample_instance(a.seed, a.indices, a.columns, a.max_value, plant)?;
        let mut families: Vec<Family> = s.family.into_iter().collect();
        if let (Some(arity), false) = (a.degree, a.planted) {
            families.push(random_family(a.seed, &s.functions, arity)?);
        }
        InstanceFile::from_parts(Some(&s.functions), a.columns, &families)
    };
    file.thresholds = vec![a.threshold];
    file.seeds = vec![a.seed];
    Ok(file)
}

/// Coherence of one family above `l`.
pub fn coherence_check(i: usize, phi: &Family, l: Threshold) -> Check {
    match phi.first_incoherence(l) {
        None => check(
            "NCOH",
            format!("family {i}"),
            true,
            format!("boundaries vanish above column {}", l.0),
        ),
        Some((t, p)) => check(
            "NCOH",
            format!("family {i}"),
            false,
            format!("nonzero boundary at {t}, {}", point(p)),
        ),
    }
}

pub fn cmd_check(a: &InstanceArgs) -> Result<Report> {
    let inst = load_instance(&a.instance)?;
    let l = threshold_of(a.threshold, &inst);
    let mut r = Report::new("check");
    let mut rows = Vec::new();
    for (i, phi) in selected(&inst, a.family)? {
        let c = coherence_check(i, phi, l);
        rows.push(json!({ "family": i, "arity": phi.arity(), "coherent": c.pass }));
        r.checks.push(c);
    }
    r.data = json!({ "threshold": l.0, "families": rows });
    Ok(r)
}

/// Type-I and type-II solves at `l`, each witness pushed through the other
/// checker, and the verdict compared with that of `zero_below(Φ, l)`.
pub fn solve_checks(i: usize, phi: &Family, l: Threshold) -> Result<(Vec<Check>, Value)> {
    let subject = format!("family {i} at {}", l.0);
    let mut checks = Vec::new();
    let one = solve_type_i(phi, l)?;
    let two = solve_type_ii_at(phi, l)?;
    checks.push(check(
        "trivial_equivalence_fact",
        &subject,
        one.is_found() == two.is_found(),
        format!("type I {}, type II {}", found(one.is_found()), found(two.is_found())),
    ));
    let mut data = json!({ "family": i, "threshold": l.0, "type_i": null, "type_ii": null });
    if let Outcome::Found(w) = &one {
        let psi = type_i_to_type_ii(phi, w)?;
        let low = psi.support_column_max().is_none_or(|c| c <= l.0);
        let ok = low && is_trivialization_type_ii(phi, &psi, l)?;
        checks.push(check(
            "trivial_equivalence_fact",
            format!("{subject}, type I to type II"),
            ok,
            "converted witness checked",
        ));
        data["type_i"] = witness_json(w);
    }
    if let Outcome::Found(psi) = &two {
        let (l2, w) = type_ii_to_type_i(phi, psi, l)?;
        let ok = is_trivialization_type_i(phi, &w, l2)?;
        checks.push(check(
            "trivial_equivalence_fact",
            format!("{subject}, type II to type I"),
            ok,
            format!("converted witness checked above {}", l2.0),
        ));
        data["type_ii"] = serde_json::to_value(psi.to_table_json()).expect("table json");
    }
    let zeroed = phi.zero_below(l);
    let mut disagree = None;
    for m in l.0..=(phi.columns() as u32).max(l.0) {
        if solve_type_i(phi, Threshold(m))?.is_found() != solve_type_i(&zeroed, Threshold(m))?.is_found() {
            disagree = Some(m);
            break;
        }
    }
    checks.push(check(
        "eastofell",
        &subject,
        disagree.is_none(),
        match disagree {
            None => format!("verdicts agree after zeroing columns <= {} at every threshold from there up", l.0),
            Some(m) => format!("verdicts differ at threshold {m}"),
        },
    ));
    data["trivial"] = json!(one.is_found());
    Ok((checks, data))
}

fn found(b: bool) -> &'static str {
    if b {
        "found"
    } else {
        "infeasible"
    }
}

pub fn cmd_solve(a: &InstanceArgs) -> Result<Report> {
    let inst = load_instance(&a.instance)?;
    let mut r = Report::new("solve");
    let mut rows = Vec::new();
    for (i, phi) in selected(&inst, a.family)? {
        let l = match a.threshold.or_else(|| inst.thresholds.first().copied()) {
            Some(l) => Threshold(l),
            None => solve_type_i_min(phi)?.map_or(Threshold(phi.columns() as u32), |(l, _)| l),
        };
        let (checks, data) = solve_checks(i, phi, l)?;
        r.checks.extend(checks);
        rows.push(data);
    }
    r.data = json!({ "families": rows });
    Ok(r)
}

/// `d∘d = 0`, the vanishing of `B` with a homotopy round trip, and the
/// connecting isomorphism `H^n(B/A) ≅ H^{n+1}(A)`.
pub fn complex_checks(fs: &Arc<FunctionSet>, tag: SystemTag, split: Threshold, n: usize, seed: u64) -> Result<(Vec<Check>, Value)> {
    let subject = format!("{tag} degree {n}");
    let mut checks = Vec::new();
    let space = CochainSpace::new(tag, fs.clone(), split, n)?;
    let d0 = differential(&space)?;
    let d1 = differential(&space.next()?)?;
    checks.push(check(
        "cochain_complex",
        &subject,
        d1.matrix.mul(&d0.matrix)?.is_zero(),
        "composite of consecutive differentials",
    ));
    let rep = cohomology(tag, fs.clone(), split, n)?;
    let summary = |r: &crate::complex::CohomologyReport| format!("rank {}, torsion {:?}", r.rank, r.torsion);
    match tag {
        SystemTag::B if n >= 1 => {
            checks.push(check("vanishingB", &subject, rep.vanishes(), summary(&rep)));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let below = differential(&space.prev()?)?;
            let x = Cochain::from_fn(below.source.clone(), |_, _| rng.gen_range(-3..=3));
            let c = below.apply(&x)?;
            let h = contracting_homotopy(&c, &lowest_cover(fs))?;
            let back = below.apply(&h)?;
            checks.push(check(
                "vanishingB",
                format!("{subject}, homotopy"),
                back == c,
                "d(h(c)) = c on a seeded coboundary",
            ));
        }
        SystemTag::BmodA if n >= 1 => {
            let up = cohomology(SystemTag::A, fs.clone(), split, n + 1)?;
            let ok = up.rank == rep.rank && up.torsion == rep.torsion;
            checks.push(check(
                "les",
                &subject,
                ok,
                format!("{} vs A degree {}: {}", summary(&rep), n + 1, summary(&up)),
            ));
        }
        _ => {}
    }
    Ok((checks, serde_json::to_value(&rep).expect("cohomology json")))
}

pub fn cmd_lim(a: &LimArgs) -> Result<Report> {
    let (fs, split) = match &a.instance {
        Some(path) => {
            let inst = load_instance(path)?;
            let fs = inst
                .functions
                .clone()
                .ok_or_else(|| Error::Schema("instance has no indices".into()))?;
            (fs, threshold_of(a.threshold, &inst))
        }
        None => (
            sample_instance(a.seed, 3, 3, 3, None)?.functions,
            Threshold(a.threshold.unwrap_or(0)),
        ),
    };
    let degrees: Vec<usize> = a.degree.map_or_else(|| (1..=3).collect(), |n| vec![n]);
    let mut r = Report::new("lim");
    let mut rows = Vec::new();
    for n in degrees {
        let (checks, data) = complex_checks(&fs, a.system, split, n, a.seed)?;
        r.checks.extend(checks);
        rows.push(data);
    }
    r.data = json!({ "system": a.system.to_string(), "split": split.0, "cohomology": rows });
    Ok(r)
}

fn drop_at(b: &OrdSet, i: usize) -> OrdSet {
    let keep: Vec<usize> = (0..b.len()).filter(|&k| k != i).collect();
    b.select(&keep)
}

/// The pair expansion, the `A`/`C` normal form, the cancellation identity,
/// and the triangle equality on a seeded instance per degree.
pub fn symbolic_checks(seed: u64, max_degree: usize) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let pair = OrdSet::new(vec![0, 1])?;
    let eps = EpsilonAssignment::new([(pair.clone(), 2)].into())?;
    let faces = witness_combo(&pair, &eps)?.faces();
    let expect: BTreeMap<IndexTuple, i64> = [
        (IndexTuple::from_ids(&[1, 2]), 1),
        (IndexTuple::from_ids(&[0, 2]), -1),
        (IndexTuple::from_ids(&[0, 1]), 1),
    ]
    .into();
    checks.push(check("schematic_A2", "{0,1}", faces == expect, "faces of the pair witness"));
    for n in 2..=max_degree.max(2) {
        let b = OrdSet::from_unsorted(0..=n as u32);
        let eps = EpsilonAssignment::by_size_blocks(&b, n + 1);
        checks.push(check(
            "a_c_form",
            format!("n = {n}"),
            check_a_c_form(n, &b, &eps)?,
            format!("b = {b}"),
        ));
        let w = (seed % 7) as i64 - 3;
        let inst = plant_cancellation_instance(seed, n, w)?;
        let ok = check_cancellation(&inst.b, &inst.eps, &inst.phi, inst.point, inst.w)?;
        checks.push(check(
            "cancellation_fact",
            format!("n = {n}, w = {w}"),
            ok,
            format!("at {}", point(inst.point)),
        ));
        if n == 2 {
            let mut lhs = 0;
            for i in 0..inst.b.len() {
                let v = evaluate_at(&witness_combo(&drop_at(&inst.b, i), &inst.eps)?, &inst.phi, inst.point)?;
                lhs += if i % 2 == 0 { v } else { -v };
            }
            let rhs = evaluate_at(&SymbolicCombo::e_set(&inst.b), &inst.phi, inst.point)?;
            checks.push(check(
                "schematic_equality",
                format!("w = {w}"),
                lhs == rhs,
                format!("boundary sums {rhs} and {lhs}"),
            ));
        }
    }
    Ok(checks)
}

pub fn cmd_subdivide(a: &SubdivideArgs) -> Result<Report> {
    let mut r = Report::new("subdivide");
    r.checks = symbolic_checks(a.seed, a.degree.min(4))?;
    let (phi, a_set, pools, l) = match &a.instance {
        Some(path) => {
            let inst = load_instance(path)?;
            let phi = first_family(&inst)?.clone();
            let a_set = inst
                .a
                .clone()
                .ok_or_else(|| Error::Schema("subdivide needs the field \"a\"".into()))?;
            let pools = inst
                .pools
                .clone()
                .ok_or_else(|| Error::Schema("subdivide needs the field \"pools\"".into()))?;
            let l = threshold_of(a.threshold, &inst);
            (phi, a_set, pools, l)
        }
        None => {
            let shape = SearchShape {
                arity: a.degree,
                a_size: a.degree + 1,
                good: 1,
                decoys: 1,
                columns: 3,
                max_value: 2,
                threshold: a.threshold.unwrap_or(0),
                offset: a.offset.unwrap_or(if a.degree.is_multiple_of(2) { 1 } else { 0 }),
            };
            let p = plant_search_instance(a.seed, shape)?;
            (p.phi, p.a_set, p.pools, p.threshold)
        }
    };
    match search_coord_epsilon(&phi, &a_set, &pools, l, a.nodes, Exec::default())? {
        None => {
            r.checks
                .push(check("schematic_equality", "Φ↾A", false, "no per-point ε assignment exists"));
        }
        Some(ceps) => {
            let psi = build_psi(&phi, &ceps, &a_set)?;
            let ok = is_trivialization_type_ii(&phi.restrict(&a_set)?, &psi, l)?;
            r.checks.push(check(
                "schematic_equality",
                "Φ↾A",
                ok,
                format!("Ψ has matching boundaries above {}", l.0),
            ));
            r.data = json!({ "threshold": l.0, "points": ceps.cells.len(), "psi": psi.to_table_json() });
        }
    }
    Ok(r)
}

/// Round trip through the uniformity checker, the root-extension claims, and
/// the compatibility lemma on a condition family spread over the system.
pub fn delta_checks(seed: u64, n: usize, h: usize, rho: usize, cells: usize) -> Result<(Vec<Check>, Value)> {
    let subject = format!("seed {seed}, n = {n}, h = {h}, ρ = {rho}");
    let sys = generate_uniform(seed, n, h, rho, &RootSpec::Random)?;
    let mut checks = Vec::new();
    let again = crate::delta::verify_uniform(n, sys.ground(), sys.family())?;
    let same = again.as_ref().is_some_and(|s| s.roots() == sys.roots());
    checks.push(check("delta_system_def", &subject, same, "verified roots match the generator"));
    let ext = sys.verify_extension_roots();
    checks.push(check(
        "extension_lemma",
        &subject,
        ext.is_ok(),
        ext.map_or_else(|e| e.to_string(), |k| format!("{k} root derivations")),
    ));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc0de);
    let pattern = CollapsedCondition {
        cells: if rho == 0 {
            BTreeMap::new()
        } else {
            (0..cells)
                .map(|_| ((rng.gen_range(0..rho), rng.gen_range(0..3)), rng.gen_range(0..3)))
                .collect()
        },
    };
    let fam = family_over_system(&sys, &pattern)?;
    let rep = check_compatibility_lemma(n, sys.ground(), &fam)?;
    let detail = match &rep.counterexample {
        None => format!("{} aligned pairs compatible", rep.pairs_checked),
        Some((x, y)) => format!("{x} and {y} are aligned but incompatible"),
    };
    checks.push(check("compatibility_lemma", &subject, rep.holds(), detail));
    Ok((
        checks,
        serde_json::to_value(DeltaCertificate::from(&sys)).expect("certificate json"),
    ))
}

pub fn cmd_delta(a: &DeltaArgs) -> Result<Report> {
    let mut r = Report::new("delta");
    let (checks, cert) = delta_checks(a.seed, a.degree, a.ground, a.rho, a.cells)?;
    r.checks = checks;
    r.data = cert;
    Ok(r)
}

/// Cap round trip, `ς` coherence at every stage, and the final witness.
pub fn propagation_checks(
    phi: &Family,
    a_set: &BTreeSet<Index>,
    l: Threshold,
    from: Option<&LadderCheckpoint>,
) -> Result<(Vec<Check>, Value, Option<TrivializationLadder>)> {
    let mut checks = Vec::new();
    let first = phi.functions().indices()[0];
    let g = phi.functions().get(first)?;
    let capped = cap(phi, g)?;
    let back = cap(&extend_by_zero(&capped)?, g)?;
    checks.push(check(
        "below_prop",
        format!("cap at f_{first}"),
        back == capped,
        "extend by zero, then cap",
    ));
    let out = match from {
        Some(cp) => resume(
            phi,
            TrivializationLadder::from_checkpoint(phi, cp)?,
            &default_lower_solver,
            Exec::default(),
        )?,
        None => {
            let t1 = match solve_type_i(&phi.restrict(a_set)?, l)? {
                Outcome::Found(w) => w,
                Outcome::Infeasible(_) => {
                    checks.push(check(
                        "summarypropagatinglemma",
                        "Φ↾A",
                        false,
                        format!("no trivialization above {}", l.0),
                    ));
                    return Ok((checks, Value::Null, None));
                }
            };
            propagate(phi, a_set, &t1, l, &default_lower_solver, Exec::default())?
        }
    };
    let ladder = out.ladder();
    for k in 1..ladder.stage().min(ladder.arity()) {
        let Some(stage) = ladder.sigma(k) else { continue };
        let lk = ladder.thresholds()[k - 1];
        let mut bad = None;
        for f in stage.keys() {
            if !verify_sigma_coherent(ladder, k, f, lk)? {
                bad = Some(f.clone());
                break;
            }
        }
        let detail = bad.as_ref().map_or_else(
            || format!("{} families coherent above {}", stage.len(), lk.0),
            |f| format!("incoherent at {f}"),
        );
        checks.push(check("sigmadefinition", format!("stage {k}"), bad.is_none(), detail));
    }
    let shapes = serde_json::to_value(ladder.shapes()).expect("shape json");
    let data = match &out {
        PropagationOutcome::Trivialized { witness, threshold, .. } => {
            let ok = is_trivialization_type_i(phi, &TypeIWitness::Family(witness.clone()), *threshold)?;
            checks.push(check(
                "summarypropagatinglemma",
                "Φ",
                ok,
                format!("witness of arity {} above {}", witness.arity(), threshold.0),
            ));
            json!({ "threshold": threshold.0, "stages": shapes, "witness": witness.to_table_json() })
        }
        PropagationOutcome::StageFailed { stage, index, kind, .. } => {
            checks.push(check(
                "summarypropagatinglemma",
                "Φ",
                false,
                format!("stage {stage} failed at {index}: {kind:?}"),
            ));
            json!({ "stages": shapes })
        }
        PropagationOutcome::FinalCheckFailed { threshold, .. } => {
            checks.push(check(
                "summarypropagatinglemma",
                "Φ",
                false,
                format!("assembled witness fails above {}", threshold.0),
            ));
            json!({ "stages": shapes })
        }
    };
    Ok((checks, data, Some(out.ladder().clone())))
}

pub fn cmd_propagate(a: &PropagateArgs) -> Result<Report> {
    let (phi, a_set, l) = match &a.instance {
        Some(path) => {
            let inst = load_instance(path)?;
            let phi = first_family(&inst)?.clone();
            let a_set = inst
                .a
                .clone()
                .ok_or_else(|| Error::Schema("propagate needs the field \"a\"".into()))?;
            (phi, a_set, threshold_of(a.threshold, &inst))
        }
        None => {
            let n = a.degree;
            let p = plant_propagation_instance(a.seed, n, n + 2, n + 1, 3, 2, a.threshold.unwrap_or(1))?;
            (p.phi, p.a_set, p.threshold)
        }
    };
    let cp = match &a.resume {
        None => None,
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Schema(format!("cannot read {}: {e}", path.display())))?;
            Some(serde_json::from_str::<LadderCheckpoint>(&text).map_err(|e| Error::Schema(e.to_string()))?)
        }
    };
    let (checks, data, ladder) = propagation_checks(&phi, &a_set, l, cp.as_ref())?;
    if let (Some(path), Some(ladder)) = (&a.checkpoint, &ladder) {
        let text = serde_json::to_string_pretty(&ladder.to_checkpoint()).expect("checkpoint json") + "\n";
        std::fs::write(path, text).map_err(|e| Error::Schema(format!("cannot write {}: {e}", path.display())))?;
    }
    let mut r = Report::new("propagate");
    r.checks = checks;
    r.data = data;
    Ok(r)
}

/// Every lemma family over `count` seeds, folded to one check per anchor.
fn cmd_verify_lemmas(a: &VerifyArgs, deadline: &Deadline) -> Result<Report> {
    let mut all: Vec<Check> = Vec::new();
    for seed in a.seed..a.seed + a.count {
        let fs = sample_instance(seed, 3, 3, 3, None)?.functions;
        for tag in [SystemTag::A, SystemTag::B, SystemTag::BmodA] {
            for n in 0..=2 {
                all.extend(complex_checks(&fs, tag, Threshold(1), n, seed)?.0);
            }
        }
        for arity in 1..=2 {
            let s = sample_instance(seed, 3, 3, 3, Some(PlantSpec { arity, threshold: 1 }))?;
            let phi = s.family.expect("planted");
            all.extend(solve_checks(0, &phi, Threshold(1))?.0);
        }
        all.extend(symbolic_checks(seed, 3)?);
        let p = plant_propagation_instance(seed, 2, 4, 3, 3, 2, 1)?;
        all.extend(propagation_checks(&p.phi, &p.a_set, p.threshold, None)?.0);
        all.extend(delta_checks(seed, 2, 5, 3, 4)?.0);
        deadline.check()?;
    }
    let mut by_anchor: BTreeMap<String, (usize, usize, Option<String>)> = BTreeMap::new();
    for c in all {
        let e = by_anchor.entry(c.anchor).or_default();
        e.1 += 1;
        if c.pass {
            e.0 += 1;
        } else if e.2.is_none() {
            e.2 = Some(format!("{}: {}", c.subject, c.detail));
        }
    }
    let mut r = Report::new("verify-lemmas");
    for (anchor, (pass, total, first)) in &by_anchor {
        let detail = match first {
            None => format!("{pass}/{total} checks"),
            Some(f) => format!("{pass}/{total} checks; first failure {f}"),
        };
        r.checks.push(check(
            anchor,
            format!("seeds {}..{}", a.seed, a.seed + a.count),
            pass == total,
            detail,
        ));
    }
    r.data = json!({ "seeds": [a.seed, a.seed + a.count] });
    Ok(r)
}
