//! Experiment harness behind the `hybridts` binary: seeded pipelines over every module,
//! JSON-lines per-instance records and one aggregate report per run.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::decomposition::{
    decompose, decompose_uniform, fit_line, hybrid_exponent_experiment, hybrid_query_count, leaves_bound_check,
    CostModel, DecompositionError, LeavesBound, Measure, Phi, UniformTree, EXPONENT_TOLERANCE,
};
use crate::formula::{index_width, parse_dimacs, random_kcnf, CnfFormula, FormulaError};
use crate::latticesat::{
    copy_chains_consistent, equisat_check, lattice_to_cnf, reduce_3sat_to_lattice, validate_lattice, LatticeError,
};
use crate::qcircuit::{
    build_clause_oracle, grover_closed_form, grover_on_marks, grover_optimal_iterations, grover_search,
    oracle_phase_deviation, qpe_counter, qpe_counter_ancillas, qpe_counter_circuit, qpe_standard,
    qpe_zero_closed_form, random_unitary, CircuitError, OracleKind,
};
use crate::qwalk::{
    build_walk_operator, detect_with_acceptance, dim_cap, trial_acceptance, DetectionParams, DetectionVerdict,
    WalkError, WalkTree,
};
use crate::sia::{random_banded_kcnf, sia_reference, siar_execute, siar_schedule, schedule_peak_live, SiaError, SiaInstance};
use crate::treesearch::{
    build_tree, dnc_ppsz_solve, dpll_solve, random_permutation, tree_stats, EngineConfig, Outcome, SearchError,
    SearchTreeStats, DEFAULT_NODE_LIMIT,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Clause densities cycled through by generated instances, from mostly satisfiable to
/// mostly unsatisfiable.
const DENSITIES: [f64; 5] = [2.5, 3.5, 4.26, 5.0, 6.0];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("bad spec: {0}")]
    BadSpec(String),
    #[error("resource cap: {0}")]
    ResourceCap(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Decomposition(#[from] DecompositionError),
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Sia(#[from] SiaError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Parser, Debug, Clone)]
#[command(name = "hybridts", version, about = "Seeded experiments for hybrid divide-and-conquer SAT tree search")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub args: RunArgs,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Solve each instance and report verdict plus tree statistics.
    Solve,
    /// Build explicit search trees and check the leaf-count bounds.
    TreeStats,
    /// Split search trees into a classical top and quantum-delegated subtrees.
    Decompose,
    /// Fit the hybrid query exponent on the synthetic uniform family.
    FitExponent,
    /// Detect marked vertices with the exact walk phase estimation.
    QwalkDetect,
    /// Grover search against its closed form, with oracle phase checks.
    Grover,
    /// Standard against counter-based phase estimation on random eigenpairs.
    QpeCompare,
    /// Reversible s-implication with advice against the reference.
    SiaRun,
    /// Emit the pebbling schedule for k levels.
    PebbleSchedule,
    /// Reduce 3-CNF to Lattice SAT and check equisatisfiability.
    LatticeReduce,
    /// Brute-force top search with Grover on the suffix subcubes.
    SethHybrid,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::TreeStats => "tree-stats",
            Command::Decompose => "decompose",
            Command::FitExponent => "fit-exponent",
            Command::QwalkDetect => "qwalk-detect",
            Command::Grover => "grover",
            Command::QpeCompare => "qpe-compare",
            Command::SiaRun => "sia-run",
            Command::PebbleSchedule => "pebble-schedule",
            Command::LatticeReduce => "lattice-reduce",
            Command::SethHybrid => "seth-hybrid",
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    #[default]
    Dpll,
    Dnc,
}

impl Engine {
    fn label(self) -> &'static str {
        match self {
            Engine::Dpll => "dpll",
            Engine::Dnc => "dncPPSZ",
        }
    }
}

/// Flags shared by every subcommand. `--seed` is mandatory.
#[derive(Args, Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunArgs {
    /// DIMACS instances; without any, instances are generated from the seed.
    #[arg(long, global = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Record destination; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub kappa: Option<f64>,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true)]
    pub budget: Option<usize>,
    #[arg(long, global = true)]
    pub s: Option<usize>,
    #[arg(long, global = true)]
    pub w: Option<usize>,
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Generated instances, or repetitions where the command has no instances.
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long, global = true, value_enum, default_value_t = Engine::Dpll)]
    pub engine: Engine,
    /// Variables of generated instances, or the smallest size of a sweep.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Largest size of a sweep.
    #[arg(long, global = true)]
    pub n_max: Option<usize>,
    /// Pebbling levels.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Detection repetitions per tree.
    #[arg(long, global = true)]
    pub reps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExperimentSpec {
    pub command: Command,
    #[serde(flatten)]
    pub args: RunArgs,
}

impl ExperimentSpec {
    pub fn new(command: Command, seed: u64) -> Self {
        ExperimentSpec { command, args: RunArgs { seed: Some(seed), ..RunArgs::default() } }
    }

    fn seed(&self) -> Result<u64, CliError> {
        self.args.seed.ok_or_else(|| CliError::BadSpec("--seed is required".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub spec: ExperimentSpec,
    /// Sorted by `instanceId`.
    pub records: Vec<Value>,
    pub aggregate: Value,
    /// Hard-failure invariants that did not hold; a nonempty list fails the run.
    pub failures: Vec<String>,
    pub wall_time: f64,
}

impl RunReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }

    /// The report with every wall-time field zeroed, for reproducibility comparisons.
    pub fn without_timings(&self) -> RunReport {
        let mut r = self.clone();
        r.wall_time = 0.0;
        for rec in &mut r.records {
            if let Some(t) = rec.get_mut("wallTime") {
                *t = json!(0.0);
            }
        }
        r
    }
}

/// Per-instance stream: the base seed with the instance index as the ChaCha stream.
pub fn instance_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Random 3-CNF with `n` variables at the `i`-th density of the cycle.
pub fn generated_instance(seed: u64, index: usize, n: usize) -> CnfFormula {
    let mut rng = instance_rng(seed, index);
    let m = (DENSITIES[index % DENSITIES.len()] * n as f64).round() as usize;
    random_kcnf(n, m.max(1), 3.min(n), &mut rng)
}

struct Instance {
    id: String,
    index: usize,
    formula: CnfFormula,
}

fn load_instances(spec: &ExperimentSpec, default_n: usize, default_trials: usize) -> Result<Vec<Instance>, CliError> {
    let seed = spec.seed()?;
    if !spec.args.input.is_empty() {
        let mut out = Vec::new();
        for (index, p) in spec.args.input.iter().enumerate() {
            let text = std::fs::read_to_string(p)
                .map_err(|source| CliError::Io { path: p.display().to_string(), source })?;
            let id = p.file_name().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
            out.push(Instance { id, index, formula: parse_dimacs(&text)? });
        }
        out.sort_by(|a, b| a.id.cmp(&b.id));
        return Ok(out);
    }
    let n = spec.args.n.unwrap_or(default_n);
    if n == 0 {
        return Err(CliError::BadSpec("--n must be positive".into()));
    }
    let trials = spec.args.trials.unwrap_or(default_trials);
    Ok((0..trials)
        .map(|index| Instance { id: format!("gen-{index:05}"), index, formula: generated_instance(seed, index, n) })
        .collect())
}

/// Maps over items on scoped threads; results keep input order.
fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync) -> Vec<U> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len());
    if threads <= 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    std::thread::scope(|sc| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| {
                let f = &f;
                sc.spawn(move || part.iter().map(f).collect::<Vec<_>>())
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

struct Outcomes {
    records: Vec<Value>,
    failures: Vec<String>,
}

/// Collects per-instance `(record, failures)` pairs in instance order.
fn gather(results: Vec<Result<(Value, Vec<String>), CliError>>) -> Result<Outcomes, CliError> {
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        let (rec, fails) = r?;
        records.push(rec);
        failures.extend(fails);
    }
    records.sort_by(|a, b| a["instanceId"].as_str().cmp(&b["instanceId"].as_str()));
    Ok(Outcomes { records, failures })
}

fn obj(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => unreachable!(),
    }
}

fn stats_record(id: &str, engine: &str, seed: u64, s: &SearchTreeStats, verdict: &str, wall: f64) -> Map<String, Value> {
    obj(json!({
        "instanceId": id,
        "engine": engine,
        "seed": seed,
        "T": s.size,
        "height": s.height,
        "br": s.max_branching,
        "K": s.leaf_count,
        "T′": s.effective_size,
        "verdict": verdict,
        "wallTime": wall,
    }))
}

fn engine_config(spec: &ExperimentSpec, f: &CnfFormula, index: usize) -> Result<EngineConfig, CliError> {
    let n = f.num_vars();
    Ok(match spec.args.engine {
        Engine::Dpll => EngineConfig::dpll(n),
        Engine::Dnc => {
            let mut rng = instance_rng(spec.seed()? ^ 0x5eed_0f9e, index);
            let perm = random_permutation(n, &mut rng);
            EngineConfig::dnc_ppsz(perm, spec.args.s.unwrap_or(3), spec.args.budget.unwrap_or(n))
        }
    })
}

fn model_dimacs(m: &[bool]) -> Vec<i64> {
    m.iter().enumerate().map(|(i, &b)| if b { i as i64 + 1 } else { -(i as i64 + 1) }).collect()
}

/// Runs one experiment. Errors are bad specs and resource caps; invariant violations are
/// reported in `failures`.
pub fn run(spec: &ExperimentSpec) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let seed = spec.seed()?;
    let (outcomes, aggregate) = match spec.command {
        Command::Solve => run_solve(spec, seed)?,
        Command::TreeStats => run_tree_stats(spec, seed)?,
        Command::Decompose => run_decompose(spec, seed)?,
        Command::FitExponent => run_fit_exponent(spec)?,
        Command::QwalkDetect => run_qwalk_detect(spec, seed)?,
        Command::Grover => run_grover(spec, seed)?,
        Command::QpeCompare => run_qpe_compare(spec, seed)?,
        Command::SiaRun => run_sia(spec, seed)?,
        Command::PebbleSchedule => run_pebble_schedule(spec)?,
        Command::LatticeReduce => run_lattice_reduce(spec, seed)?,
        Command::SethHybrid => run_seth_hybrid(spec, seed)?,
    };
    for rec in &outcomes.records {
        check_finite(rec)?;
    }
    check_finite(&aggregate)?;
    Ok(RunReport {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        spec: spec.clone(),
        records: outcomes.records,
        aggregate,
        failures: outcomes.failures,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

fn check_finite(v: &Value) -> Result<(), CliError> {
    match v {
        // serde_json writes non-finite floats as null, which cannot be told apart from absent data.
        Value::Number(n) if n.as_f64().is_some_and(|x| !x.is_finite()) => {
            Err(CliError::BadSpec("non-finite numeric field".into()))
        }
        Value::Array(a) => a.iter().try_for_each(check_finite),
        Value::Object(m) => m.values().try_for_each(check_finite),
        _ => Ok(()),
    }
}

type Ran = (Outcomes, Value);

fn run_solve(spec: &ExperimentSpec, seed: u64) -> Result<Ran, CliError> {
    let instances = load_instances(spec, 12, 20)?;
    let results = par_map(&instances, |inst| {
        let t0 = Instant::now();
        let f = &inst.formula;
        let cfg = engine_config(spec, f, inst.index)?;
        let res = match spec.args.engine {
            Engine::Dpll => dpll_solve(f, &cfg)?,
            Engine::Dnc => dnc_ppsz_solve(f, &cfg)?,
        };
        let stats = tree_stats(f, &cfg)?;
        let mut fails = Vec::new();
        let mut rec = stats_record(&inst.id, spec.args.engine.label(), seed, &stats, res.outcome.label(), 0.0);
        if let Outcome::Sat(m) = &res.outcome {
            if !f.eval_full(m) {
                fails.push(format!("{}: reported model does not satisfy the formula", inst.id));
            }
            rec.insert("model".into(), json!(model_dimacs(m)));
        }
        if res.visited != stats.effective_size {
            fails.push(format!("{}: visited {} but T′ = {}", inst.id, res.visited, stats.effective_size));
        }
        rec.insert("n".into(), json!(f.num_vars()));
        rec.insert("m".into(), json!(f.num_clauses()));
        rec.insert("wallTime".into(), json!(t0.elapsed().as_secs_f64()));
        Ok((Value::Object(rec), fails))
    });
    let out = gather(results)?;
    let count = |v: &str| out.records.iter().filter(|r| r["verdict"] == v).count();
    let agg = json!({"instances": out.records.len(), "sat": count("sat"), "unsat": count("unsat"), "notFound": count("notFound")});
    Ok((out, agg))
}

fn run_tree_stats(spec: &ExperimentSpec, seed: u64) -> Result<Ran, CliError> {
    let instances = load_instances(spec, 10, 20)?;
    let results = par_map(&instances, |inst| {
        let t0 = Instant::now();
        let cfg = engine_config(spec, &inst.formula, inst.index)?;
        let tree = build_tree(&inst.formula, &cfg, DEFAULT_NODE_LIMIT)?;
        let stats = tree.stats();
        let verdict = if stats.sat_leaves > 0 { "sat" } else { "noSatLeaf" };
        let mut rec = stats_record(&inst.id, spec.args.engine.label(), seed, &stats, verdict, 0.0);
        let mut fails = Vec::new();
        let bound = leaves_bound_check(&tree);
        if let LeavesBound::Violated { .. } = bound {
            fails.push(format!("{}: leaf-count bound violated", inst.id));
        }
        rec.insert("leavesBound".into(), serde_json::to_value(&bound)?);
        rec.insert("satLeaves".into(), json!(stats.sat_leaves));
        rec.insert("wallTime".into(), json!(t0.elapsed().as_secs_f64()));
        Ok((Value::Object(rec), fails))
    });
    let out = gather(results)?;
    let agg = json!({"instances": out.records.len(), "violations": out.failures.len()});
    Ok((out, agg))
}

fn run_decompose(spec: &ExperimentSpec, seed: u64) -> Result<Ran, CliError> {
    let kappa = spec.args.kappa.unwrap_or(0.5);
    let model = CostModel::new(Phi::Sqrt, Measure::Height);
    if let (Some(lambda), true) = (spec.args.lambda, spec.args.input.is_empty()) {
        // Analytic uniform family.
        let n = spec.args.n.unwrap_or(20);
        let tree = UniformTree::spread(n, lambda);
        let budget = spec.args.budget.unwrap_or((kappa * n as f64).floor() as usize);
        let d = decompose_uniform(&tree, Measure::Height, budget);
        let rec = json!({
            "instanceId": format!("uniform-n{n}"),
            "engine": "uniform",
            "seed": seed,
            "T": tree.size(),
            "height": tree.height(),
            "br": tree.max_branching(),
            "K": tree.leaf_count(),
            "budget": budget,
            "topTreeSize": d.top_tree_size,
            "subtrees": d.subtree_count(),
            "extendedJ": d.extended_j,
            "averageSubtreeSize": d.average_subtree_size(),
            "hybridQueries": hybrid_query_count(&d, &model),
            "wallTime": 0.0,
        });
        let mut failures = Vec::new();
        if d.reconstituted_size() != tree.size() {
            failures.push("uniform decomposition does not reconstitute the tree".into());
        }
        let agg = json!({"lambda": lambda, "kappaPrime": kappa});
        return Ok((Outcomes { records: vec![rec], failures }, agg));
    }
    let instances = load_instances(spec, 10, 20)?;
    let results = par_map(&instances, |inst| {
        let t0 = Instant::now();
        let cfg = engine_config(spec, &inst.formula, inst.index)?;
        let tree = build_tree(&inst.formula, &cfg, DEFAULT_NODE_LIMIT)?;
        let stats = tree.stats();
        let budget = spec.args.budget.unwrap_or((kappa * inst.formula.num_vars() as f64).floor() as usize);
        let d = decompose(&tree, Measure::Height, budget)?;
        let verdict = if stats.sat_leaves > 0 { "sat" } else { "noSatLeaf" };
        let mut rec = stats_record(&inst.id, spec.args.engine.label(), seed, &stats, verdict, 0.0);
        rec.insert("budget".into(), json!(budget));
        rec.insert("topTreeSize".into(), json!(d.top_tree_size));
        rec.insert("subtrees".into(), json!(d.subtree_count()));
        rec.insert("extendedJ".into(), json!(d.extended_j));
        rec.insert("averageSubtreeSize".into(), json!(d.average_subtree_size()));
        rec.insert("hybridQueries".into(), json!(hybrid_query_count(&d, &model)));
        rec.insert("wallTime".into(), json!(t0.elapsed().as_secs_f64()));
        let mut fails = Vec::new();
        if d.reconstituted_size() != stats.size {
            fails.push(format!("{}: T0 + sum T_j != T", inst.id));
        }
        Ok((Value::Object(rec), fails))
    });
    let out = gather(results)?;
    let agg = json!({"instances": out.records.len(), "kappaPrime": kappa});
    Ok((out, agg))
}

fn sweep(spec: &ExperimentSpec, lo: usize, hi: usize) -> Result<Vec<usize>, CliError> {
    let lo = spec.args.n.unwrap_or(lo);
    let hi = spec.args.n_max.unwrap_or(hi.max(lo));
    if hi < lo + 2 {
        return Err(CliError::BadSpec(format!("sweep {lo}..={hi} needs at least three sizes")));
    }
    Ok((lo..=hi).collect())
}

fn run_fit_exponent(spec: &ExperimentSpec) -> Result<Ran, CliError> {
    let lambdas = spec.args.lambda.map_or_else(|| vec![0.5, 0.8, 1.0], |l| vec![l]);
    let kappas = spec.args.kappa.map_or_else(|| vec![0.25, 0.5], |k| vec![k]);
    let sizes = sweep(spec, 16, 28)?;
    let mut records = Vec::new();
    let mut fits = Vec::new();
    let mut failures = Vec::new();
    for &lambda in &lambdas {
        for &kp in &kappas {
            let t0 = Instant::now();
            let e = hybrid_exponent_experiment(lambda, kp, &sizes)?;
            let wall = t0.elapsed().as_secs_f64();
            for (&n, &q) in e.sizes.iter().zip(&e.hybrid_queries) {
                records.push(json!({
                    "instanceId": format!("l{lambda:.2}-k{kp:.2}-n{n:03}"),
                    "lambda": lambda,
                    "kappaPrime": kp,
                    "n": n,
                    "hybridQueries": q,
                    "log2Queries": q.log2(),
                    "wallTime": wall / e.sizes.len() as f64,
                }));
            }
            let within = (e.fit.slope - e.predicted).abs() <= EXPONENT_TOLERANCE;
            if !within {
                failures.push(format!(
                    "lambda={lambda} kappa'={kp}: slope {:.4} vs predicted {:.4}",
                    e.fit.slope, e.predicted
                ));
            }
            fits.push(json!({
                "lambda": lambda,
                "kappaPrime": kp,
                "slope": e.fit.slope,
                "intercept": e.fit.intercept,
                "residual": e.fit.residual,
                "predicted": e.predicted,
                "withinTolerance": within,
            }));
        }
    }
    records.sort_by(|a, b| a["instanceId"].as_str().cmp(&b["instanceId"].as_str()));
    let agg = json!({"tolerance": EXPONENT_TOLERANCE, "fits": fits});
    Ok((Outcomes { records, failures }, agg))
}

fn run_qwalk_detect(spec: &ExperimentSpec, seed: u64) -> Result<Ran, CliError> {
    let delta = spec.args.delta.unwrap_or(0.1);
    if !(delta > 0.0 && delta < 1.0) {
        return Err(CliError::BadSpec("--delta must lie in (0, 1)".into()));
    }
    let reps = spec.args.reps.unwrap_or(50);
    let instances = load_instances(spec, 6, 20)?;
    let params = DetectionParams::default();
    let results = par_map(&instances, |inst| {
        let t0 = Instant::now();
        let f = &inst.formula;
        let tree = build_tree(f, &EngineConfig::dpll(f.num_vars()), DEFAULT_NODE_LIMIT)?;
        let stats = tree.stats();
        let truth = stats.sat_leaves > 0;
        let mut rec = stats_record(&inst.id, "dpll", seed, &stats, if truth { "sat" } else { "unsat" }, 0.0);
        let mut fails = Vec::new();
        match WalkTree::from_search_tree(&tree) {
            // A marked root is answered by the first classical check.
            Err(WalkError::RootMarked) => {
                rec.insert("detection".into(), json!("rootMarked"));
            }
            Err(e) => return Err(e.into()),
            Ok(wt) => {
                let p = trial_acceptance(&wt, &params);
                let mut rng = instance_rng(seed ^ 0x9a1c, inst.index);
                let wrong = (0..reps)
                    .filter(|_| {
                        let d = detect_with_acceptance(p, delta, &params, &mut rng);
                        (d.verdict == DetectionVerdict::MarkedExists) != truth
                    })
                    .count();
                let rate = wrong as f64 / reps.max(1) as f64;
                if rate > delta {
                    fails.push(format!("{}: detection failure rate {rate:.3} > {delta}", inst.id));
                }
                rec.insert("trialAcceptance".into(), json!(p));
                rec.insert("repetitionsK".into(), json!(params.repetitions(delta)));
                rec.insert("qpeBits".into(), json!(params.qpe_bits(wt.len(), wt.n)));
                rec.insert("failureRate".into(), json!(rate));
                if wt.len() <= dim_cap() {
                    let op = build_walk_operator(&wt)?;
                    let (invariant, overlap) = op.invariant_root_overlap();
                    if truth && !(invariant && overlap > 0.0) {
                        fails.push(format!("{}: no +1 eigenvector overlapping the root", inst.id));
                    }
                    rec.insert("rootOverlap".into(), json!(overlap));
                } else {
                    rec.insert("rootOverlap".into(), Value::Null);
                }
            }
        }
        rec.insert("wallTime".into(), json!(t0.elapsed().as_secs_f64()));
        Ok((Value::Object(rec), fails))
    });
    let out = gather(results)?;
    let agg = json!({"instances": out.records.len(), "delta": delta, "repetitions": reps, "failedInstances": out.failures.len()});
    Ok((out, agg))
}

/// Phase checks run on sparse states; above this many inputs they are skipped.
const PHASE_CHECK_MAX_VARS: usize = 14;

fn run_grover(spec: &ExperimentSpec, seed: u64) -> Result<Ran, CliError> {
    let instances = load_instances(spec, 8, 20)?;
    if let Some(big) = instances.iter().find(|i| i.formula.num_vars() > 20) {
        return Err(CliError::ResourceCap(format!("{} has {} variables; grover keeps 2^n amplitudes", big.id, big.formula.num_vars())));
    }
    let results = par_map(&instances, |inst| {
        let t0 = Instant::now();
        let f = &inst.formula;
        let n = f.num_vars();
        let solutions = f.model_count();
        let kopt = grover_optimal_iterations(n, solutions);
        let mut worst: f64 = 0.0;
        for k in 0..=kopt + 1 {
            let r = grover_search(f, k);
            worst = worst.max((r.success_probability - grover_closed_form(n, solutions, k)).abs());
        }
        let best = grover_search(f, kopt);
        let mut rng = instance_rng(seed ^ 0x6e0, inst.index);
        let found = rng.gen_bool(best.success_probability.clamp(0.0, 1.0)) && f.eval_bits(best.assignment);
        let mut fails = Vec::new();
        if worst > 1e-6 {
            fails.push(format!("{}: Grover deviates from closed form by {worst:e}", inst.id));
        }
        let mut rec = obj(json!({
            "instanceId": inst.id,
            "engine": "grover",
            "seed": seed,
            "n": n,
            "solutions": solutions,
            "iterations": kopt,
            "successProbability": best.success_probability,
            "closedForm": grover_closed_form(n, solutions, kopt),
            "maxClosedFormDeviation": worst,
            "found": found,
            "verdict": if solutions > 0 { "sat" } else { "unsat" },
        }));
        if n <= PHASE_CHECK_MAX_VARS {
            for kind in [OracleKind::Naive, OracleKind::Counter] {
                let oracle = build_clause_oracle(f, kind);
                let (dev, leak) = oracle_phase_deviation(f, &oracle)?;
                if dev > 1e-9 || leak > 1e-9 {
                    fails.push(format!("{}: {kind:?} oracle phase deviation {dev:e}, leak {leak:e}", inst.id));
                }
                let key = match kind {
                    OracleKind::Naive => "naiveOracle",
                    OracleKind::Counter => "counterOracle",
                };
                rec.insert(key.into(), json!({"wires": oracle.circuit.num_wires, "phaseDeviation": dev, "leak": leak}));
            }
        }
        rec.insert("wallTime".into(), json!(t0.elapsed().as_secs_f64()));
        Ok((Value::Object(rec), fails))
    });
    let out = gather(results)?;
    let agg = json!({"instances": out.records.len(), "failedInstances": out.failures.len()});
    Ok((out, agg))
}

/// One random `(U, eigenstate, t)` triple compared under both phase estimations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QpeComparison {
    pub system_qubits: usize,
    pub t: usize,
    pub theta: f64,
    pub p0: f64,
    pub p0_counter: f64,
    pub closed_form: f64,
    pub ancillas: usize,
    pub circuit_ancillas: usize,
}

/// Draws eigenphases (a quarter of them on the `2^-t` grid, where `p0` is 0 or 1) and a
/// random eigenvector, then evaluates both circuits.
pub fn qpe_random_comparison<R: Rng + ?Sized>(rng: &mut R) -> Result<QpeComparison, CliError> {
    let m = rng.gen_range(1..=2);
    let t = rng.gen_range(1..=6);
    let thetas: Vec<f64> = (0..1 << m)
        .map(|_| {
            if rng.gen_bool(0.25) {
                rng.gen_range(0..1u32 << t) as f64 / (1u32 << t) as f64
            } else {
                rng.gen::<f64>()
            }
        })
        .collect();
    let (u, v) = random_unitary(m, &thetas, rng);
    let j = rng.gen_range(0..1 << m);
    let psi: Vec<_> = v.column(j).iter().cloned().collect();
    let p0 = qpe_standard(&u, &psi, t)?;
    let p0_counter = qpe_counter(&u, &psi, t)?;
    Ok(QpeComparison {
        system_qubits: m,
        t,
        theta: thetas[j],
        p0,
        p0_counter,
        closed_form: qpe_zero_closed_form(thetas[j], t),
        ancillas: qpe_counter_ancillas(t),
        circuit_ancillas: qpe_counter_circuit(&u, t)?.num_wires - m,
    })
}

fn run_qpe_compare(spec: &ExperimentSpec, seed: u64) -> Result<Ran, CliError> {
    let trials = spec.args.trials.unwrap_or(100);
    let idx: Vec<usize> = (0..trials).collect();
    let results = par_map(&idx, |&i| {
        let t0 = Instant::now();
        let c = qpe_random_comparison(&mut instance_rng(seed, i))?;
        let diff = (c.p0 - c.p0_counter).abs();
        let expected = 1 + (c.t as f64).log2().ceil() as usize;
        let mut fails = Vec::new();
        if diff > 1e-9 {
            fails.push(format!("triple {i}: |p0 - p0'| = {diff:e}"));
        }
        if c.ancillas != expected || c.circuit_ancillas != expected {
            fails.push(format!("triple {i}: {} ancillas, expected {expected}", c.circuit_ancillas));
        }
        let mut rec = obj(serde_json::to_value(&c)?);
        rec.insert("instanceId".into(), json!(format!("qpe-{i:05}")));
        rec.insert("seed".into(), json!(seed));
        rec.insert("difference".into(), json!(diff));
        rec.insert("wallTime".into(), json!(t0.elapsed().as_secs_f64()));
        Ok((Value::Object(rec), fails))
    });
    let out = gather(results)?;
    let max_diff = out.records.iter().filter_map(|r| r["difference"].as_f64()).fold(0.0, f64::max);
    let agg = json!({"triples": trials, "maxDifference": max_diff});
    Ok((out, agg))
}

fn run_sia(spec: &ExperimentSpec, seed: u64) -> Result<Ran, CliError> {
    let w = spec.args.w.unwrap_or(4);
    let s = spec.args.s.unwrap_or(2);
    let n = spec.args.n.unwrap_or(16);
    let instances: Vec<Instance> = if spec.args.input.is_empty() {
        (0..spec.args.trials.unwrap_or(20))
            .map(|index| {
                let mut rng = instance_rng(seed, index);
                let m = rng.gen_range(n..=3 * n);
                Instance { id: format!("gen-{index:05}"), index, formula: random_banded_kcnf(n, m, 3.min(w + 1), w, &mut rng) }
            })
            .collect()
    } else {
        load_instances(spec, n, 0)?
    };
    let results = par_map(&instances, |inst| {
        let t0 = Instant::now();
        let f = &inst.formula;
        let mut rng = instance_rng(seed ^ 0xad71ce, inst.index);
        let advice: Vec<bool> = (0..f.num_vars()).map(|_| rng.gen()).collect();
        let reference = sia_reference(f, &advice, s);
        let si = SiaInstance::new(f, w, s)?;
        let trace = siar_execute(&si, &advice)?;
        let mut fails = Vec::new();
        let agree = trace.outcome == reference;
        if !agree {
            fails.push(format!("{}: reversible run differs from the reference", inst.id));
        }
        if trace.leaf_calls != 3usize.pow(si.k as u32) || trace.peak_live > si.k.max(1) || !trace.self_inverse {
            fails.push(format!("{}: pebbling resources or self-inverse check failed", inst.id));
        }
        let rec = json!({
            "instanceId": inst.id,
            "engine": "siar",
            "seed": seed,
            "n": f.num_vars(),
            "w": w,
            "s": s,
            "k": si.k,
            "outcome": reference,
            "agree": agree,
            "leafCalls": trace.leaf_calls,
            "peakLive": trace.peak_live,
            "selfInverse": trace.self_inverse,
            "wallTime": t0.elapsed().as_secs_f64(),
        });
        Ok((rec, fails))
    });
    let out = gather(results)?;
    let agg = json!({"instances": out.records.len(), "failedInstances": out.failures.len()});
    Ok((out, agg))
}

fn run_pebble_schedule(spec: &ExperimentSpec) -> Result<Ran, CliError> {
    let k = match (spec.args.k, spec.args.n, spec.args.w) {
        (Some(k), _, _) => k,
        (None, Some(n), Some(w)) if w > 0 => n.div_ceil(w).max(1).next_power_of_two().trailing_zeros() as usize,
        _ => 3,
    };
    if k > 12 {
        return Err(CliError::ResourceCap(format!("k = {k} gives 3^k schedule lines")));
    }
    let sched = siar_schedule(k);
    let peak = schedule_peak_live(&sched);
    let records = sched
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            json!({
                "instanceId": format!("step-{i:06}"),
                "step": i + 1,
                "block": e.block,
                "source": e.source,
                "target": e.target,
                "line": format!("M[{}] ^= SIAB_{}(M[{}])", e.target, e.block, e.source),
            })
        })
        .collect();
    let mut failures = Vec::new();
    if sched.entries.len() != 3usize.pow(k as u32) || peak > k.max(1) {
        failures.push(format!("k={k}: {} calls, peak {peak}", sched.entries.len()));
    }
    let agg = json!({"k": k, "leafCalls": sched.entries.len(), "peakLive": peak, "pebbles": sched.pebble_count});
    Ok((Outcomes { records, failures }, agg))
}

fn run_lattice_reduce(spec: &ExperimentSpec, seed: u64) -> Result<Ran, CliError> {
    let instances = load_instances(spec, 6, 20)?;
    let results = par_map(&instances, |inst| {
        let t0 = Instant::now();
        let f = &inst.formula;
        if f.max_clause_size() > 3 {
            return Err(CliError::BadSpec(format!("{} is not a 3-CNF", inst.id)));
        }
        let (lat, art) = reduce_3sat_to_lattice(f)?;
        let valid = validate_lattice(&lat);
        let lf = lattice_to_cnf(&lat)?;
        let width = index_width(&lf);
        let eq = equisat_check(f, &lat)?;
        let chains = eq.lattice_model.as_ref().is_none_or(|m| copy_chains_consistent(&lat, &art, m));
        let mut fails = Vec::new();
        if !valid.ok {
            fails.push(format!("{}: invalid lattice constraints", inst.id));
        }
        if width > lat.grid_side + 1 {
            fails.push(format!("{}: index width {width} > side + 1", inst.id));
        }
        if !eq.agree {
            fails.push(format!("{}: equisatisfiability broken", inst.id));
        }
        if !chains {
            fails.push(format!("{}: copy chain carries two values", inst.id));
        }
        let rec = json!({
            "instanceId": inst.id,
            "engine": "lattice",
            "seed": seed,
            "n": f.num_vars(),
            "m": f.num_clauses(),
            "gridSide": lat.grid_side,
            "constraints": lat.constraints.len(),
            "crossings": art.crossings.len(),
            "latticeVars": eq.lattice_vars,
            "compactedVars": eq.compacted_vars,
            "indexWidth": width,
            "sourceSat": eq.source_sat,
            "latticeSat": eq.lattice_sat,
            "agree": eq.agree,
            "verdict": if eq.source_sat { "sat" } else { "unsat" },
            "wallTime": t0.elapsed().as_secs_f64(),
        });
        Ok((rec, fails))
    });
    let out = gather(results)?;
    let agg = json!({"instances": out.records.len(), "failedInstances": out.failures.len()});
    Ok((out, agg))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SethRun {
    pub n: usize,
    /// Suffix variables handed to Grover.
    pub q: usize,
    pub subcubes: u64,
    pub iterations_per_subcube: usize,
    /// Grover iterations plus one classical verification per subcube.
    pub oracle_queries: u64,
    pub model: Option<Vec<bool>>,
}

/// Enumerates assignments of variables `1..=n-q` classically and runs Grover over the
/// remaining `q = floor(kappa n)` variables of each subcube, with the single-solution
/// iteration count and one verification query. Stops at the first verified model.
pub fn seth_hybrid_search<R: Rng + ?Sized>(f: &CnfFormula, kappa: f64, rng: &mut R) -> Result<SethRun, CliError> {
    let n = f.num_vars();
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(CliError::BadSpec("--kappa must lie in (0, 1]".into()));
    }
    let q = (kappa * n as f64).floor() as usize;
    if q > 24 || n > 40 {
        return Err(CliError::ResourceCap(format!("n = {n}, q = {q}")));
    }
    let top = n - q;
    let iterations = grover_optimal_iterations(q, 1);
    let mut queries = 0u64;
    let mut subcubes = 0u64;
    for prefix in 0..1u64 << top {
        subcubes += 1;
        let marks: Vec<bool> = (0..1u64 << q).map(|y| f.eval_bits(prefix | (y << top))).collect();
        let g = grover_on_marks(&marks, iterations);
        queries += iterations as u64 + 1;
        // Measure: the marked set with its total probability, otherwise a uniform unmarked draw.
        let y = if g.solutions > 0 && rng.gen_bool(g.success_probability.clamp(0.0, 1.0)) {
            g.assignment
        } else {
            rng.gen_range(0..1u64 << q)
        };
        let x = prefix | (y << top);
        if f.eval_bits(x) {
            let model = (0..n).map(|i| (x >> i) & 1 == 1).collect();
            return Ok(SethRun { n, q, subcubes, iterations_per_subcube: iterations, oracle_queries: queries, model: Some(model) });
        }
    }
    Ok(SethRun { n, q, subcubes, iterations_per_subcube: iterations, oracle_queries: queries, model: None })
}

/// Random 3-CNF at density 8, resampled until DPLL proves it unsatisfiable, so the hybrid
/// search visits every subcube.
pub fn unsat_3cnf<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<CnfFormula, CliError> {
    loop {
        let f = random_kcnf(n, 8 * n, 3, rng);
        if dpll_solve(&f, &EngineConfig::dpll(n))?.outcome == Outcome::Unsat {
            return Ok(f);
        }
    }
}

fn run_seth_hybrid(spec: &ExperimentSpec, seed: u64) -> Result<Ran, CliError> {
    let kappa = spec.args.kappa.unwrap_or(0.5);
    let sizes: Vec<usize> = if spec.args.input.is_empty() { sweep(spec, 16, 20)? } else { Vec::new() };
    let mut instances: Vec<Instance> = Vec::new();
    if spec.args.input.is_empty() {
        for (index, &n) in sizes.iter().enumerate() {
            let formula = unsat_3cnf(n, &mut instance_rng(seed, index))?;
            instances.push(Instance { id: format!("seth-n{n:03}"), index, formula });
        }
    } else {
        instances = load_instances(spec, 0, 0)?;
    }
    let results = par_map(&instances, |inst| {
        let t0 = Instant::now();
        let run = seth_hybrid_search(&inst.formula, kappa, &mut instance_rng(seed ^ 0x5e7, inst.index))?;
        let mut fails = Vec::new();
        if let Some(m) = &run.model {
            if !inst.formula.eval_full(m) {
                fails.push(format!("{}: returned model fails", inst.id));
            }
        }
        let rec = json!({
            "instanceId": inst.id,
            "engine": "bruteForce+grover",
            "seed": seed,
            "n": run.n,
            "q": run.q,
            "subcubes": run.subcubes,
            "iterationsPerSubcube": run.iterations_per_subcube,
            "oracleQueries": run.oracle_queries,
            "log2Queries": (run.oracle_queries as f64).log2(),
            "predictedLog2": (1.0 - kappa / 2.0) * run.n as f64,
            "verdict": if run.model.is_some() { "sat" } else { "unsat" },
            "wallTime": t0.elapsed().as_secs_f64(),
        });
        Ok((rec, fails))
    });
    let mut out = gather(results)?;
    let predicted = 1.0 - kappa / 2.0;
    let mut agg = json!({"kappa": kappa, "predictedExponent": predicted});
    let points: Vec<(f64, f64)> = out
        .records
        .iter()
        .filter(|r| r["verdict"] == "unsat")
        .map(|r| (r["n"].as_f64().unwrap(), r["log2Queries"].as_f64().unwrap()))
        .collect();
    let distinct: BTreeSet<u64> = points.iter().map(|p| p.0 as u64).collect();
    if distinct.len() >= 2 {
        let (xs, ys): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
        let fit = fit_line(&xs, &ys);
        let within = (fit.slope - predicted).abs() <= EXPONENT_TOLERANCE;
        if !within {
            out.failures.push(format!("measured exponent {:.4} vs predicted {predicted:.4}", fit.slope));
        }
        agg["measuredExponent"] = json!(fit.slope);
        agg["intercept"] = json!(fit.intercept);
        agg["withinTolerance"] = json!(within);
    }
    Ok((out, agg))
}

fn scalar_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Number(_) | Value::Bool(_) => v.to_string(),
        _ => serde_json::to_string(v).unwrap_or_default(),
    }
}

/// JSON: one record per line followed by the aggregate report line. CSV: the records as a
/// matrix over the union of their keys.
pub fn write_report(report: &RunReport, format: Format, sink: &mut dyn Write) -> Result<(), CliError> {
    let io = |source| CliError::Io { path: "<output>".into(), source };
    match format {
        Format::Json => {
            for r in &report.records {
                writeln!(sink, "{}", serde_json::to_string(r)?).map_err(io)?;
            }
            let summary = json!({
                "kind": "report",
                "schemaVersion": report.schema_version,
                "toolVersion": report.tool_version,
                "spec": report.spec,
                "aggregate": report.aggregate,
                "failures": report.failures,
                "wallTime": report.wall_time,
            });
            writeln!(sink, "{}", serde_json::to_string(&summary)?).map_err(io)?;
        }
        Format::Csv => {
            let mut keys: Vec<String> = Vec::new();
            for r in &report.records {
                if let Value::Object(m) = r {
                    for k in m.keys() {
                        if !keys.contains(k) {
                            keys.push(k.clone());
                        }
                    }
                }
            }
            let mut w = csv::Writer::from_writer(sink);
            w.write_record(&keys)?;
            for r in &report.records {
                w.write_record(keys.iter().map(|k| scalar_cell(&r[k.as_str()])))?;
            }
            w.flush().map_err(io)?;
        }
    }
    Ok(())
}

/// Parses arguments, runs, writes the report. Exit codes: 0 success, 1 an invariant failed,
/// 2 bad spec or resource cap.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let spec = ExperimentSpec { command: cli.command, args: cli.args };
    let report = match run(&spec) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let written = match &spec.args.out {
        Some(p) => std::fs::File::create(p)
            .map_err(|source| CliError::Io { path: p.display().to_string(), source })
            .and_then(|mut file| write_report(&report, spec.args.format, &mut file)),
        None => write_report(&report, spec.args.format, &mut std::io::stdout().lock()),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return 2;
    }
    if spec.args.format == Format::Csv {
        eprintln!("{}", json!({"aggregate": report.aggregate, "failures": report.failures}));
    }
    for f in &report.failures {
        eprintln!("FAILED: {f}");
    }
    i32::from(!report.ok())
}
