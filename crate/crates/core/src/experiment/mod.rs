//! Experiment runner: builds the selected structures, replays a workload,
//! and records comparison totals per (structure, trial).

mod stats;
mod theory;

pub use stats::{linear_fit, LinearFit, Summary};
pub use theory::{run_theory_check, sorted_rank_depths, TheoryCheck, TheoryReport, TheoryRow};

use std::fmt;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::analytics;
use crate::baselines::{self, BaselineError, RedBlackTree, SplayTree};
use crate::oracle::{self, FrequencyTable, OracleError, OracleKind, PriorityMap};
use crate::par::{self, Execution};
use crate::seed::{self, Stream};
use crate::shuffled::{FourWiseHash, ShuffledError, ShuffledTreap, SurrogateStore};
use crate::treap::{Key, Treap, TreapError};
use crate::workload::{self, Trace, WorkloadError, ZipfSpec};
use crate::SearchTree;

pub const CSV_HEADER: [&str; 12] = [
    "structure",
    "trial",
    "n",
    "alpha",
    "m",
    "oracle",
    "comparisons",
    "rotations",
    "overhead_ops",
    "ops",
    "analytic_expected",
    "analytic_lower_bound",
];

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Treap(#[from] TreapError),
    #[error(transparent)]
    Shuffled(#[from] ShuffledError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Analytics(#[from] analytics::AnalyticsError),
    #[error("{structure} answered query {key} wrongly in trial {trial}")]
    AnswerMismatch {
        structure: StructureKind,
        trial: usize,
        key: Key,
    },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StructureKind {
    LearnedTreap,
    ShuffledLearnedTreap,
    RandomTreap,
    Splay,
    RedBlack,
}

impl StructureKind {
    pub const ALL: [StructureKind; 5] = [
        StructureKind::LearnedTreap,
        StructureKind::ShuffledLearnedTreap,
        StructureKind::RandomTreap,
        StructureKind::Splay,
        StructureKind::RedBlack,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StructureKind::LearnedTreap => "learned_treap",
            StructureKind::ShuffledLearnedTreap => "shuffled_learned_treap",
            StructureKind::RandomTreap => "random_treap",
            StructureKind::Splay => "splay",
            StructureKind::RedBlack => "red_black",
        }
    }

    /// Parses a comma-separated list; `all` selects every structure.
    pub fn parse_list(s: &str) -> Result<Vec<Self>, ExperimentError> {
        if s.trim() == "all" {
            return Ok(Self::ALL.to_vec());
        }
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let kind: StructureKind = part.parse()?;
            if !out.contains(&kind) {
                out.push(kind);
            }
        }
        Ok(out)
    }
}

impl fmt::Display for StructureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StructureKind {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ExperimentError::Config(format!("unknown structure {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum WorkloadSource {
    Zipf(ZipfSpec),
    /// One key per line; the universe is the set of keys that occur.
    TraceFile(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub structures: Vec<StructureKind>,
    pub workload: WorkloadSource,
    pub oracle: OracleKind,
    pub trials: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Also run the hashed-surrogate dual structure.
    pub shuffled: bool,
    pub surrogate_store: SurrogateStore,
    pub execution: Execution,
}

impl ExperimentConfig {
    /// Perfect oracle, 30 trials, master seed taken from the spec.
    pub fn synthetic(spec: ZipfSpec, structures: Vec<StructureKind>) -> Self {
        Self {
            structures,
            oracle: OracleKind::Perfect,
            trials: 30,
            seed: spec.seed,
            workload: WorkloadSource::Zipf(spec),
            out: None,
            shuffled: false,
            surrogate_store: SurrogateStore::Map,
            execution: Execution::Parallel,
        }
    }

    pub fn trace(path: impl Into<PathBuf>, structures: Vec<StructureKind>, seed: u64) -> Self {
        Self {
            structures,
            workload: WorkloadSource::TraceFile(path.into()),
            oracle: OracleKind::Perfect,
            trials: 30,
            seed,
            out: None,
            shuffled: false,
            surrogate_store: SurrogateStore::Map,
            execution: Execution::Parallel,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.trials == 0 {
            return Err(ExperimentError::Config("trials must be at least 1".into()));
        }
        if self.selected().is_empty() {
            return Err(ExperimentError::Config("select at least one structure".into()));
        }
        self.oracle.check()?;
        if let WorkloadSource::Zipf(spec) = &self.workload {
            spec.validate()?;
        }
        Ok(())
    }

    /// The structures to run, in canonical order.
    pub fn selected(&self) -> Vec<StructureKind> {
        let mut s = self.structures.clone();
        if self.shuffled {
            s.push(StructureKind::ShuffledLearnedTreap);
        }
        s.sort_unstable();
        s.dedup();
        s
    }
}

/// Totals for one structure in one trial.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRow {
    pub structure: StructureKind,
    pub trial: usize,
    pub comparisons: u64,
    pub rotations: u64,
    pub overhead_ops: u64,
    pub ops: u64,
    /// Reference total: the perfect-oracle expectation for learned structures,
    /// the exact expectation for the random treap, empty otherwise.
    pub analytic_expected: Option<f64>,
    /// Entropy bound for any static tree; for the random treap, the
    /// distribution-free random-treap bound.
    pub analytic_lower_bound: Option<f64>,
}

impl TrialRow {
    pub fn cost_per_op(&self) -> f64 {
        self.comparisons as f64 / self.ops as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub structure: StructureKind,
    pub comparisons: Summary,
    pub rotations: Summary,
    pub overhead_ops: Summary,
    pub ops: Summary,
    pub cost_per_op: Summary,
    pub analytic_expected: Option<Summary>,
    pub analytic_lower_bound: Option<Summary>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub n: usize,
    /// Empty for ingested traces.
    pub alpha: Option<f64>,
    pub m: usize,
    pub oracle: String,
    /// Sorted by (structure, trial).
    pub rows: Vec<TrialRow>,
}

impl ExperimentResult {
    pub fn structures(&self) -> Vec<StructureKind> {
        let mut s: Vec<_> = self.rows.iter().map(|r| r.structure).collect();
        s.dedup();
        s
    }

    pub fn rows_for(&self, structure: StructureKind) -> impl Iterator<Item = &TrialRow> {
        self.rows.iter().filter(move |r| r.structure == structure)
    }

    pub fn aggregate(&self, structure: StructureKind) -> Option<Aggregate> {
        let rows: Vec<&TrialRow> = self.rows_for(structure).collect();
        if rows.is_empty() {
            return None;
        }
        let of = |f: &dyn Fn(&TrialRow) -> f64| Summary::of(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
        let opt = |f: &dyn Fn(&TrialRow) -> Option<f64>| {
            let xs: Option<Vec<f64>> = rows.iter().map(|r| f(r)).collect();
            xs.map(|xs| Summary::of(&xs))
        };
        Some(Aggregate {
            structure,
            comparisons: of(&|r| r.comparisons as f64),
            rotations: of(&|r| r.rotations as f64),
            overhead_ops: of(&|r| r.overhead_ops as f64),
            ops: of(&|r| r.ops as f64),
            cost_per_op: of(&TrialRow::cost_per_op),
            analytic_expected: opt(&|r| r.analytic_expected),
            analytic_lower_bound: opt(&|r| r.analytic_lower_bound),
        })
    }

    /// Trial-mean comparisons per access.
    pub fn mean_cost(&self, structure: StructureKind) -> Option<f64> {
        self.aggregate(structure).map(|a| a.cost_per_op.mean)
    }

    /// Per-trial rows followed by `mean` and `stderr` rows for each structure.
    pub fn write_csv<W: io::Write>(&self, writer: &mut csv::Writer<W>) -> csv::Result<()> {
        let alpha = self.alpha.map(|a| a.to_string()).unwrap_or_default();
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for structure in self.structures() {
            for r in self.rows_for(structure) {
                writer.write_record([
                    structure.name().to_string(),
                    r.trial.to_string(),
                    self.n.to_string(),
                    alpha.clone(),
                    self.m.to_string(),
                    self.oracle.clone(),
                    r.comparisons.to_string(),
                    r.rotations.to_string(),
                    r.overhead_ops.to_string(),
                    r.ops.to_string(),
                    opt(r.analytic_expected),
                    opt(r.analytic_lower_bound),
                ])?;
            }
            let a = self.aggregate(structure).expect("structure has rows");
            for (label, pick) in [
                ("mean", (|s: &Summary| s.mean) as fn(&Summary) -> f64),
                ("stderr", |s: &Summary| s.stderr),
            ] {
                writer.write_record([
                    structure.name().to_string(),
                    label.to_string(),
                    self.n.to_string(),
                    alpha.clone(),
                    self.m.to_string(),
                    self.oracle.clone(),
                    pick(&a.comparisons).to_string(),
                    pick(&a.rotations).to_string(),
                    pick(&a.overhead_ops).to_string(),
                    pick(&a.ops).to_string(),
                    opt(a.analytic_expected.as_ref().map(pick)),
                    opt(a.analytic_lower_bound.as_ref().map(pick)),
                ])?;
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        csv_string(std::slice::from_ref(self))
    }

    pub fn save(&self, path: &Path) -> Result<(), ExperimentError> {
        save_csv(std::slice::from_ref(self), path)
    }
}

fn csv_string(results: &[ExperimentResult]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    write_all(results, &mut w).expect("writing to memory cannot fail");
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("CSV is UTF-8")
}

fn write_all<W: io::Write>(results: &[ExperimentResult], w: &mut csv::Writer<W>) -> csv::Result<()> {
    w.write_record(CSV_HEADER)?;
    for r in results {
        r.write_csv(w)?;
    }
    w.flush()?;
    Ok(())
}

fn save_csv(results: &[ExperimentResult], path: &Path) -> Result<(), ExperimentError> {
    let io = |source| ExperimentError::Io {
        path: path.to_owned(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    write_all(results, &mut w).map_err(io)
}

/// Replays a synthetic Zipfian workload. Each trial draws a fresh rank-to-key
/// permutation, query order, oracle noise and tree randomness.
pub fn run_synthetic(config: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    config.validate()?;
    let WorkloadSource::Zipf(spec) = &config.workload else {
        return Err(ExperimentError::Config("synthetic runs need a Zipf workload".into()));
    };
    let predictions = preload_predictions(&config.oracle)?;
    let per_trial = par::try_map_trials(config.trials, config.execution, |t| {
        let mut trial_spec = spec.clone();
        trial_spec.seed = seed::derive(config.seed, t as u64, Stream::Trace);
        let trace = workload::generate_zipf(&trial_spec)?;
        run_trial(config, predictions.as_ref(), &trace, t)
    })?;
    finish(config, spec.n, Some(spec.alpha), spec.m, per_trial)
}

/// Replays an ingested trace. Trials differ only in tree and oracle randomness.
pub fn run_trace(config: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    config.validate()?;
    let WorkloadSource::TraceFile(path) = &config.workload else {
        return Err(ExperimentError::Config("trace runs need a trace file".into()));
    };
    let trace = workload::load_trace_csv(path)?;
    run_trace_in_memory(config, &trace)
}

/// [`run_trace`] on an already loaded trace.
pub fn run_trace_in_memory(config: &ExperimentConfig, trace: &Trace) -> Result<ExperimentResult, ExperimentError> {
    config.validate()?;
    let predictions = preload_predictions(&config.oracle)?;
    let per_trial = par::try_map_trials(config.trials, config.execution, |t| {
        run_trial(config, predictions.as_ref(), trace, t)
    })?;
    finish(config, trace.universe.len(), None, trace.queries.len(), per_trial)
}

/// Dispatches on the workload source.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    match config.workload {
        WorkloadSource::Zipf(_) => run_synthetic(config),
        WorkloadSource::TraceFile(_) => run_trace(config),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub delta: f64,
    pub result: ExperimentResult,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorSweep {
    pub points: Vec<SweepPoint>,
}

impl ErrorSweep {
    /// `(delta, trial-mean cost per access)` in sweep order.
    pub fn mean_costs(&self, structure: StructureKind) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter_map(|p| p.result.mean_cost(structure).map(|c| (p.delta, c)))
            .collect()
    }

    /// True when trial-mean cost never decreases as delta grows.
    pub fn is_monotone(&self, structure: StructureKind) -> bool {
        let mut costs = self.mean_costs(structure);
        costs.sort_by(|a, b| a.0.total_cmp(&b.0));
        costs.windows(2).all(|w| w[0].1 <= w[1].1)
    }

    pub fn to_csv_string(&self) -> String {
        csv_string(&self.results())
    }

    pub fn save(&self, path: &Path) -> Result<(), ExperimentError> {
        save_csv(&self.results(), path)
    }

    fn results(&self) -> Vec<ExperimentResult> {
        self.points.iter().map(|p| p.result.clone()).collect()
    }
}

/// Runs the workload once per delta with a multiplicative-error oracle. Every
/// delta sees the same seeds, so the runs differ only in prediction error.
pub fn run_error_sweep(config: &ExperimentConfig, deltas: &[f64]) -> Result<ErrorSweep, ExperimentError> {
    if deltas.is_empty() {
        return Err(ExperimentError::Config("error sweep needs at least one delta".into()));
    }
    let mut points = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let mut cfg = config.clone();
        cfg.oracle = OracleKind::MultiplicativeFreq { delta };
        points.push(SweepPoint {
            delta,
            result: run(&cfg)?,
        });
    }
    Ok(ErrorSweep { points })
}

fn preload_predictions(kind: &OracleKind) -> Result<Option<std::collections::HashMap<Key, f64>>, ExperimentError> {
    match kind {
        OracleKind::File(path) => Ok(Some(oracle::load_prediction_file(path)?)),
        _ => Ok(None),
    }
}

fn finish(
    config: &ExperimentConfig,
    n: usize,
    alpha: Option<f64>,
    m: usize,
    per_trial: Vec<Vec<TrialRow>>,
) -> Result<ExperimentResult, ExperimentError> {
    let mut rows: Vec<TrialRow> = per_trial.into_iter().flatten().collect();
    rows.sort_by_key(|r| (r.structure, r.trial));
    let result = ExperimentResult {
        n,
        alpha,
        m,
        oracle: config.oracle.to_string(),
        rows,
    };
    if let Some(path) = &config.out {
        result.save(path)?;
    }
    Ok(result)
}

/// Workload-level reference totals shared by every structure in a trial.
struct References {
    learned_expected: f64,
    entropy_bound: f64,
    random_expected: f64,
    random_bound: f64,
}

impl References {
    fn new(trace: &Trace, table: &FrequencyTable) -> Result<Self, ExperimentError> {
        let n = trace.universe.len();
        let m = trace.queries.len() as f64;
        let h = analytics::harmonic_table(n + 1);
        let harm = |i: usize| if i == 0 { 0.0 } else { h[i - 1] };
        let counts = table.counts_by_rank();
        let learned_expected = counts
            .iter()
            .enumerate()
            .map(|(r, &c)| c as f64 * (2.0 * harm(r + 1) - 1.0))
            .sum();
        let entropy: f64 = counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| c as f64 / m * (m / c as f64).log2())
            .sum();
        let random_expected = trace
            .universe
            .iter()
            .enumerate()
            .map(|(i, &k)| table.count(k).unwrap_or(0) as f64 * (harm(i + 1) + harm(n - i) - 1.0))
            .sum();
        Ok(Self {
            learned_expected,
            entropy_bound: m * entropy / 3.0,
            random_expected,
            random_bound: m * analytics::random_cost_lower_bound_comparisons(n)?,
        })
    }

    fn for_structure(&self, s: StructureKind) -> (Option<f64>, Option<f64>) {
        match s {
            StructureKind::LearnedTreap | StructureKind::ShuffledLearnedTreap => {
                (Some(self.learned_expected), Some(self.entropy_bound))
            }
            StructureKind::RandomTreap => (Some(self.random_expected), Some(self.random_bound)),
            StructureKind::Splay | StructureKind::RedBlack => (None, Some(self.entropy_bound)),
        }
    }
}

fn run_trial(
    config: &ExperimentConfig,
    predictions: Option<&std::collections::HashMap<Key, f64>>,
    trace: &Trace,
    trial: usize,
) -> Result<Vec<TrialRow>, ExperimentError> {
    let t = trial as u64;
    let table = workload::empirical_frequencies(trace, seed::derive(config.seed, t, Stream::Table))?;
    let priorities = match predictions {
        Some(p) => oracle::priorities_from_predictions(p, &table)?,
        None => oracle::assign_priorities(&config.oracle, &table, seed::derive(config.seed, t, Stream::Oracle))?,
    };
    let refs = References::new(trace, &table)?;
    let entries: Vec<(Key, u64)> = trace.universe.iter().map(|&k| (k, 1)).collect();
    let mut rows = Vec::new();
    for structure in config.selected() {
        let mut tree = build(structure, config, &entries, &priorities, t)?;
        tree.reset_counters();
        for &q in &trace.queries {
            let r = tree.access(q);
            let expect = trace.universe.binary_search(&q).is_ok();
            if r.found != expect || (expect && r.value != Some(1)) {
                return Err(ExperimentError::AnswerMismatch {
                    structure,
                    trial,
                    key: q,
                });
            }
        }
        let (analytic_expected, analytic_lower_bound) = refs.for_structure(structure);
        rows.push(TrialRow {
            structure,
            trial,
            comparisons: tree.comparisons(),
            rotations: tree.rotations(),
            overhead_ops: tree.overhead_ops(),
            ops: trace.queries.len() as u64,
            analytic_expected,
            analytic_lower_bound,
        });
    }
    Ok(rows)
}

fn build(
    structure: StructureKind,
    config: &ExperimentConfig,
    entries: &[(Key, u64)],
    priorities: &PriorityMap,
    t: u64,
) -> Result<Box<dyn SearchTree>, ExperimentError> {
    let master = config.seed;
    Ok(match structure {
        StructureKind::LearnedTreap => Box::new(Treap::from_sorted(
            entries.iter().map(|&(k, v)| (k, v, priorities[&k])),
        )?),
        StructureKind::ShuffledLearnedTreap => {
            let mut s = ShuffledTreap::with_hash(
                FourWiseHash::new(seed::derive(master, t, Stream::Hash)),
                seed::derive(master, t, Stream::ShuffledPriorities),
                config.surrogate_store,
            );
            for &(k, v) in entries {
                s.insert(k, v, priorities[&k])?;
            }
            Box::new(s)
        }
        StructureKind::RandomTreap => Box::new(baselines::random_treap(
            entries,
            &mut seed::stream_rng(master, t, Stream::RandomTreap),
        )),
        StructureKind::Splay => {
            let mut tree = SplayTree::new();
            for (k, v) in baselines::shuffled_order(entries, &mut seed::stream_rng(master, t, Stream::InsertOrder)) {
                tree.insert(k, v)?;
            }
            Box::new(tree)
        }
        StructureKind::RedBlack => {
            let mut tree = RedBlackTree::new();
            for (k, v) in baselines::shuffled_order(entries, &mut seed::stream_rng(master, t, Stream::InsertOrder)) {
                tree.insert(k, v)?;
            }
            Box::new(tree)
        }
    })
}
