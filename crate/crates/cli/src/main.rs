//! `treap-bench`: run search-tree experiments and theory checks.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use learned_treap::experiment::{
    self, ErrorSweep, ExperimentConfig, ExperimentResult, StructureKind, TheoryCheck, TheoryReport,
    WorkloadSource,
};
use learned_treap::par::Execution;
use learned_treap::shuffled::SurrogateStore;
use learned_treap::workload::{TraceMode, ZipfSpec};
use learned_treap::OracleKind;

#[derive(Parser)]
#[command(name = "treap-bench", version, about = "Learned treap experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay workloads against the selected structures.
    #[command(subcommand)]
    Bench(Bench),
    /// Compare Monte Carlo estimates with closed-form results.
    #[command(subcommand)]
    Verify(Verify),
}

#[derive(Subcommand)]
enum Bench {
    /// Zipfian synthetic workload.
    Synthetic(RunArgs),
    /// Ingested trace (one key per line).
    Trace(RunArgs),
    /// Multiplicative prediction error sweep.
    ErrorSweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated error factors, each >= 1.
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
        deltas: Vec<f64>,
    },
}

#[derive(Subcommand)]
enum Verify {
    Theory(TheoryArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Number of distinct keys.
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    /// Zipf exponent.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Trace length.
    #[arg(long, default_value_t = 100_000)]
    m: usize,
    #[arg(long, default_value_t = 30)]
    trials: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Comma-separated list from learned_treap, shuffled_learned_treap,
    /// random_treap, splay, red_black, or `all`.
    #[arg(long, default_value = "learned_treap,random_treap,splay,red_black")]
    structures: String,
    /// perfect | noisy:EPS,DELTA | mult:DELTA | topk:K | random | file:PATH
    #[arg(long, default_value = "perfect")]
    oracle: String,
    /// exact | sampled
    #[arg(long, default_value = "exact")]
    mode: String,
    /// Trace file; required for `bench trace`, replaces the Zipf workload elsewhere.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Result CSV; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also run the hashed-surrogate learned treap.
    #[arg(long)]
    shuffled: bool,
    /// Recompute surrogates from the hash instead of storing them.
    #[arg(long)]
    hash_only: bool,
    /// Give rank i to key i instead of a random permutation.
    #[arg(long)]
    sorted_ranks: bool,
    /// Run trials one after another.
    #[arg(long)]
    sequential: bool,
}

impl RunArgs {
    fn config(&self, need_trace: bool) -> Result<ExperimentConfig> {
        let structures = StructureKind::parse_list(&self.structures)?;
        let oracle: OracleKind = self.oracle.parse()?;
        let workload = match (&self.trace, need_trace) {
            (Some(path), _) => WorkloadSource::TraceFile(path.clone()),
            (None, true) => bail!("--trace is required"),
            (None, false) => {
                let mut spec = ZipfSpec::new(self.n, self.alpha, self.m, self.seed);
                spec.mode = self.mode.parse::<TraceMode>()?;
                spec.permute = !self.sorted_ranks;
                WorkloadSource::Zipf(spec)
            }
        };
        Ok(ExperimentConfig {
            structures,
            workload,
            oracle,
            trials: self.trials,
            seed: self.seed,
            out: None,
            shuffled: self.shuffled,
            surrogate_store: if self.hash_only {
                SurrogateStore::HashOnly
            } else {
                SurrogateStore::Map
            },
            execution: if self.sequential {
                Execution::Sequential
            } else {
                Execution::Parallel
            },
        })
    }
}

#[derive(Args)]
struct TheoryArgs {
    /// One of the check names, or `all`.
    #[arg(long)]
    kind: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Report CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    sequential: bool,
}

impl TheoryArgs {
    fn checks(&self) -> Result<Vec<TheoryCheck>> {
        let kinds: Vec<&str> = if self.kind == "all" {
            TheoryCheck::KINDS.to_vec()
        } else {
            vec![self.kind.as_str()]
        };
        kinds
            .into_iter()
            .map(|k| Ok(self.apply(TheoryCheck::defaults(k)?)))
            .collect()
    }

    /// Overrides the defaults with whichever flags apply to the check.
    fn apply(&self, mut check: TheoryCheck) -> TheoryCheck {
        use TheoryCheck::*;
        match &mut check {
            LearnedDepth { n, trials, indices } | RandomDepth { n, trials, indices } => {
                if let Some(v) = self.n {
                    *n = v;
                    indices.retain(|&i| i <= v);
                    if matches!(self.kind.as_str(), "random-depth") {
                        *indices = vec![1, v.div_ceil(2), v];
                    }
                }
                set(trials, self.trials);
            }
            RandomLowerBound { n, trials } | Shuffled { n, trials } => {
                set(n, self.n);
                set(trials, self.trials);
            }
            ZipfCost { n, alpha, m, trials } => {
                set(n, self.n);
                set(alpha, self.alpha);
                set(m, self.m);
                set(trials, self.trials);
            }
            ClosedForm { sizes } => {
                if let Some(v) = self.n {
                    sizes.retain(|&s| s <= v);
                }
            }
            AlphaGrowth { alpha, m, trials, .. } => {
                set(alpha, self.alpha);
                set(m, self.m);
                set(trials, self.trials);
            }
            TopK { n, alpha, trials, .. } | Noisy { n, alpha, trials, .. } | RandomOracle { n, alpha, trials } => {
                set(n, self.n);
                set(alpha, self.alpha);
                set(trials, self.trials);
            }
        }
        check
    }
}

fn set<T: Copy>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Ok(false) means a theory check failed.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Bench(Bench::Synthetic(args)) => {
            let config = args.config(false)?;
            let result = experiment::run(&config)?;
            emit(&args.out, &result.to_csv_string())?;
            summarize(&result);
        }
        Command::Bench(Bench::Trace(args)) => {
            let config = args.config(true)?;
            let result = experiment::run_trace(&config)?;
            emit(&args.out, &result.to_csv_string())?;
            summarize(&result);
        }
        Command::Bench(Bench::ErrorSweep { run, deltas }) => {
            let mut config = run.config(false)?;
            if !config.structures.contains(&StructureKind::LearnedTreap) {
                config.structures.push(StructureKind::LearnedTreap);
            }
            let sweep = experiment::run_error_sweep(&config, &deltas)?;
            emit(&run.out, &sweep.to_csv_string())?;
            summarize_sweep(&sweep);
        }
        Command::Verify(Verify::Theory(args)) => {
            let execution = if args.sequential {
                Execution::Sequential
            } else {
                Execution::Parallel
            };
            let mut reports: Vec<TheoryReport> = Vec::new();
            for check in args.checks()? {
                let report = experiment::run_theory_check(&check, args.seed, execution)?;
                print!("{report}");
                reports.push(report);
            }
            if let Some(path) = &args.out {
                let mut csv = String::new();
                for (i, r) in reports.iter().enumerate() {
                    let body = r.to_csv_string();
                    // Keep only the first header.
                    csv.push_str(if i == 0 { &body } else { body.split_once('\n').map_or("", |b| b.1) });
                }
                std::fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
            }
            return Ok(reports.iter().all(TheoryReport::passed));
        }
    }
    Ok(true)
}

fn emit(out: &Option<PathBuf>, csv: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, csv).with_context(|| format!("writing {}", path.display())),
        None => std::io::stdout().write_all(csv.as_bytes()).context("writing stdout"),
    }
}

fn summarize(result: &ExperimentResult) {
    eprintln!(
        "n={} m={} oracle={} trials={}",
        result.n,
        result.m,
        result.oracle,
        result.rows_for(result.structures()[0]).count()
    );
    for s in result.structures() {
        let a = result.aggregate(s).expect("structure has rows");
        eprintln!(
            "  {:<24} {:>9.4} cmp/access (se {:.4})  rotations {:>12.1}  overhead {:>12.1}",
            s.name(),
            a.cost_per_op.mean,
            a.cost_per_op.stderr,
            a.rotations.mean,
            a.overhead_ops.mean
        );
    }
}

fn summarize_sweep(sweep: &ErrorSweep) {
    for (delta, cost) in sweep.mean_costs(StructureKind::LearnedTreap) {
        eprintln!("  delta {delta:>6}: {cost:.4} cmp/access");
    }
    eprintln!(
        "  learned treap cost non-decreasing in delta: {}",
        sweep.is_monotone(StructureKind::LearnedTreap)
    );
}
