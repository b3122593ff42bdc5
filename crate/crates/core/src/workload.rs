//! Zipfian query traces and trace files.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution as _;
use rand::seq::SliceRandom;
use thiserror::Error;

use crate::analytics::{self, AnalyticsError};
use crate::oracle::{FrequencyTable, OracleError};
use crate::seed::{self, Stream};
use crate::treap::Key;

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("invalid workload: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("trace is empty")]
    EmptyTrace,
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

/// How a synthetic trace realizes its distribution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TraceMode {
    /// Each rank appears exactly its rounded share of `m`, in shuffled order.
    #[default]
    Exact,
    /// `m` independent draws from the distribution.
    Sampled,
}

impl std::str::FromStr for TraceMode {
    type Err = WorkloadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(TraceMode::Exact),
            "sampled" => Ok(TraceMode::Sampled),
            other => Err(WorkloadError::InvalidSpec(format!("unknown trace mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZipfSpec {
    pub n: usize,
    pub alpha: f64,
    pub m: usize,
    pub seed: u64,
    pub mode: TraceMode,
    /// Map ranks to keys through a random permutation. When false, rank `i` is
    /// key `i`, so rank order coincides with key order.
    pub permute: bool,
}

impl ZipfSpec {
    pub fn new(n: usize, alpha: f64, m: usize, seed: u64) -> Self {
        Self {
            n,
            alpha,
            m,
            seed,
            mode: TraceMode::Exact,
            permute: true,
        }
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        if self.n == 0 || self.m == 0 {
            return Err(WorkloadError::InvalidSpec(format!(
                "n and m must be positive (n = {}, m = {})",
                self.n, self.m
            )));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(WorkloadError::InvalidSpec(format!(
                "alpha must be positive (got {})",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// A query sequence over a fixed key universe.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub queries: Vec<Key>,
    /// Distinct keys, ascending.
    pub universe: Vec<Key>,
    /// `permutation[r - 1]` is the key of rank `r`. For ingested traces this is
    /// the empirical order (count descending, then key ascending).
    pub permutation: Vec<Key>,
}

/// Per-rank counts `round(m / (i^alpha H_{n,alpha}))`, rounded by the largest
/// remainder method so they sum to exactly `m`.
pub fn zipf_counts(n: usize, alpha: f64, m: usize) -> Result<Vec<u64>, WorkloadError> {
    let dist = analytics::zipf_distribution(n, alpha)?;
    let shares: Vec<f64> = dist.probs().iter().map(|p| p * m as f64).collect();
    let mut counts: Vec<u64> = shares.iter().map(|s| s.floor() as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let mut leftover = (m as u64).saturating_sub(assigned) as usize;
    let mut order: Vec<usize> = (0..n).collect();
    // Largest fractional part first; lower rank wins ties.
    order.sort_by(|&a, &b| {
        let fa = shares[a] - shares[a].floor();
        let fb = shares[b] - shares[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if leftover == 0 {
            break;
        }
        counts[i] += 1;
        leftover -= 1;
    }
    Ok(counts)
}

/// Generates a Zipfian trace over keys `1..=n`.
pub fn generate_zipf(spec: &ZipfSpec) -> Result<Trace, WorkloadError> {
    spec.validate()?;
    let universe: Vec<Key> = (1..=spec.n as Key).collect();
    let mut permutation = universe.clone();
    if spec.permute {
        permutation.shuffle(&mut seed::stream_rng(spec.seed, 0, Stream::Permutation));
    }
    let mut rng = seed::stream_rng(spec.seed, 0, Stream::QueryOrder);
    let queries = match spec.mode {
        TraceMode::Exact => {
            let counts = zipf_counts(spec.n, spec.alpha, spec.m)?;
            let mut queries = Vec::with_capacity(spec.m);
            for (rank, &c) in counts.iter().enumerate() {
                queries.extend(std::iter::repeat_n(permutation[rank], c as usize));
            }
            queries.shuffle(&mut rng);
            queries
        }
        TraceMode::Sampled => {
            let dist = analytics::zipf_distribution(spec.n, spec.alpha)?;
            let index = WeightedIndex::new(dist.probs())
                .map_err(|e| WorkloadError::InvalidSpec(e.to_string()))?;
            (0..spec.m).map(|_| permutation[index.sample(&mut rng)]).collect()
        }
    };
    Ok(Trace {
        queries,
        universe,
        permutation,
    })
}

/// Query counts for every key of the universe (zero for keys never queried),
/// ranked with seeded tiebreaks.
pub fn empirical_frequencies(trace: &Trace, seed: u64) -> Result<FrequencyTable, WorkloadError> {
    if trace.queries.is_empty() {
        return Err(WorkloadError::EmptyTrace);
    }
    let mut counts: HashMap<Key, u64> = trace.universe.iter().map(|&k| (k, 0)).collect();
    for &q in &trace.queries {
        *counts.entry(q).or_insert(0) += 1;
    }
    Ok(FrequencyTable::from_counts(counts, seed)?)
}

/// Builds a trace from a query sequence; the universe is the set of keys seen.
pub fn trace_from_queries(queries: Vec<Key>) -> Result<Trace, WorkloadError> {
    if queries.is_empty() {
        return Err(WorkloadError::EmptyTrace);
    }
    let mut counts: HashMap<Key, u64> = HashMap::new();
    for &q in &queries {
        *counts.entry(q).or_insert(0) += 1;
    }
    let mut universe: Vec<Key> = counts.keys().copied().collect();
    universe.sort_unstable();
    let mut permutation = universe.clone();
    permutation.sort_by(|a, b| counts[b].cmp(&counts[a]).then(a.cmp(b)));
    Ok(Trace {
        queries,
        universe,
        permutation,
    })
}

/// Reads one unsigned key per line. A non-numeric first line is a header.
pub fn load_trace_csv(path: &Path) -> Result<Trace, WorkloadError> {
    let io = |source| WorkloadError::Io {
        path: path.to_owned(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(io)?;
    let mut queries = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(io)?;
        let line = record.position().map_or(i as u64 + 1, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != 1 {
            return Err(WorkloadError::Parse {
                path: path.to_owned(),
                line,
                message: format!("expected one key, found {} fields", record.len()),
            });
        }
        match record[0].parse::<Key>() {
            Ok(k) => queries.push(k),
            Err(_) if i == 0 => {}
            Err(_) => {
                return Err(WorkloadError::Parse {
                    path: path.to_owned(),
                    line,
                    message: format!("bad key {:?}", &record[0]),
                })
            }
        }
    }
    trace_from_queries(queries)
}

/// Writes the query sequence, one key per line, without a header.
pub fn write_trace_csv(path: &Path, trace: &Trace) -> Result<(), WorkloadError> {
    let io = |source| WorkloadError::Io {
        path: path.to_owned(),
        source,
    };
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(io)?;
    for q in &trace.queries {
        writer.write_record([q.to_string()]).map_err(io)?;
    }
    writer.flush().map_err(|e| io(e.into()))?;
    Ok(())
}
