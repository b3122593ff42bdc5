//! Priority oracles: policies that turn (true or predicted) frequencies into
//! treap priorities.
//!
//! A [`FrequencyTable`] holds the ground truth for a trace. [`assign_priorities`]
//! applies one [`OracleKind`] to it and yields a priority per key. Every policy
//! is deterministic given its seed.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::seed;
use crate::treap::{Key, Priority};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("frequency table is empty")]
    EmptyTable,
    #[error("key {0} appears twice in the frequency table")]
    DuplicateKey(Key),
    #[error("invalid oracle parameter: {0}")]
    BadParameter(String),
    #[error("prediction file lacks {} key(s): {keys:?}", keys.len())]
    MissingPredictions { keys: Vec<Key> },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Entry {
    count: u64,
    rank: usize,
    tiebreak: f64,
}

/// True per-key frequencies of a trace, with the induced rank order.
///
/// Rank 1 is the most frequent key. Equal counts are ordered by a per-key
/// uniform tiebreak drawn from the table's seed.
#[derive(Clone, Debug)]
pub struct FrequencyTable {
    entries: HashMap<Key, Entry>,
    by_rank: Vec<Key>,
    total: u64,
}

impl FrequencyTable {
    /// Builds a table from `(key, count)` pairs. Zero counts are allowed (keys
    /// in the universe that were never queried).
    pub fn from_counts<I>(counts: I, seed: u64) -> Result<Self, OracleError>
    where
        I: IntoIterator<Item = (Key, u64)>,
    {
        let mut pairs: Vec<(Key, u64)> = counts.into_iter().collect();
        if pairs.is_empty() {
            return Err(OracleError::EmptyTable);
        }
        pairs.sort_unstable_by_key(|&(k, _)| k);
        if let Some(w) = pairs.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(OracleError::DuplicateKey(w[0].0));
        }
        let mut rng = seed::rng(seed);
        let mut ranked: Vec<(Key, u64, f64)> = pairs
            .into_iter()
            .map(|(k, c)| (k, c, rng.random::<f64>()))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| b.2.total_cmp(&a.2)));
        let total = ranked.iter().map(|e| e.1).sum();
        let by_rank = ranked.iter().map(|e| e.0).collect();
        let entries = ranked
            .into_iter()
            .enumerate()
            .map(|(i, (key, count, tiebreak))| {
                (
                    key,
                    Entry {
                        count,
                        rank: i + 1,
                        tiebreak,
                    },
                )
            })
            .collect();
        Ok(Self {
            entries,
            by_rank,
            total,
        })
    }

    /// Number of distinct keys.
    pub fn len(&self) -> usize {
        self.by_rank.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_rank.is_empty()
    }

    /// Trace length `m`, the sum of all counts.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, key: Key) -> Option<u64> {
        self.entries.get(&key).map(|e| e.count)
    }

    pub fn rank(&self, key: Key) -> Option<usize> {
        self.entries.get(&key).map(|e| e.rank)
    }

    pub fn probability(&self, key: Key) -> Option<f64> {
        self.entries
            .get(&key)
            .map(|e| e.count as f64 / self.total as f64)
    }

    pub fn tiebreak(&self, key: Key) -> Option<f64> {
        self.entries.get(&key).map(|e| e.tiebreak)
    }

    /// Key at a one-based rank.
    pub fn key_at_rank(&self, rank: usize) -> Option<Key> {
        rank.checked_sub(1).and_then(|i| self.by_rank.get(i)).copied()
    }

    /// Keys ordered from most to least frequent.
    pub fn keys_by_rank(&self) -> &[Key] {
        &self.by_rank
    }

    /// Counts in rank order.
    pub fn counts_by_rank(&self) -> Vec<u64> {
        self.by_rank.iter().map(|k| self.entries[k].count).collect()
    }
}

/// Which predictor assigns priorities.
#[derive(Clone, Debug, PartialEq)]
pub enum OracleKind {
    /// True frequencies.
    Perfect,
    /// Predicted rank uniform in `[r, floor(epsilon r + delta)]`.
    NoisyRank { epsilon: f64, delta: f64 },
    /// Predicted frequency log-uniform in `[f / delta, delta f]`.
    MultiplicativeFreq { delta: f64 },
    /// Only the `k` most frequent keys are known; they sit above all others.
    TopK { k: usize },
    /// Uniformly random priorities, independent of the table.
    Random,
    /// Predicted frequencies read from a `key,frequency` CSV file.
    File(PathBuf),
}

impl fmt::Display for OracleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleKind::Perfect => write!(f, "perfect"),
            OracleKind::NoisyRank { epsilon, delta } => write!(f, "noisy:{epsilon},{delta}"),
            OracleKind::MultiplicativeFreq { delta } => write!(f, "mult:{delta}"),
            OracleKind::TopK { k } => write!(f, "topk:{k}"),
            OracleKind::Random => write!(f, "random"),
            OracleKind::File(path) => write!(f, "file:{}", path.display()),
        }
    }
}

impl FromStr for OracleKind {
    type Err = OracleError;

    /// Parses `perfect`, `noisy:EPS,DELTA`, `mult:DELTA`, `topk:K`, `random` or `file:PATH`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |msg: &str| OracleError::BadParameter(format!("{msg} in oracle spec {s:?}"));
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad("expected a number"));
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let kind = match (name, arg) {
            ("perfect", None) => OracleKind::Perfect,
            ("random", None) => OracleKind::Random,
            ("noisy", Some(a)) => {
                let (e, d) = a.split_once(',').ok_or_else(|| bad("expected EPS,DELTA"))?;
                OracleKind::NoisyRank {
                    epsilon: num(e)?,
                    delta: num(d)?,
                }
            }
            ("mult", Some(a)) => OracleKind::MultiplicativeFreq { delta: num(a)? },
            ("topk", Some(a)) => OracleKind::TopK {
                k: a.trim().parse().map_err(|_| bad("expected an integer"))?,
            },
            ("file", Some(a)) if !a.is_empty() => OracleKind::File(PathBuf::from(a)),
            _ => return Err(bad("unknown oracle")),
        };
        kind.check()?;
        Ok(kind)
    }
}

impl OracleKind {
    /// Validates parameter ranges.
    pub fn check(&self) -> Result<(), OracleError> {
        match *self {
            OracleKind::NoisyRank { epsilon, delta } if !(epsilon >= 1.0 && delta >= 1.0) => {
                Err(OracleError::BadParameter(format!(
                    "noisy oracle needs epsilon, delta >= 1 (got {epsilon}, {delta})"
                )))
            }
            OracleKind::MultiplicativeFreq { delta } if !(delta >= 1.0 && delta.is_finite()) => {
                Err(OracleError::BadParameter(format!(
                    "multiplicative oracle needs delta >= 1 (got {delta})"
                )))
            }
            OracleKind::TopK { k: 0 } => Err(OracleError::BadParameter("top-k needs k >= 1".into())),
            _ => Ok(()),
        }
    }
}

pub type PriorityMap = HashMap<Key, Priority>;

/// Priorities for every key in `table` under `kind`.
///
/// `Perfect`, `MultiplicativeFreq` and `File` reuse the table's tiebreaks, so a
/// prediction that equals the true frequencies reproduces the perfect oracle
/// exactly. The other policies draw fresh tiebreaks.
pub fn assign_priorities(
    kind: &OracleKind,
    table: &FrequencyTable,
    seed: u64,
) -> Result<PriorityMap, OracleError> {
    kind.check()?;
    if table.is_empty() {
        return Err(OracleError::EmptyTable);
    }
    let mut rng = seed::rng(seed);
    let n = table.len();
    let mut out = HashMap::with_capacity(n);
    match kind {
        OracleKind::Perfect => {
            for (&key, e) in &table.entries {
                out.insert(key, Priority::new(e.count as f64, e.tiebreak));
            }
        }
        OracleKind::NoisyRank { epsilon, delta } => {
            for (i, &key) in table.by_rank.iter().enumerate() {
                let predicted = noisy_rank(i + 1, *epsilon, *delta, &mut rng);
                out.insert(key, Priority::with_random_tiebreak(-(predicted as f64), &mut rng));
            }
        }
        OracleKind::MultiplicativeFreq { delta } => {
            for &key in &table.by_rank {
                let e = table.entries[&key];
                let factor = delta.powf(rng.random_range(-1.0..=1.0));
                out.insert(key, Priority::new(e.count as f64 * factor, e.tiebreak));
            }
        }
        OracleKind::TopK { k } => {
            if *k > n {
                return Err(OracleError::BadParameter(format!(
                    "top-k with k = {k} exceeds the {n} keys"
                )));
            }
            for (i, &key) in table.by_rank.iter().enumerate() {
                let magnitude = open_unit(&mut rng);
                let primary = if i < *k { magnitude } else { -magnitude };
                out.insert(key, Priority::with_random_tiebreak(primary, &mut rng));
            }
        }
        OracleKind::Random => {
            for &key in &table.by_rank {
                out.insert(key, Priority::with_random_tiebreak(open_unit(&mut rng), &mut rng));
            }
        }
        OracleKind::File(path) => {
            let predictions = load_prediction_file(path)?;
            return priorities_from_predictions(&predictions, table);
        }
    }
    Ok(out)
}

/// Priorities whose primary is a predicted frequency. Every key in `table` must
/// have a prediction.
pub fn priorities_from_predictions(
    predictions: &HashMap<Key, f64>,
    table: &FrequencyTable,
) -> Result<PriorityMap, OracleError> {
    let mut missing: Vec<Key> = table
        .by_rank
        .iter()
        .copied()
        .filter(|k| !predictions.contains_key(k))
        .collect();
    if !missing.is_empty() {
        missing.sort_unstable();
        return Err(OracleError::MissingPredictions { keys: missing });
    }
    Ok(table
        .entries
        .iter()
        .map(|(&key, e)| (key, Priority::new(predictions[&key], e.tiebreak)))
        .collect())
}

/// Uniform draw from the integer interval `[rank, floor(epsilon * rank + delta)]`.
fn noisy_rank<R: Rng + ?Sized>(rank: usize, epsilon: f64, delta: f64, rng: &mut R) -> u64 {
    let lo = rank as u64;
    let hi = (epsilon * rank as f64 + delta).floor() as u64;
    rng.random_range(lo..=hi.max(lo))
}

/// Uniform draw from the open interval (0, 1).
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Rank error implied by a multiplicative frequency error of `delta` under a
/// Zipfian distribution: predicted ranks lie within `r +- delta^2`.
pub fn rank_error_from_delta(delta: f64) -> Result<f64, OracleError> {
    if !(delta >= 1.0 && delta.is_finite()) {
        return Err(OracleError::BadParameter(format!(
            "delta must be at least 1 (got {delta})"
        )));
    }
    Ok(delta * delta)
}

/// Reads `key,predicted_frequency` rows. A first row whose key column is not an
/// integer is treated as a header.
pub fn load_prediction_file(path: &Path) -> Result<HashMap<Key, f64>, OracleError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| OracleError::Io {
            path: path.to_owned(),
            source,
        })?;
    let parse_err = |line: u64, message: String| OracleError::Parse {
        path: path.to_owned(),
        line,
        message,
    };
    let mut out = HashMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|source| OracleError::Io {
            path: path.to_owned(),
            source,
        })?;
        let line = record.position().map_or(i as u64 + 1, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != 2 {
            return Err(parse_err(line, format!("expected 2 fields, found {}", record.len())));
        }
        let key = match record[0].parse::<Key>() {
            Ok(k) => k,
            Err(_) if i == 0 => continue,
            Err(_) => return Err(parse_err(line, format!("bad key {:?}", &record[0]))),
        };
        let freq = record[1]
            .parse::<f64>()
            .ok()
            .filter(|f| f.is_finite())
            .ok_or_else(|| parse_err(line, format!("bad frequency {:?}", &record[1])))?;
        if out.insert(key, freq).is_some() {
            return Err(parse_err(line, format!("duplicate key {key}")));
        }
    }
    Ok(out)
}

/// Writes predictions as `key,predicted_frequency` rows with a header, sorted by key.
pub fn write_prediction_file(path: &Path, predictions: &HashMap<Key, f64>) -> Result<(), OracleError> {
    let io = |source| OracleError::Io {
        path: path.to_owned(),
        source,
    };
    let mut writer = csv::Writer::from_path(path).map_err(io)?;
    writer.write_record(["key", "predicted_frequency"]).map_err(io)?;
    let mut keys: Vec<_> = predictions.keys().copied().collect();
    keys.sort_unstable();
    for k in keys {
        writer
            .write_record([k.to_string(), predictions[&k].to_string()])
            .map_err(io)?;
    }
    writer.flush().map_err(|e| io(e.into()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treap::Treap;
    use std::io::Write;

    fn abc() -> FrequencyTable {
        FrequencyTable::from_counts([(10, 5), (20, 3), (30, 1)], 1).unwrap()
    }

    fn sorted_by_priority(map: &PriorityMap) -> Vec<Key> {
        let mut keys: Vec<_> = map.keys().copied().collect();
        keys.sort_by(|a, b| map[b].cmp(&map[a]));
        keys
    }

    #[test]
    fn table_ranks_and_probabilities() {
        let t = abc();
        assert_eq!(t.total(), 9);
        assert_eq!(t.keys_by_rank(), &[10, 20, 30]);
        assert_eq!(t.rank(30), Some(3));
        assert_eq!(t.probability(10), Some(5.0 / 9.0));
        assert_eq!(t.key_at_rank(0), None);
        assert!(matches!(
            FrequencyTable::from_counts([(1, 2), (1, 3)], 0),
            Err(OracleError::DuplicateKey(1))
        ));
        assert!(matches!(
            FrequencyTable::from_counts(Vec::new(), 0),
            Err(OracleError::EmptyTable)
        ));
    }

    #[test]
    fn ties_are_broken_by_seed() {
        let counts: Vec<(Key, u64)> = (0..20).map(|k| (k, 1)).collect();
        let a = FrequencyTable::from_counts(counts.clone(), 5).unwrap();
        let b = FrequencyTable::from_counts(counts.clone(), 5).unwrap();
        let c = FrequencyTable::from_counts(counts, 6).unwrap();
        assert_eq!(a.keys_by_rank(), b.keys_by_rank());
        assert_ne!(a.keys_by_rank(), c.keys_by_rank());
    }

    #[test]
    fn perfect_oracle_puts_most_frequent_at_root() {
        let t = abc();
        let pri = assign_priorities(&OracleKind::Perfect, &t, 0).unwrap();
        assert_eq!(sorted_by_priority(&pri), vec![10, 20, 30]);
        let mut treap = Treap::new();
        for k in [30, 10, 20] {
            treap.insert(k, 1, pri[&k]).unwrap();
        }
        assert_eq!(treap.root_key(), Some(10));
    }

    #[test]
    fn perfect_oracle_matches_rank_order_with_ties() {
        let counts: Vec<(Key, u64)> = (0..200).map(|k| (k, k % 7)).collect();
        let t = FrequencyTable::from_counts(counts, 9).unwrap();
        let pri = assign_priorities(&OracleKind::Perfect, &t, 0).unwrap();
        assert_eq!(sorted_by_priority(&pri), t.keys_by_rank());
    }

    #[test]
    fn noisy_rank_one_one_is_a_fair_coin_over_two_ranks() {
        // The permitted interval for rank 1 is {1, 2}.
        let mut rng = seed::rng(3);
        let draws: Vec<u64> = (0..20_000).map(|_| noisy_rank(1, 1.0, 1.0, &mut rng)).collect();
        assert!(draws.iter().all(|&r| r == 1 || r == 2));
        let ones = draws.iter().filter(|&&r| r == 1).count() as f64 / draws.len() as f64;
        assert!((ones - 0.5).abs() < 0.02, "{ones}");
    }

    #[test]
    fn noisy_rank_respects_bounds() {
        let counts: Vec<(Key, u64)> = (1..=300).map(|k| (k, 1000 / k)).collect();
        let t = FrequencyTable::from_counts(counts, 2).unwrap();
        let (eps, delta) = (2.0, 5.0);
        let mut rng = seed::rng(8);
        for rank in 1..=300 {
            for _ in 0..5 {
                let r = noisy_rank(rank, eps, delta, &mut rng);
                assert!(r >= rank as u64 && r as f64 <= eps * rank as f64 + delta);
            }
        }
        let pri = assign_priorities(&OracleKind::NoisyRank { epsilon: eps, delta }, &t, 4).unwrap();
        for (&k, p) in &pri {
            let rank = t.rank(k).unwrap() as f64;
            let predicted = -p.primary;
            assert!(predicted >= rank && predicted <= eps * rank + delta);
        }
    }

    #[test]
    fn multiplicative_respects_bounds_and_degenerates_at_one() {
        let counts: Vec<(Key, u64)> = (1..=100).map(|k| (k, 500 / k + 1)).collect();
        let t = FrequencyTable::from_counts(counts, 2).unwrap();
        let pri = assign_priorities(&OracleKind::MultiplicativeFreq { delta: 3.0 }, &t, 1).unwrap();
        for (&k, p) in &pri {
            let f = t.count(k).unwrap() as f64;
            assert!(p.primary >= f / 3.0 - 1e-9 && p.primary <= 3.0 * f + 1e-9);
        }
        let exact = assign_priorities(&OracleKind::MultiplicativeFreq { delta: 1.0 }, &t, 1).unwrap();
        let perfect = assign_priorities(&OracleKind::Perfect, &t, 99).unwrap();
        assert_eq!(exact, perfect);
    }

    #[test]
    fn topk_keys_dominate_the_rest() {
        let counts: Vec<(Key, u64)> = (1..=50).map(|k| (k, 100 - k)).collect();
        let t = FrequencyTable::from_counts(counts, 0).unwrap();
        let pri = assign_priorities(&OracleKind::TopK { k: 5 }, &t, 3).unwrap();
        let top: Vec<_> = t.keys_by_rank()[..5].iter().map(|k| pri[k]).collect();
        let rest: Vec<_> = t.keys_by_rank()[5..].iter().map(|k| pri[k]).collect();
        let min_top = top.iter().min().unwrap();
        assert!(rest.iter().all(|p| p < min_top));
        assert!(top.iter().all(|p| p.primary > 0.0 && p.primary < 1.0));

        let all = assign_priorities(&OracleKind::TopK { k: 50 }, &t, 3).unwrap();
        assert!(all.values().all(|p| p.primary > 0.0));
        assert!(assign_priorities(&OracleKind::TopK { k: 51 }, &t, 3).is_err());
    }

    #[test]
    fn assignment_is_deterministic() {
        let t = abc();
        for kind in [
            OracleKind::Random,
            OracleKind::TopK { k: 1 },
            OracleKind::NoisyRank { epsilon: 1.5, delta: 2.0 },
            OracleKind::MultiplicativeFreq { delta: 2.0 },
        ] {
            let a = assign_priorities(&kind, &t, 17).unwrap();
            let b = assign_priorities(&kind, &t, 17).unwrap();
            assert_eq!(a, b, "{kind}");
        }
    }

    #[test]
    fn bad_parameters_are_rejected() {
        let t = abc();
        assert!(assign_priorities(&OracleKind::NoisyRank { epsilon: 0.5, delta: 1.0 }, &t, 0).is_err());
        assert!(assign_priorities(&OracleKind::MultiplicativeFreq { delta: 0.9 }, &t, 0).is_err());
        assert!(assign_priorities(&OracleKind::TopK { k: 0 }, &t, 0).is_err());
    }

    #[test]
    fn rank_error_values() {
        assert_eq!(rank_error_from_delta(1.0).unwrap(), 1.0);
        assert_eq!(rank_error_from_delta(2.0).unwrap(), 4.0);
        assert_eq!(rank_error_from_delta(3.0).unwrap(), 9.0);
        assert!(rank_error_from_delta(0.5).is_err());
    }

    #[test]
    fn oracle_spec_round_trips() {
        for s in ["perfect", "random", "noisy:2,5", "mult:1.5", "topk:10", "file:/tmp/p.csv"] {
            let kind: OracleKind = s.parse().unwrap();
            assert_eq!(kind.to_string(), s);
        }
        for bad in ["", "noisy:2", "mult:x", "topk:0", "mult:0.5", "file:", "perfect:1"] {
            assert!(bad.parse::<OracleKind>().is_err(), "{bad}");
        }
    }

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn prediction_file_parsing() {
        let f = write("1,10.5\n2,3.0");
        let map = load_prediction_file(f.path()).unwrap();
        assert_eq!(map, HashMap::from([(1, 10.5), (2, 3.0)]));

        let f = write("");
        assert!(load_prediction_file(f.path()).unwrap().is_empty());

        let f = write("key,predicted_frequency\n7,1e3\n");
        assert_eq!(load_prediction_file(f.path()).unwrap()[&7], 1000.0);

        let f = write("1,2\n1,3\n");
        match load_prediction_file(f.path()) {
            Err(OracleError::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("duplicate"));
            }
            other => panic!("{other:?}"),
        }

        let f = write("1,2\nx,3\n");
        assert!(matches!(load_prediction_file(f.path()), Err(OracleError::Parse { line: 2, .. })));
        let f = write("1,2,3\n");
        assert!(matches!(load_prediction_file(f.path()), Err(OracleError::Parse { line: 1, .. })));
    }

    #[test]
    fn file_oracle_reports_missing_keys() {
        let f = write("10,5\n");
        let err = assign_priorities(&OracleKind::File(f.path().to_owned()), &abc(), 0).unwrap_err();
        match err {
            OracleError::MissingPredictions { keys } => assert_eq!(keys, vec![20, 30]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn file_oracle_with_true_counts_equals_perfect() {
        let t = abc();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pred.csv");
        let truth: HashMap<Key, f64> = [10, 20, 30]
            .iter()
            .map(|&k| (k, t.count(k).unwrap() as f64))
            .collect();
        write_prediction_file(&path, &truth).unwrap();
        let from_file = assign_priorities(&OracleKind::File(path), &t, 0).unwrap();
        assert_eq!(from_file, assign_priorities(&OracleKind::Perfect, &t, 0).unwrap());
    }
}
