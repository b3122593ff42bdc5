//! Closed-form expectations and bounds for learned and random treaps.
//!
//! Depth-valued functions use the one-based convention (root = 1 comparison)
//! unless their name or doc says otherwise. [`expected_random_depth`] and
//! [`random_cost_lower_bound`] are the classic zero-based quantities; their
//! `*_comparisons` companions add the root.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("n must be at least 1")]
    EmptyDomain,
    #[error("alpha must be positive, got {0}")]
    BadAlpha(f64),
    #[error("index {i} is outside 1..={n}")]
    IndexOutOfRange { i: usize, n: usize },
    #[error("noise parameters must be at least 1 (epsilon {epsilon}, delta {delta})")]
    BadNoise { epsilon: f64, delta: f64 },
    #[error("top-k parameters invalid: k {k}, n {n}, mass {mass}")]
    BadTopK { k: usize, n: usize, mass: f64 },
    #[error("invalid distribution: {0}")]
    BadDistribution(String),
}

/// Access probabilities indexed by rank, most frequent first.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    /// Validates non-negativity, unit mass (within 1e-12) and non-increasing order.
    pub fn new(probs: Vec<f64>) -> Result<Self, AnalyticsError> {
        if probs.is_empty() {
            return Err(AnalyticsError::EmptyDomain);
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(AnalyticsError::BadDistribution(format!(
                "probability {p} is not a finite non-negative number"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(AnalyticsError::BadDistribution(format!(
                "probabilities sum to {total}"
            )));
        }
        if let Some(i) = probs.windows(2).position(|w| w[1] > w[0]) {
            return Err(AnalyticsError::BadDistribution(format!(
                "probability at rank {} exceeds rank {}",
                i + 2,
                i + 1
            )));
        }
        Ok(Self { probs })
    }

    pub fn uniform(n: usize) -> Result<Self, AnalyticsError> {
        if n == 0 {
            return Err(AnalyticsError::EmptyDomain);
        }
        Self::new(vec![1.0 / n as f64; n])
    }

    /// All mass on rank 1.
    pub fn point_mass(n: usize) -> Result<Self, AnalyticsError> {
        if n == 0 {
            return Err(AnalyticsError::EmptyDomain);
        }
        let mut probs = vec![0.0; n];
        probs[0] = 1.0;
        Self::new(probs)
    }

    /// Normalizes non-negative weights, then sorts them into rank order.
    pub fn from_weights(mut weights: Vec<f64>) -> Result<Self, AnalyticsError> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(AnalyticsError::BadDistribution(format!("total weight {total}")));
        }
        weights.sort_by(|a, b| b.total_cmp(a));
        for w in &mut weights {
            *w /= total;
        }
        // Re-normalize away the rounding of the division.
        let total: f64 = weights.iter().sum();
        weights[0] += 1.0 - total;
        Self::new(weights)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Total probability of the `k` most frequent ranks.
    pub fn top_mass(&self, k: usize) -> f64 {
        self.probs.iter().take(k).sum()
    }
}

/// `H_n = 1 + 1/2 + ... + 1/n`.
pub fn harmonic(n: usize) -> Result<f64, AnalyticsError> {
    if n == 0 {
        return Err(AnalyticsError::EmptyDomain);
    }
    // Smallest terms first.
    Ok((1..=n).rev().map(|i| 1.0 / i as f64).sum())
}

/// `H_{n,alpha} = sum of 1/i^alpha for i in 1..=n`.
pub fn generalized_harmonic(n: usize, alpha: f64) -> Result<f64, AnalyticsError> {
    if n == 0 {
        return Err(AnalyticsError::EmptyDomain);
    }
    check_alpha(alpha)?;
    Ok((1..=n).rev().map(|i| (i as f64).powf(-alpha)).sum())
}

/// `H_1, ..., H_n` as a prefix table (index 0 holds `H_1`).
pub fn harmonic_table(n: usize) -> Vec<f64> {
    let mut acc = 0.0;
    (1..=n)
        .map(|i| {
            acc += 1.0 / i as f64;
            acc
        })
        .collect()
}

/// Expected one-based depth of the `i`-th most frequent key in a learned treap: `2H_i - 1`.
pub fn expected_learned_depth(i: usize) -> Result<f64, AnalyticsError> {
    Ok(2.0 * harmonic(i)? - 1.0)
}

/// Expected zero-based depth of the `i`-th smallest of `n` keys in a random
/// treap: `H_i + H_{n-i+1} - 2`.
pub fn expected_random_depth(i: usize, n: usize) -> Result<f64, AnalyticsError> {
    if i == 0 || i > n {
        return Err(AnalyticsError::IndexOutOfRange { i, n });
    }
    Ok(harmonic(i)? + harmonic(n - i + 1)? - 2.0)
}

/// [`expected_random_depth`] counted in comparisons (one-based).
pub fn expected_random_depth_comparisons(i: usize, n: usize) -> Result<f64, AnalyticsError> {
    Ok(expected_random_depth(i, n)? + 1.0)
}

/// Expected comparisons per access of a learned treap: `sum p_i (2H_i - 1)`.
pub fn expected_learned_cost(dist: &Distribution) -> f64 {
    let h = harmonic_table(dist.len());
    dist.probs()
        .iter()
        .zip(&h)
        .map(|(p, hi)| p * (2.0 * hi - 1.0))
        .sum()
}

/// Lower bound on the zero-based expected access cost of a random treap, for
/// any access distribution: `2H_{n+1} - 4`.
pub fn random_cost_lower_bound(n: usize) -> Result<f64, AnalyticsError> {
    if n == 0 {
        return Err(AnalyticsError::EmptyDomain);
    }
    Ok(2.0 * harmonic(n + 1)? - 4.0)
}

/// [`random_cost_lower_bound`] counted in comparisons (one-based).
pub fn random_cost_lower_bound_comparisons(n: usize) -> Result<f64, AnalyticsError> {
    Ok(random_cost_lower_bound(n)? + 1.0)
}

/// Exact zero-based expected access cost of a random treap when the rank order
/// is a uniformly random permutation of the keys: `(2/n) sum H_i - 2`.
pub fn expected_random_cost(n: usize) -> Result<f64, AnalyticsError> {
    if n == 0 {
        return Err(AnalyticsError::EmptyDomain);
    }
    let total: f64 = harmonic_table(n).iter().sum();
    Ok(2.0 * total / n as f64 - 2.0)
}

/// Zipf probabilities `p_i = 1 / (i^alpha H_{n,alpha})`.
pub fn zipf_distribution(n: usize, alpha: f64) -> Result<Distribution, AnalyticsError> {
    let norm = generalized_harmonic(n, alpha)?;
    let mut probs: Vec<f64> = (1..=n)
        .map(|i| 1.0 / ((i as f64).powf(alpha) * norm))
        .collect();
    let total: f64 = probs.iter().sum();
    probs[0] += 1.0 - total;
    Distribution::new(probs)
}

/// Learned-treap expected cost under Zipf(alpha) over `n` keys, by direct summation.
pub fn zipf_learned_cost(n: usize, alpha: f64) -> Result<f64, AnalyticsError> {
    let norm = generalized_harmonic(n, alpha)?;
    let h = harmonic_table(n);
    let total: f64 = (1..=n)
        .rev()
        .map(|i| (2.0 * h[i - 1] - 1.0) / (i as f64).powf(alpha))
        .sum();
    Ok(total / norm)
}

/// Closed form of [`zipf_learned_cost`] at `alpha = 1`: `2C/H_n - 1` with
/// `C = (H_n^2 + H_{n,2}) / 2`.
pub fn zipf_learned_cost_closed_form(n: usize) -> Result<f64, AnalyticsError> {
    let h = harmonic(n)?;
    let h2 = generalized_harmonic(n, 2.0)?;
    let c = 0.5 * (h * h + h2);
    Ok(2.0 * c / h - 1.0)
}

/// Shannon entropy in bits, with `0 log 0 = 0`.
pub fn shannon_entropy(dist: &Distribution) -> f64 {
    dist.probs()
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

/// Lower bound on the weighted path length of any BST for `dist`: entropy / 3.
pub fn mehlhorn_bound(dist: &Distribution) -> f64 {
    shannon_entropy(dist) / 3.0
}

/// Additive per-access gap between a learned treap fed by an
/// `(epsilon, delta)`-noisy rank oracle and one fed by a perfect oracle:
/// `2(1 + ln(epsilon + delta))`.
pub fn noisy_gap_bound(epsilon: f64, delta: f64) -> Result<f64, AnalyticsError> {
    if !(epsilon >= 1.0 && delta >= 1.0) {
        return Err(AnalyticsError::BadNoise { epsilon, delta });
    }
    Ok(2.0 * (1.0 + (epsilon + delta).ln()))
}

/// Upper bound on the expected access depth with a top-`k` oracle whose top
/// keys carry `mass` of the queries: `2(p H_k + (1 - p) H_n) - 1`.
pub fn topk_expected_cost(k: usize, n: usize, mass: f64) -> Result<f64, AnalyticsError> {
    if k == 0 || k > n || !(0.0..=1.0).contains(&mass) {
        return Err(AnalyticsError::BadTopK { k, n, mass });
    }
    Ok(2.0 * (mass * harmonic(k)? + (1.0 - mass) * harmonic(n)?) - 1.0)
}

fn check_alpha(alpha: f64) -> Result<(), AnalyticsError> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(AnalyticsError::BadAlpha(alpha))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    /// All permutations of 0..n, used to average over every priority order.
    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    /// Zero-based depth of position `target` in the treap whose keys 0..n carry
    /// priorities `prio`: count keys that dominate every key between them and
    /// the target.
    fn brute_depth(prio: &[usize], target: usize) -> usize {
        (0..prio.len())
            .filter(|&y| {
                y != target && {
                    let (a, b) = if y < target { (y, target) } else { (target, y) };
                    (a..=b).all(|z| prio[z] <= prio[y])
                }
            })
            .count()
    }

    #[test]
    fn harmonic_values() {
        assert_eq!(harmonic(1), Ok(1.0));
        assert!(close(harmonic(4).unwrap(), 25.0 / 12.0, 1e-15));
        assert!(close(generalized_harmonic(2, 2.0).unwrap(), 1.25, 1e-15));
        assert_eq!(harmonic(0), Err(AnalyticsError::EmptyDomain));
        assert_eq!(generalized_harmonic(3, 0.0), Err(AnalyticsError::BadAlpha(0.0)));
    }

    #[test]
    fn learned_depth_values() {
        assert_eq!(expected_learned_depth(1), Ok(1.0));
        assert!(close(expected_learned_depth(2).unwrap(), 2.0, 1e-15));
        assert!(close(expected_learned_depth(4).unwrap(), 19.0 / 6.0, 1e-12));
        assert!(expected_learned_depth(0).is_err());
    }

    #[test]
    fn learned_depth_of_rank_four_matches_enumeration() {
        // The 4th-ranked key has the lowest priority; its ancestors are decided
        // by the key order of ranks 1..4, uniform over all 24 placements.
        let perms = permutations(4);
        let mut total = 0.0;
        for keys in &perms {
            // keys[r] = key position of rank r; priority = 4 - r.
            let mut prio = vec![0; 4];
            for (r, &k) in keys.iter().enumerate() {
                prio[k] = 4 - r;
            }
            total += (brute_depth(&prio, keys[3]) + 1) as f64;
        }
        let mean = total / perms.len() as f64;
        assert!(close(mean, expected_learned_depth(4).unwrap(), 1e-12));
    }

    #[test]
    fn random_depth_matches_enumeration() {
        assert_eq!(expected_random_depth(1, 1), Ok(0.0));
        for n in 1..=5 {
            let perms = permutations(n);
            for i in 1..=n {
                let mean = perms
                    .iter()
                    .map(|prio| brute_depth(prio, i - 1) as f64)
                    .sum::<f64>()
                    / perms.len() as f64;
                assert!(
                    close(mean, expected_random_depth(i, n).unwrap(), 1e-12),
                    "n={n} i={i}"
                );
            }
        }
        assert!(close(expected_random_depth(1, 2).unwrap(), 0.5, 1e-15));
        assert!(close(expected_random_depth(2, 3).unwrap(), 1.0, 1e-15));
        assert!(expected_random_depth(0, 3).is_err());
        assert!(expected_random_depth(4, 3).is_err());
    }

    #[test]
    fn random_cost_matches_average_depth() {
        for n in [1, 2, 7, 50] {
            let avg = (1..=n)
                .map(|i| expected_random_depth(i, n).unwrap())
                .sum::<f64>()
                / n as f64;
            assert!(close(avg, expected_random_cost(n).unwrap(), 1e-12));
            assert!(avg >= random_cost_lower_bound(n).unwrap());
        }
    }

    #[test]
    fn learned_cost_examples() {
        let point = Distribution::point_mass(5).unwrap();
        assert!(close(expected_learned_cost(&point), 1.0, 1e-15));
        let uniform = Distribution::uniform(2).unwrap();
        assert!(close(expected_learned_cost(&uniform), 1.5, 1e-15));
        let zipf = zipf_distribution(2, 1.0).unwrap();
        assert!(close(expected_learned_cost(&zipf), 4.0 / 3.0, 1e-12));
    }

    #[test]
    fn lower_bound_values() {
        assert!(close(random_cost_lower_bound(1).unwrap(), -1.0, 1e-15));
        assert!(close(random_cost_lower_bound(3).unwrap(), 1.0 / 6.0, 1e-12));
        assert!(random_cost_lower_bound(0).is_err());
    }

    #[test]
    fn zipf_distribution_values() {
        let d = zipf_distribution(2, 1.0).unwrap();
        assert!(close(d.probs()[0], 2.0 / 3.0, 1e-15) && close(d.probs()[1], 1.0 / 3.0, 1e-15));
        let d = zipf_distribution(2, 2.0).unwrap();
        assert!(close(d.probs()[0], 0.8, 1e-15) && close(d.probs()[1], 0.2, 1e-15));
        for (n, a) in [(10, 0.5), (1000, 1.0), (333, 2.5)] {
            let d = zipf_distribution(n, a).unwrap();
            assert!(close(d.probs().iter().sum::<f64>(), 1.0, 1e-12));
        }
        assert!(zipf_distribution(0, 1.0).is_err());
        assert!(zipf_distribution(5, -1.0).is_err());
    }

    #[test]
    fn zipf_cost_values() {
        assert!(close(zipf_learned_cost(1, 1.7).unwrap(), 1.0, 1e-15));
        assert!(close(zipf_learned_cost(2, 1.0).unwrap(), 4.0 / 3.0, 1e-12));
        assert!(close(zipf_learned_cost_closed_form(2).unwrap(), 4.0 / 3.0, 1e-12));
        assert!(close(zipf_learned_cost(2, 2.0).unwrap(), 1.2, 1e-12));
    }

    #[test]
    fn closed_form_agrees_with_direct_sum() {
        for n in [1, 10, 1_000, 100_000, 1_000_000] {
            let direct = zipf_learned_cost(n, 1.0).unwrap();
            let closed = zipf_learned_cost_closed_form(n).unwrap();
            assert!(close(direct, closed, 1e-9), "n={n}: {direct} vs {closed}");
        }
    }

    #[test]
    fn entropy_values() {
        assert!(close(shannon_entropy(&Distribution::uniform(2).unwrap()), 1.0, 1e-15));
        assert_eq!(shannon_entropy(&Distribution::point_mass(4).unwrap()), 0.0);
        let z = zipf_distribution(2, 1.0).unwrap();
        let want = (2.0 / 3.0) * 1.5f64.log2() + (1.0 / 3.0) * 3.0f64.log2();
        assert!(close(shannon_entropy(&z), want, 1e-12));
        assert!(close(mehlhorn_bound(&z), want / 3.0, 1e-12));
    }

    #[test]
    fn noisy_gap_values() {
        assert!(close(noisy_gap_bound(1.0, 1.0).unwrap(), 2.0 * (1.0 + 2f64.ln()), 1e-15));
        assert!(close(noisy_gap_bound(2.0, 5.0).unwrap(), 2.0 * (1.0 + 7f64.ln()), 1e-15));
        assert!(noisy_gap_bound(2.0, 3.0).unwrap() > noisy_gap_bound(1.5, 3.0).unwrap());
        assert!(noisy_gap_bound(2.0, 3.0).unwrap() > noisy_gap_bound(2.0, 2.0).unwrap());
        assert!(noisy_gap_bound(0.5, 1.0).is_err());
    }

    #[test]
    fn topk_values() {
        let n = 50;
        let hn = harmonic(n).unwrap();
        assert!(close(topk_expected_cost(n, n, 1.0).unwrap(), 2.0 * hn - 1.0, 1e-12));
        assert!(close(topk_expected_cost(1, n, 1.0).unwrap(), 1.0, 1e-15));
        assert!(close(topk_expected_cost(1, n, 0.5).unwrap(), hn, 1e-12));
        assert!(topk_expected_cost(0, n, 0.5).is_err());
        assert!(topk_expected_cost(3, n, 1.5).is_err());
    }

    #[test]
    fn monotonicity_and_symmetry() {
        let n = 40;
        for i in 1..n {
            assert!(expected_learned_depth(i + 1).unwrap() > expected_learned_depth(i).unwrap());
            let a = expected_random_depth(i, n).unwrap();
            let b = expected_random_depth(n - i + 1, n).unwrap();
            assert!(close(a, b, 1e-12));
        }
        let ends = expected_random_depth(1, n).unwrap();
        let mid = expected_random_depth(n / 2, n).unwrap();
        assert!(ends < mid);
    }

    #[test]
    fn learned_cost_stays_between_one_and_uniform_worst_case() {
        let n = 300;
        let worst = 2.0 * harmonic(n).unwrap() - 1.0;
        for dist in [
            Distribution::uniform(n).unwrap(),
            Distribution::point_mass(n).unwrap(),
            zipf_distribution(n, 0.7).unwrap(),
            zipf_distribution(n, 2.0).unwrap(),
        ] {
            let c = expected_learned_cost(&dist);
            assert!((1.0..=worst + 1e-12).contains(&c));
        }
    }

    #[test]
    fn zipf_one_cost_is_within_three_entropies() {
        for n in [100, 1_000, 10_000, 100_000, 1_000_000] {
            let d = zipf_distribution(n, 1.0).unwrap();
            let ratio = zipf_learned_cost(n, 1.0).unwrap() / shannon_entropy(&d);
            assert!(ratio <= 3.0, "n={n} ratio={ratio}");
            assert!(zipf_learned_cost(n, 1.0).unwrap() >= mehlhorn_bound(&d));
        }
    }

    #[test]
    fn steep_zipf_cost_converges() {
        // Increments shrink with each tenfold growth of n and the cost stays bounded.
        let costs: Vec<f64> = [1_000, 10_000, 100_000, 1_000_000]
            .iter()
            .map(|&n| zipf_learned_cost(n, 1.5).unwrap())
            .collect();
        for w in costs.windows(3) {
            assert!(w[2] - w[1] < w[1] - w[0]);
        }
        assert!(costs[3] < 4.0);
    }

    #[test]
    fn distribution_validation() {
        assert!(Distribution::new(vec![0.5, 0.6]).is_err());
        assert!(Distribution::new(vec![0.3, 0.7]).is_err());
        assert!(Distribution::new(vec![-0.1, 1.1]).is_err());
        assert!(Distribution::new(vec![]).is_err());
        let d = Distribution::from_weights(vec![1.0, 3.0]).unwrap();
        assert!(close(d.probs()[0], 0.75, 1e-15));
        assert!(close(d.top_mass(1), 0.75, 1e-15));
    }
}
