use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationConfig {
    /// Monte-Carlo sample count, used when the partition count exceeds
    /// `exact_limit`.
    pub permutations: usize,
    pub seed: u64,
    pub exact_limit: u64,
}

impl Default for PermutationConfig {
    fn default() -> Self {
        Self {
            permutations: 10_000,
            seed: 42,
            exact_limit: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermutationMethod {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationInfo {
    pub method: PermutationMethod,
    /// Partitions evaluated.
    pub permutations: u64,
    pub seed: u64,
    /// Rayon workers available while sampling. Sampling is split into fixed
    /// chunks with their own streams, so the value does not affect results.
    pub workers: usize,
}

/// Monte-Carlo draws per independent RNG stream.
const CHUNK: usize = 1000;

/// All (or a sample of) re-partitions of the pooled attribute deltas into
/// lists of the original sizes, with the test statistic of each.
#[derive(Debug, Clone)]
pub struct PermutationUniverse {
    deltas: Vec<f64>,
    first_len: usize,
    statistics: Vec<f64>,
    info: PermutationInfo,
}

/// `C(n, k)`, saturating at `u64::MAX`.
pub fn binomial(n: usize, k: usize) -> u64 {
    let k = k.min(n - k.min(n));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

impl PermutationUniverse {
    /// # Panics
    /// If either delta list is empty.
    pub fn new<T: Scalar>(deltas_1: &[T], deltas_2: &[T], config: &PermutationConfig) -> Self {
        assert!(
            !deltas_1.is_empty() && !deltas_2.is_empty(),
            "permutation test needs two non-empty lists"
        );
        let deltas: Vec<f64> = deltas_1.iter().chain(deltas_2).map(|d| d.as_f64()).collect();
        let (n, k) = (deltas.len(), deltas_1.len());
        let total = binomial(n, k);
        let mut universe = Self {
            deltas,
            first_len: k,
            statistics: Vec::new(),
            info: PermutationInfo {
                method: PermutationMethod::Exact,
                permutations: 0,
                seed: config.seed,
                workers: rayon::current_num_threads(),
            },
        };
        if total <= config.exact_limit {
            universe.enumerate();
        } else {
            universe.sample(config.permutations, config.seed);
            universe.info.method = PermutationMethod::MonteCarlo;
        }
        universe.info.permutations = universe.statistics.len() as u64;
        universe
    }

    fn statistic(&self, first_sum: f64, total: f64) -> f64 {
        let k = self.first_len as f64;
        let m = (self.deltas.len() - self.first_len) as f64;
        first_sum / k - (total - first_sum) / m
    }

    fn enumerate(&mut self) {
        let (n, k) = (self.deltas.len(), self.first_len);
        let total: f64 = self.deltas.iter().sum();
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            let s: f64 = idx.iter().map(|&i| self.deltas[i]).sum();
            self.statistics.push(self.statistic(s, total));
            // Advance to the next k-combination in lexicographic order.
            let Some(pos) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
                break;
            };
            idx[pos] += 1;
            for j in pos + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }

    fn sample(&mut self, count: usize, seed: u64) {
        let (n, k) = (self.deltas.len(), self.first_len);
        let total: f64 = self.deltas.iter().sum();
        let chunks = count.div_ceil(CHUNK);
        let stats: Vec<Vec<f64>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(c as u64 + 1);
                let draws = CHUNK.min(count - c * CHUNK);
                let mut order: Vec<usize> = (0..n).collect();
                (0..draws)
                    .map(|_| {
                        // Partial Fisher–Yates: the first k slots are a uniform k-subset.
                        for i in 0..k {
                            let j = rng.random_range(i..n);
                            order.swap(i, j);
                        }
                        let s: f64 = order[..k].iter().map(|&i| self.deltas[i]).sum();
                        self.statistic(s, total)
                    })
                    .collect()
            })
            .collect();
        self.statistics = stats.into_iter().flatten().collect();
    }

    /// Statistic of the original partition.
    pub fn observed(&self) -> f64 {
        let total: f64 = self.deltas.iter().sum();
        let s: f64 = self.deltas[..self.first_len].iter().sum();
        self.statistic(s, total)
    }

    /// One-sided p-value of `observed`: the share of partitions whose
    /// statistic is at least as large. Exact enumeration includes the
    /// original partition; sampling uses `(hits + 1) / (n + 1)`.
    pub fn p_value(&self, observed: f64) -> f64 {
        let scale = self.deltas.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let tol = 1e-12 * (1.0 + scale);
        let hits = self.statistics.iter().filter(|&&s| s >= observed - tol).count() as f64;
        let n = self.statistics.len() as f64;
        match self.info.method {
            PermutationMethod::Exact => hits / n,
            PermutationMethod::MonteCarlo => (hits + 1.0) / (n + 1.0),
        }
    }

    /// Smallest p-value this universe can produce.
    pub fn min_p_value(&self) -> f64 {
        let n = self.statistics.len() as f64;
        match self.info.method {
            PermutationMethod::Exact => 1.0 / n,
            PermutationMethod::MonteCarlo => 1.0 / (n + 1.0),
        }
    }

    pub fn info(&self) -> PermutationInfo {
        self.info.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), 6);
        assert_eq!(binomial(14, 7), 3432);
        assert_eq!(binomial(16, 8), 12870);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(200, 100), u64::MAX);
    }

    #[test]
    fn two_by_two_enumerates_six_partitions() {
        let u = PermutationUniverse::new(&[1.0f64, 1.0], &[-1.0, -1.0], &PermutationConfig::default());
        assert_eq!(u.info().method, PermutationMethod::Exact);
        assert_eq!(u.info().permutations, 6);
        assert_eq!(u.p_value(u.observed()), 1.0 / 6.0);
        assert_eq!(u.min_p_value(), 1.0 / 6.0);
    }

    #[test]
    fn reversed_lists_get_p_near_one() {
        let u = PermutationUniverse::new(&[-1.0f64, -1.0], &[1.0, 1.0], &PermutationConfig::default());
        assert_eq!(u.p_value(u.observed()), 1.0);
    }

    #[test]
    fn large_lists_switch_to_sampling() {
        let a: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..8).map(|i| -(i as f64)).collect();
        let cfg = PermutationConfig { permutations: 2500, seed: 3, ..Default::default() };
        let u = PermutationUniverse::new(&a, &b, &cfg);
        assert_eq!(u.info().method, PermutationMethod::MonteCarlo);
        assert_eq!(u.info().permutations, 2500);
        let p = u.p_value(u.observed());
        assert!((1.0 / 2501.0..0.01).contains(&p), "{p}");
        let again = PermutationUniverse::new(&a, &b, &cfg);
        assert_eq!(again.p_value(again.observed()), p);
    }

    proptest::proptest! {
        #[test]
        fn p_value_is_monotone_in_observed(
            a in proptest::collection::vec(-1.0f64..1.0, 1..9),
            b in proptest::collection::vec(-1.0f64..1.0, 1..9),
            mut probes in proptest::collection::vec(-3.0f64..3.0, 2..20),
        ) {
            let cfg = PermutationConfig { permutations: 500, exact_limit: 2000, seed: 11 };
            let u = PermutationUniverse::new(&a, &b, &cfg);
            probes.sort_by(f64::total_cmp);
            let ps: Vec<f64> = probes.iter().map(|&o| u.p_value(o)).collect();
            for w in ps.windows(2) {
                proptest::prop_assert!(w[1] <= w[0]);
            }
            for p in ps {
                proptest::prop_assert!((0.0..=1.0).contains(&p));
            }
        }
    }
}
