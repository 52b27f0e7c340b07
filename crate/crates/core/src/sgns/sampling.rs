use rand::Rng;
use rand_distr::{weighted::WeightedAliasIndex, Distribution};

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

/// Probability of keeping one occurrence of a token with relative frequency
/// `freq` under threshold `t`: `min(1, sqrt(t / freq) + t / freq)`.
pub fn subsample_keep_prob(freq: f64, threshold: f64) -> Result<f64> {
    if !(freq > 0.0 && freq <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "relative frequency must lie in (0, 1], got {freq}"
        )));
    }
    let ratio = threshold / freq;
    Ok((ratio.sqrt() + ratio).min(1.0))
}

/// Noise distribution for negative sampling, `P(token) ∝ count^0.75`.
#[derive(Debug, Clone)]
pub struct NegativeTable {
    ids: Vec<usize>,
    probabilities: Vec<f64>,
    alias: WeightedAliasIndex<f64>,
}

pub const NOISE_EXPONENT: f64 = 0.75;

impl NegativeTable {
    /// Table over every vocabulary entry with a positive count; `<unk>` is left
    /// out unless `include_unk`.
    pub fn new(vocab: &Vocabulary, include_unk: bool) -> Result<Self> {
        let first = if include_unk { 0 } else { Vocabulary::UNK_ID + 1 };
        let ids: Vec<usize> = (first..vocab.len()).filter(|&i| vocab.count(i) > 0).collect();
        let weights: Vec<u64> = ids.iter().map(|&i| vocab.count(i)).collect();
        Self::from_counts(ids, &weights)
    }

    /// Table over arbitrary ids with the given counts.
    pub fn from_counts(ids: Vec<usize>, counts: &[u64]) -> Result<Self> {
        if ids.is_empty() || ids.len() != counts.len() {
            return Err(Error::InvalidInput(
                "negative table needs at least one token with a positive count".into(),
            ));
        }
        let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(NOISE_EXPONENT)).collect();
        let total: f64 = weights.iter().sum();
        let probabilities = weights.iter().map(|w| w / total).collect();
        let alias = WeightedAliasIndex::new(weights)
            .map_err(|e| Error::InvalidInput(format!("negative table: {e}")))?;
        Ok(Self {
            ids,
            probabilities,
            alias,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.ids[self.alias.sample(rng)]
    }

    /// `(id, probability)` pairs in table order.
    pub fn probabilities(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.ids.iter().copied().zip(self.probabilities.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}
