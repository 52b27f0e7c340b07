use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Token that stands in for every token rejected by the vocabulary policy.
pub const UNK: &str = "<unk>";

/// Which tokens survive vocabulary construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VocabPolicy {
    /// Keep tokens occurring at least this often.
    MinCount(u64),
    /// Keep the most frequent tokens, `<unk>` not included.
    MaxSize(usize),
}

impl Default for VocabPolicy {
    fn default() -> Self {
        VocabPolicy::MinCount(5)
    }
}

/// Token ↔ id mapping with occurrence counts.
///
/// Id 0 is always `<unk>`. The remaining ids are ordered by descending count,
/// ties broken lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
    total: u64,
}

impl Vocabulary {
    pub const UNK_ID: usize = 0;

    pub fn from_counts<I, S>(counts: I, policy: VocabPolicy) -> Result<Self>
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        let mut merged: HashMap<String, u64> = HashMap::new();
        for (token, count) in counts {
            if count > 0 {
                *merged.entry(token.into()).or_default() += count;
            }
        }
        let mut unk_count = merged.remove(UNK).unwrap_or(0);
        let mut entries: Vec<(String, u64)> = merged.into_iter().collect();
        entries.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let keep = match policy {
            VocabPolicy::MinCount(min) => entries.partition_point(|e| e.1 >= min),
            VocabPolicy::MaxSize(max) => {
                if max == 0 {
                    return Err(Error::Config("max_size must be positive".into()));
                }
                max.min(entries.len())
            }
        };
        unk_count += entries[keep..].iter().map(|e| e.1).sum::<u64>();
        entries.truncate(keep);

        let mut tokens = Vec::with_capacity(entries.len() + 1);
        let mut counts = Vec::with_capacity(entries.len() + 1);
        tokens.push(UNK.to_owned());
        counts.push(unk_count);
        for (token, count) in entries {
            tokens.push(token);
            counts.push(count);
        }
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        let total = counts.iter().sum();
        Ok(Vocabulary {
            tokens,
            counts,
            index,
            total,
        })
    }

    /// Number of entries including `<unk>`.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    /// True when only `<unk>` is present.
    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 1
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn id_or_unk(&self, token: &str) -> usize {
        self.id(token).unwrap_or(Self::UNK_ID)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn count(&self, id: usize) -> u64 {
        self.counts[id]
    }

    pub fn unk_count(&self) -> u64 {
        self.counts[Self::UNK_ID]
    }

    /// Total number of token occurrences, replaced tokens included.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// The `k` least frequent tokens, `<unk>` excluded. Ties at equal counts are
    /// ordered lexicographically.
    pub fn least_frequent(&self, k: usize) -> Vec<&str> {
        let mut ids: Vec<usize> = (1..self.len()).collect();
        ids.sort_unstable_by(|&a, &b| {
            self.counts[a]
                .cmp(&self.counts[b])
                .then_with(|| self.tokens[a].cmp(&self.tokens[b]))
        });
        ids.into_iter()
            .take(k)
            .map(|i| self.tokens[i].as_str())
            .collect()
    }
}
