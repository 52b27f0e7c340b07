//! Word-pair similarity benchmarks scored by Spearman correlation.

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::embedding::{cosine, EmbeddingSpace};
use crate::error::{Error, Result};
use crate::scalar::{CompensatedSum, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkFormat {
    /// `word1<TAB>word2<TAB>score` (WordSim353 style).
    TabSeparated,
    /// Comma- or space-separated `word1 word2 score` (MEN style).
    Csv,
}

impl FromStr for BenchmarkFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tab" | "tsv" | "tab_separated" => Ok(BenchmarkFormat::TabSeparated),
            "csv" | "space" | "men" => Ok(BenchmarkFormat::Csv),
            other => Err(Error::InvalidInput(format!("unknown benchmark format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordPair {
    pub word1: String,
    pub word2: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityBenchmark {
    pub name: String,
    pub pairs: Vec<WordPair>,
}

impl SimilarityBenchmark {
    pub fn new(name: impl Into<String>, pairs: Vec<WordPair>) -> Result<Self> {
        let name = name.into();
        let mut seen = HashSet::new();
        for p in &pairs {
            if !p.score.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "{name}: non-finite score for ({}, {})",
                    p.word1, p.word2
                )));
            }
            if !seen.insert((p.word1.as_str(), p.word2.as_str())) {
                return Err(Error::InvalidInput(format!(
                    "{name}: duplicate pair ({}, {})",
                    p.word1, p.word2
                )));
            }
        }
        Ok(Self { name, pairs })
    }

    pub fn parse(name: &str, text: &str, format: BenchmarkFormat) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = match format {
                BenchmarkFormat::TabSeparated => trimmed.split('\t').map(str::trim).collect(),
                BenchmarkFormat::Csv => trimmed
                    .split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|f| !f.is_empty())
                    .collect(),
            };
            if fields.len() < 3 {
                return Err(Error::record(lineno, format!("expected 3 fields, found {}", fields.len())));
            }
            let score: f64 = fields[2]
                .parse()
                .map_err(|_| Error::record(lineno, format!("non-numeric score {:?}", fields[2])))?;
            if !score.is_finite() {
                return Err(Error::record(lineno, "non-finite score"));
            }
            pairs.push(WordPair {
                word1: fields[0].to_owned(),
                word2: fields[1].to_owned(),
                score,
            });
        }
        if pairs.is_empty() {
            return Err(Error::InvalidInput(format!("{name}: benchmark has no pairs")));
        }
        Self::new(name, pairs)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Load a benchmark; its name is the file stem.
pub fn load_benchmark(path: &Path, format: BenchmarkFormat) -> Result<SimilarityBenchmark> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "benchmark".into());
    SimilarityBenchmark::parse(&name, &text, format)
}

/// 1-based ranks with ties sharing the average of their positions.
pub fn average_ranks<T: Scalar>(values: &[T]) -> Vec<T> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = vec![T::zero(); values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start..end hold equal values; their ranks are start+1..=end.
        let rank = T::of((start + end + 1) as f64 / 2.0);
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson<T: Scalar>(x: &[T], y: &[T]) -> T {
    let n = T::of(x.len() as f64);
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let (mut sxy, mut sxx, mut syy) = (CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new());
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy.add(da * db);
        sxx.add(da * da);
        syy.add(db * db);
    }
    let r = sxy.value() / (sxx.value() * syy.value()).sqrt();
    r.max(-T::one()).min(T::one())
}

/// Spearman's ρ: Pearson correlation of average ranks.
pub fn spearman<T: Scalar>(x: &[T], y: &[T]) -> Result<T> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::InvalidInput("Spearman needs at least two pairs".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("Spearman inputs must be finite".into()));
    }
    let constant = |v: &[T]| v.iter().all(|&a| a == v[0]);
    if constant(x) || constant(y) {
        return Err(Error::Degenerate("Spearman is undefined for constant input".into()));
    }
    Ok(pearson(&average_ranks(x), &average_ranks(y)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityResult {
    pub benchmark: String,
    pub rho: f64,
    pub evaluated: usize,
    /// Pairs with at least one out-of-vocabulary word.
    pub skipped: usize,
}

/// Correlate cosine similarities with human scores over in-vocabulary pairs.
pub fn evaluate<T: Scalar>(
    space: &EmbeddingSpace<T>,
    benchmark: &SimilarityBenchmark,
) -> Result<SimilarityResult> {
    let mut model = Vec::new();
    let mut human = Vec::new();
    let mut skipped = 0;
    for p in &benchmark.pairs {
        match (space.lookup(&p.word1).vector(), space.lookup(&p.word2).vector()) {
            (Some(a), Some(b)) => {
                model.push(cosine(a, b)?.as_f64());
                human.push(p.score);
            }
            _ => skipped += 1,
        }
    }
    if model.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "{}: only {} of {} pairs are in vocabulary; at least 2 are needed",
            benchmark.name,
            model.len(),
            benchmark.len()
        )));
    }
    Ok(SimilarityResult {
        benchmark: benchmark.name.clone(),
        rho: spearman(&model, &human)?,
        evaluated: model.len(),
        skipped,
    })
}

/// Pairs in which at least one word is among the `k` least frequent
/// vocabulary tokens.
pub fn rare_token_subset(
    benchmark: &SimilarityBenchmark,
    vocab: &Vocabulary,
    k: usize,
) -> Result<SimilarityBenchmark> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be positive".into()));
    }
    let rare: HashSet<&str> = vocab.least_frequent(k).into_iter().collect();
    let is_rare = |w: &str| rare.contains(w) || rare.contains(w.to_lowercase().as_str());
    let pairs = benchmark
        .pairs
        .iter()
        .filter(|p| is_rare(&p.word1) || is_rare(&p.word2))
        .cloned()
        .collect();
    Ok(SimilarityBenchmark {
        name: format!("{}-rare{k}", benchmark.name),
        pairs,
    })
}
