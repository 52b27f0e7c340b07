use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::cache::TrainingCache;
use super::plan::{AlgorithmSpec, ExperimentPlan, SliceSpec};
use crate::bias::{cross_algorithm_variance, delta_accuracy, weat, PermutationConfig, WeatResult, WeatTestSpec};
use crate::corpus::{build_vocab, hex_digest, Corpus, CorpusView, Orientation, SliceFilter, Vocabulary};
use crate::embedding::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::pool::pool_file;
use crate::scalar::Scalar;
use crate::sgns::{train, TrainConfig};
use crate::similarity::{evaluate, load_benchmark, rare_token_subset, SimilarityBenchmark, SimilarityResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    Weat,
    Similarity,
}

/// One (algorithm, slice, measure) result. Exactly one of `value` and
/// `error` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub algorithm: String,
    pub slice: String,
    pub measure: String,
    pub kind: MeasureKind,
    pub value: Option<f64>,
    pub p_value: Option<f64>,
    /// Words (WEAT) or pairs (similarity) that had embeddings.
    pub evaluated: Option<usize>,
    /// Words or pairs skipped as out of vocabulary.
    pub skipped: Option<usize>,
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weat: Option<WeatResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity: Option<SimilarityResult>,
}

impl Cell {
    fn failed(algorithm: &str, slice: &str, measure: &str, kind: MeasureKind, error: &Error) -> Self {
        Cell {
            algorithm: algorithm.to_owned(),
            slice: slice.to_owned(),
            measure: measure.to_owned(),
            kind,
            value: None,
            p_value: None,
            evaluated: None,
            skipped: None,
            error: Some(error.to_string()),
            weat: None,
            similarity: None,
        }
    }

    fn from_weat(algorithm: &str, slice: &str, result: WeatResult) -> Self {
        Cell {
            algorithm: algorithm.to_owned(),
            slice: slice.to_owned(),
            measure: result.spec.clone(),
            kind: MeasureKind::Weat,
            value: Some(result.effect_size),
            p_value: result.p_value,
            evaluated: Some(sum_sizes(&result)),
            skipped: Some(result.oov.total()),
            error: None,
            weat: Some(result),
            similarity: None,
        }
    }

    fn from_similarity(algorithm: &str, slice: &str, result: SimilarityResult) -> Self {
        Cell {
            algorithm: algorithm.to_owned(),
            slice: slice.to_owned(),
            measure: result.benchmark.clone(),
            kind: MeasureKind::Similarity,
            value: Some(result.rho),
            p_value: None,
            evaluated: Some(result.evaluated),
            skipped: Some(result.skipped),
            error: None,
            weat: None,
            similarity: Some(result),
        }
    }
}

fn sum_sizes(r: &WeatResult) -> usize {
    let s = r.resolved_sizes;
    s.group_1 + s.group_2 + s.attribute_1 + s.attribute_2
}

/// Conservative-slice score minus liberal-slice score for one algorithm and
/// WEAT measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub algorithm: String,
    pub measure: String,
    pub conservative: String,
    pub liberal: String,
    pub value: f64,
}

/// Sample variance of one slice's WEAT scores across algorithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceRow {
    pub slice: String,
    pub measure: String,
    pub algorithms: Vec<String>,
    pub value: f64,
}

/// How one (algorithm, slice) space was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceRecord {
    pub algorithm: String,
    pub slice: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// `trained`, or the imported file.
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slice_fingerprint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub articles: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub plan_hash: String,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permutations: Option<PermutationConfig>,
    pub slices: Vec<SliceSpec>,
    pub spaces: Vec<SpaceRecord>,
}

/// Cells of an experiment grid plus the Δ and variance rows derived from
/// them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub cells: Vec<Cell>,
    pub deltas: Vec<DeltaRow>,
    pub variances: Vec<VarianceRow>,
    pub provenance: Provenance,
}

impl ResultTable {
    /// Assemble a table, deriving Δ and variance rows from `cells`.
    pub fn new(cells: Vec<Cell>, provenance: Provenance) -> Result<Self> {
        let (deltas, variances) = derive_rows(&cells, &provenance.slices)?;
        let table = ResultTable { cells, deltas, variances, provenance };
        table.check()?;
        Ok(table)
    }

    pub fn cell(&self, algorithm: &str, slice: &str, measure: &str) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.algorithm == algorithm && c.slice == slice && c.measure == measure)
    }

    /// Verify that cell keys are unique, every cell carries either a value or
    /// an error, and the Δ and variance rows equal a fresh derivation from
    /// the cells.
    pub fn check(&self) -> Result<()> {
        let inconsistent = |m: String| Err(Error::InvalidInput(format!("inconsistent result table: {m}")));
        let mut keys = BTreeSet::new();
        for c in &self.cells {
            if !keys.insert((&c.algorithm, &c.slice, &c.measure)) {
                return inconsistent(format!("duplicate cell {}/{}/{}", c.algorithm, c.slice, c.measure));
            }
            if c.value.is_some() == c.error.is_some() {
                return inconsistent(format!("cell {}/{}/{} needs exactly one of value and error", c.algorithm, c.slice, c.measure));
            }
            if c.value.is_some_and(|v| !v.is_finite()) {
                return inconsistent(format!("cell {}/{}/{} is not finite", c.algorithm, c.slice, c.measure));
            }
        }
        let (deltas, variances) = derive_rows(&self.cells, &self.provenance.slices)?;
        if deltas != self.deltas {
            return inconsistent("delta rows do not match their cells".into());
        }
        if variances != self.variances {
            return inconsistent("variance rows do not match their cells".into());
        }
        Ok(())
    }
}

/// Δ rows pair every conservative-only slice with each liberal-only slice of
/// the same year restriction. Variance rows cover each (slice, WEAT measure)
/// with at least two successful algorithms.
fn derive_rows(cells: &[Cell], slices: &[SliceSpec]) -> Result<(Vec<DeltaRow>, Vec<VarianceRow>)> {
    let filters: Vec<(String, SliceFilter)> = slices
        .iter()
        .map(|s| Ok((s.name.clone(), s.parsed_filter()?)))
        .collect::<Result<_>>()?;
    let only = |f: &SliceFilter, o: Orientation| f.orientations.as_ref().is_some_and(|set| set.len() == 1 && set.contains(&o));
    let mut pairs = Vec::new();
    for (cons, cf) in filters.iter().filter(|(_, f)| only(f, Orientation::Conservative)) {
        for (lib, lf) in filters.iter().filter(|(_, f)| only(f, Orientation::Liberal)) {
            if cf.years == lf.years {
                pairs.push((cons.as_str(), lib.as_str()));
            }
        }
    }

    let mut algorithms: Vec<&str> = Vec::new();
    let mut measures: Vec<&str> = Vec::new();
    let mut values: BTreeMap<(&str, &str, &str), f64> = BTreeMap::new();
    for c in cells.iter().filter(|c| c.kind == MeasureKind::Weat) {
        if !algorithms.contains(&c.algorithm.as_str()) {
            algorithms.push(&c.algorithm);
        }
        if !measures.contains(&c.measure.as_str()) {
            measures.push(&c.measure);
        }
        if let Some(v) = c.value {
            values.insert((&c.algorithm, &c.slice, &c.measure), v);
        }
    }

    let mut deltas = Vec::new();
    for &alg in &algorithms {
        for &measure in &measures {
            for &(cons, lib) in &pairs {
                if let (Some(&c), Some(&l)) = (values.get(&(alg, cons, measure)), values.get(&(alg, lib, measure))) {
                    deltas.push(DeltaRow {
                        algorithm: alg.to_owned(),
                        measure: measure.to_owned(),
                        conservative: cons.to_owned(),
                        liberal: lib.to_owned(),
                        value: delta_accuracy(c, l)?,
                    });
                }
            }
        }
    }

    let mut variances = Vec::new();
    for (slice, _) in &filters {
        for &measure in &measures {
            let (names, scores): (Vec<String>, Vec<f64>) = algorithms
                .iter()
                .filter_map(|&a| values.get(&(a, slice.as_str(), measure)).map(|&v| (a.to_owned(), v)))
                .unzip();
            if scores.len() >= 2 {
                variances.push(VarianceRow {
                    slice: slice.clone(),
                    measure: measure.to_owned(),
                    algorithms: names,
                    value: cross_algorithm_variance(&scores)?,
                });
            }
        }
    }
    Ok((deltas, variances))
}

enum Measure {
    Weat(WeatTestSpec),
    Similarity(SimilarityBenchmark),
    RareSimilarity(SimilarityBenchmark, usize),
}

impl Measure {
    fn name(&self) -> String {
        match self {
            Measure::Weat(s) => s.name.clone(),
            Measure::Similarity(b) => b.name.clone(),
            Measure::RareSimilarity(b, k) => format!("{}-rare{k}", b.name),
        }
    }

    fn kind(&self) -> MeasureKind {
        match self {
            Measure::Weat(_) => MeasureKind::Weat,
            _ => MeasureKind::Similarity,
        }
    }
}

fn load_measures(plan: &ExperimentPlan) -> Result<Vec<Measure>> {
    let mut measures = Vec::new();
    for w in &plan.measures.weat {
        let spec = WeatTestSpec::resolve(w)?;
        spec.validate()?;
        measures.push(Measure::Weat(spec));
    }
    for b in &plan.measures.benchmarks {
        let bench = load_benchmark(&b.path, b.format)?;
        if let Some(k) = b.rare_k {
            measures.push(Measure::Similarity(bench.clone()));
            measures.push(Measure::RareSimilarity(bench, k));
        } else {
            measures.push(Measure::Similarity(bench));
        }
    }
    let mut names = BTreeSet::new();
    for m in &measures {
        if !names.insert(m.name()) {
            return Err(Error::Config(format!("two measures are named {:?}", m.name())));
        }
    }
    Ok(measures)
}

fn plan_hash(plan: &ExperimentPlan) -> Result<String> {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(&plan.corpus)?);
    hasher.update(serde_json::to_vec(&plan.slices)?);
    hasher.update(serde_json::to_vec(&plan.algorithms)?);
    hasher.update(serde_json::to_vec(&plan.measures)?);
    hasher.update(serde_json::to_vec(&plan.seeds)?);
    hasher.update(serde_json::to_vec(&plan.vocab)?);
    hasher.update(serde_json::to_vec(&plan.tokenize)?);
    Ok(hex_digest(hasher))
}

struct Job<'p> {
    label: String,
    algorithm: &'p AlgorithmSpec,
    seed: Option<u64>,
    slice: &'p SliceSpec,
    filter: SliceFilter,
}

/// Produce every (algorithm, slice) space of `plan` and evaluate every
/// measure on it. Cells run in parallel; a failing space or measure marks
/// its cells with an error and leaves the rest intact. Trained spaces are
/// cached under `<output_dir>/cache`.
pub fn run<T: Scalar>(plan: &ExperimentPlan) -> Result<ResultTable> {
    plan.validate()?;
    let measures = load_measures(plan)?;
    let corpus = plan.corpus.as_deref().map(Corpus::open).transpose()?;
    let cache = TrainingCache::new(plan.output_dir.join("cache"));
    let permutations = (plan.measures.permutations > 0).then(|| PermutationConfig {
        permutations: plan.measures.permutations,
        seed: plan.seeds[0],
        ..Default::default()
    });

    let mut jobs = Vec::new();
    for (label, algorithm, seed) in plan.algorithm_runs() {
        for slice in &plan.slices {
            let covered = match algorithm {
                AlgorithmSpec::Sgns { .. } => true,
                AlgorithmSpec::PooledImport { streams: m, .. } | AlgorithmSpec::ExternalImport { files: m, .. } => {
                    m.contains_key(&slice.name)
                }
            };
            if covered {
                jobs.push(Job { label: label.clone(), algorithm, seed, slice, filter: slice.parsed_filter()? });
            }
        }
    }

    let results: Vec<(SpaceRecord, Vec<Cell>)> = jobs
        .par_iter()
        .map(|job| {
            let view = corpus.as_ref().map(|c| c.slice(&job.filter));
            let mut record = SpaceRecord {
                algorithm: job.label.clone(),
                slice: job.slice.name.clone(),
                seed: job.seed,
                source: String::new(),
                slice_fingerprint: view.as_ref().map(|v| v.fingerprint()),
                articles: view.as_ref().map(|v| v.len()),
                config_hash: None,
                tokens: None,
                dim: None,
                error: None,
            };
            let space = produce_space::<T>(plan, job, view.as_ref(), &cache, &mut record);
            let cells = match &space {
                Ok(space) => {
                    record.tokens = Some(space.len());
                    record.dim = Some(space.dim());
                    evaluate_measures(plan, job, view.as_ref(), space, &measures, permutations.as_ref())
                }
                Err(e) => {
                    log::warn!("{} on {}: {e}", job.label, job.slice.name);
                    record.error = Some(e.to_string());
                    measures
                        .iter()
                        .map(|m| Cell::failed(&job.label, &job.slice.name, &m.name(), m.kind(), e))
                        .collect()
                }
            };
            (record, cells)
        })
        .collect();

    let (spaces, cells): (Vec<SpaceRecord>, Vec<Vec<Cell>>) = results.into_iter().unzip();
    let provenance = Provenance {
        version: env!("CARGO_PKG_VERSION").to_owned(),
        plan_hash: plan_hash(plan)?,
        seeds: plan.seeds.clone(),
        permutations,
        slices: plan.slices.clone(),
        spaces,
    };
    ResultTable::new(cells.into_iter().flatten().collect(), provenance)
}

fn produce_space<T: Scalar>(
    plan: &ExperimentPlan,
    job: &Job<'_>,
    view: Option<&CorpusView<'_>>,
    cache: &TrainingCache,
    record: &mut SpaceRecord,
) -> Result<EmbeddingSpace<T>> {
    match job.algorithm {
        AlgorithmSpec::Sgns { config, .. } => {
            record.source = "trained".into();
            let view = view.ok_or_else(|| Error::Config("training needs a corpus".into()))?;
            let config = TrainConfig {
                seed: job.seed.unwrap_or(config.seed),
                ..config.clone()
            };
            let key = TrainingCache::key(&view.fingerprint(), &config, plan.vocab, &plan.tokenize, std::any::type_name::<T>())?;
            record.config_hash = Some(key.clone());
            match cache.load::<T>(&key) {
                Ok(Some(trained)) => {
                    log::info!("{} on {}: cached", job.label, job.slice.name);
                    return Ok(trained.space);
                }
                Ok(None) => {}
                Err(e) => log::warn!("ignoring unreadable cache entry {key}: {e}"),
            }
            let vocab = build_vocab(view, plan.vocab, &plan.tokenize)?;
            let trained = train::<T>(view, &vocab, &config, &plan.tokenize)?;
            log::info!(
                "{} on {}: trained, epoch losses {:?}",
                job.label,
                job.slice.name,
                trained.report.epoch_losses
            );
            if let Err(e) = cache.store(&key, &trained) {
                log::warn!("could not cache {key}: {e}");
            }
            Ok(trained.space)
        }
        AlgorithmSpec::PooledImport { streams, .. } => {
            let path = &streams[&job.slice.name];
            record.source = path.display().to_string();
            pool_file::<T>(path)
        }
        AlgorithmSpec::ExternalImport { files, .. } => {
            let path = &files[&job.slice.name];
            record.source = path.display().to_string();
            EmbeddingSpace::<T>::load_text(path)
        }
    }
}

fn evaluate_measures<T: Scalar>(
    plan: &ExperimentPlan,
    job: &Job<'_>,
    view: Option<&CorpusView<'_>>,
    space: &EmbeddingSpace<T>,
    measures: &[Measure],
    permutations: Option<&PermutationConfig>,
) -> Vec<Cell> {
    let (alg, slice) = (job.label.as_str(), job.slice.name.as_str());
    let mut vocab: Option<Result<Vocabulary>> = None;
    measures
        .iter()
        .map(|m| {
            let cell = match m {
                Measure::Weat(spec) => weat(spec, space, permutations).map(|r| Cell::from_weat(alg, slice, r)),
                Measure::Similarity(bench) => evaluate(space, bench).map(|r| Cell::from_similarity(alg, slice, r)),
                Measure::RareSimilarity(bench, k) => {
                    let vocab = vocab.get_or_insert_with(|| match view {
                        Some(v) => build_vocab(v, plan.vocab, &plan.tokenize),
                        None => Err(Error::Config("rare-token subsets need the corpus".into())),
                    });
                    match vocab {
                        Ok(vocab) => rare_token_subset(bench, vocab, *k)
                            .and_then(|subset| evaluate(space, &subset))
                            .map(|r| Cell::from_similarity(alg, slice, r)),
                        Err(e) => Err(Error::InvalidInput(e.to_string())),
                    }
                }
            };
            cell.unwrap_or_else(|e| Cell::failed(alg, slice, &m.name(), m.kind(), &e))
        })
        .collect()
}
