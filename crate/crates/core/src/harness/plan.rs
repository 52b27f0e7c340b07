use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bias::{PermutationConfig, WeatTestSpec};
use crate::corpus::{SliceFilter, TokenizeConfig, VocabPolicy};
use crate::error::{Error, Result};
use crate::sgns::TrainConfig;
use crate::similarity::BenchmarkFormat;

/// Environment variable that replaces the plan's output directory.
pub const OUT_DIR_ENV: &str = "BIASAUDIT_OUT_DIR";

/// A named corpus slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSpec {
    pub name: String,
    /// Filter in [`SliceFilter`] syntax, e.g. `orientation=liberal,year=2015`.
    #[serde(default = "all_filter")]
    pub filter: String,
}

fn all_filter() -> String {
    "all".into()
}

impl SliceSpec {
    pub fn new(name: impl Into<String>, filter: &SliceFilter) -> Self {
        Self {
            name: name.into(),
            filter: filter.to_string(),
        }
    }

    pub fn parsed_filter(&self) -> Result<SliceFilter> {
        self.filter.parse()
    }
}

/// How an algorithm obtains the embedding space of a slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AlgorithmSpec {
    /// Train skip-gram embeddings on the slice, once per plan seed.
    Sgns {
        name: String,
        #[serde(default)]
        config: TrainConfig,
    },
    /// Pool a context vector stream per slice.
    PooledImport {
        name: String,
        streams: BTreeMap<String, PathBuf>,
    },
    /// Load a text-format embedding file per slice.
    ExternalImport {
        name: String,
        files: BTreeMap<String, PathBuf>,
    },
}

impl AlgorithmSpec {
    pub fn name(&self) -> &str {
        match self {
            AlgorithmSpec::Sgns { name, .. }
            | AlgorithmSpec::PooledImport { name, .. }
            | AlgorithmSpec::ExternalImport { name, .. } => name,
        }
    }

    fn imports(&self) -> Option<&BTreeMap<String, PathBuf>> {
        match self {
            AlgorithmSpec::Sgns { .. } => None,
            AlgorithmSpec::PooledImport { streams, .. } => Some(streams),
            AlgorithmSpec::ExternalImport { files, .. } => Some(files),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub path: PathBuf,
    pub format: BenchmarkFormat,
    /// Also evaluate the pairs touching the `k` least frequent slice tokens.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rare_k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSet {
    /// Built-in spec names or paths to spec files.
    #[serde(default)]
    pub weat: Vec<String>,
    #[serde(default)]
    pub benchmarks: Vec<BenchmarkSpec>,
    /// Permutations for WEAT p-values; 0 skips the test.
    #[serde(default = "default_permutations")]
    pub permutations: usize,
}

fn default_permutations() -> usize {
    PermutationConfig::default().permutations
}

/// The experiment grid: algorithms × slices × measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    /// Corpus directory or articles file. Required by `sgns` algorithms and
    /// rare-token benchmarks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub slices: Vec<SliceSpec>,
    pub algorithms: Vec<AlgorithmSpec>,
    pub measures: MeasureSet,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub vocab: VocabPolicy,
    #[serde(default)]
    pub tokenize: TokenizeConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("biasaudit-out")
}

fn default_seeds() -> Vec<u64> {
    vec![42]
}

impl ExperimentPlan {
    /// Parse TOML. Relative paths are kept as written.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Read a plan file, resolve relative paths against its directory and
    /// apply the output directory override from [`OUT_DIR_ENV`].
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut plan = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        plan.resolve_paths(base);
        if let Some(dir) = std::env::var_os(OUT_DIR_ENV) {
            plan.output_dir = PathBuf::from(dir);
        }
        Ok(plan)
    }

    /// Make every relative path relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(c) = self.corpus.as_mut() {
            fix(c);
        }
        fix(&mut self.output_dir);
        for alg in &mut self.algorithms {
            match alg {
                AlgorithmSpec::Sgns { .. } => {}
                AlgorithmSpec::PooledImport { streams: m, .. } | AlgorithmSpec::ExternalImport { files: m, .. } => {
                    m.values_mut().for_each(fix);
                }
            }
        }
        for b in &mut self.measures.benchmarks {
            fix(&mut b.path);
        }
        for w in &mut self.measures.weat {
            if WeatTestSpec::builtin(w).is_none() && Path::new(w).is_relative() {
                *w = base.join(&*w).to_string_lossy().into_owned();
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.slices.is_empty() {
            return bad("plan has no slices".into());
        }
        if self.algorithms.is_empty() {
            return bad("plan has no algorithms".into());
        }
        if self.measures.weat.is_empty() && self.measures.benchmarks.is_empty() {
            return bad("plan has no measures".into());
        }
        if self.seeds.is_empty() {
            return bad("plan has no seeds".into());
        }
        let mut slice_names = BTreeSet::new();
        for s in &self.slices {
            s.parsed_filter()?;
            if !slice_names.insert(s.name.as_str()) {
                return bad(format!("duplicate slice name {:?}", s.name));
            }
        }
        let mut alg_names = BTreeSet::new();
        for alg in &self.algorithms {
            if !alg_names.insert(alg.name()) {
                return bad(format!("duplicate algorithm name {:?}", alg.name()));
            }
            match alg {
                AlgorithmSpec::Sgns { config, .. } => {
                    config.validate()?;
                    if self.corpus.is_none() {
                        return bad(format!("algorithm {:?} trains on the corpus, but none is given", alg.name()));
                    }
                }
                _ => {
                    for (slice, path) in alg.imports().expect("import algorithm") {
                        if !slice_names.contains(slice.as_str()) {
                            return bad(format!("algorithm {:?} imports for unknown slice {slice:?}", alg.name()));
                        }
                        if !path.exists() {
                            return bad(format!("algorithm {:?}: {} does not exist", alg.name(), path.display()));
                        }
                    }
                }
            }
        }
        if let Some(c) = &self.corpus {
            if !c.exists() {
                return bad(format!("corpus {} does not exist", c.display()));
            }
        }
        for b in &self.measures.benchmarks {
            if !b.path.exists() {
                return bad(format!("benchmark {} does not exist", b.path.display()));
            }
            if b.rare_k == Some(0) {
                return bad("rare_k must be positive".into());
            }
        }
        for w in &self.measures.weat {
            WeatTestSpec::resolve(w)?;
        }
        Ok(())
    }

    /// Algorithm labels paired with the seed each one trains with. Imports
    /// carry no seed; `sgns` algorithms get one label per seed, suffixed when
    /// there are several.
    pub fn algorithm_runs(&self) -> Vec<(String, &AlgorithmSpec, Option<u64>)> {
        let mut runs = Vec::new();
        for alg in &self.algorithms {
            match alg {
                AlgorithmSpec::Sgns { name, .. } if self.seeds.len() > 1 => {
                    for &seed in &self.seeds {
                        runs.push((format!("{name}-s{seed}"), alg, Some(seed)));
                    }
                }
                AlgorithmSpec::Sgns { name, .. } => runs.push((name.clone(), alg, Some(self.seeds[0]))),
                _ => runs.push((alg.name().to_owned(), alg, None)),
            }
        }
        runs
    }
}
