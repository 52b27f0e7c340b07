use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use biasaudit::bias::{weat, PermutationConfig, WeatTestSpec};
use biasaudit::corpus::{
    build_vocab, ingest, Corpus, ErrorMode, Orientation, SliceFilter, TokenizeConfig, VocabPolicy,
};
use biasaudit::harness::{
    emit, run, temporal_run, EmitFormat, Emittable, ExperimentPlan, TemporalPlan, OUT_DIR_ENV,
};
use biasaudit::pool::{pool_file, validate_stream};
use biasaudit::sgns::{train, TrainConfig};
use biasaudit::similarity::{evaluate, load_benchmark, rare_token_subset, BenchmarkFormat};
use biasaudit::Embeddings;

/// Measure social bias in text corpora through word embeddings.
#[derive(Parser)]
#[command(name = "biasaudit", version)]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load line-delimited article records into a corpus directory.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Abort on the first malformed record.
        #[arg(long)]
        fail_fast: bool,
    },
    /// Select articles by orientation and year.
    Slice {
        #[command(flatten)]
        slice: SliceArgs,
        /// Write one pre-tokenized sentence per line.
        #[arg(long)]
        export: Option<PathBuf>,
        /// Write the words of these WEAT specs and benchmarks, one per line,
        /// as a target list for context extraction.
        #[arg(long, requires = "targets_from")]
        targets: Option<PathBuf>,
        #[arg(long = "targets-from", num_args = 1..)]
        targets_from: Vec<String>,
    },
    /// Train skip-gram embeddings on a slice.
    Train {
        #[command(flatten)]
        slice: SliceArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Average a context vector stream into static embeddings.
    Pool {
        #[arg(long)]
        stream: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a context vector stream and report malformed records.
    ValidateStream { stream: PathBuf },
    /// Score an embedding file with a WEAT spec.
    Weat {
        #[arg(long)]
        embeddings: PathBuf,
        /// Built-in spec name (gender, ethnicity, religion) or spec file.
        #[arg(long)]
        spec: String,
        /// Permutations for the p-value; 0 skips the test.
        #[arg(long, default_value_t = 10_000)]
        permutations: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Score an embedding file on a word-similarity benchmark.
    Similarity {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        benchmark: PathBuf,
        /// tab (WordSim353 style) or csv (MEN style).
        #[arg(long, default_value = "tab")]
        format: BenchmarkFormat,
        /// Restrict to pairs touching the k least frequent tokens of a slice.
        #[arg(long, requires = "corpus")]
        rare_k: Option<usize>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, default_value = "all")]
        filter: SliceFilter,
        #[arg(long, default_value_t = 5)]
        min_count: u64,
    },
    /// Run an experiment plan and write results.json to its output directory.
    Run {
        #[arg(long)]
        plan: PathBuf,
        /// Train in double precision.
        #[arg(long)]
        f64: bool,
    },
    /// Train one model per orientation and year and fit a trend line.
    Temporal {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, num_args = 1.., default_values = ["liberal", "neutral", "conservative"])]
        orientation: Vec<Orientation>,
        #[arg(long)]
        from: i32,
        #[arg(long)]
        to: i32,
        #[arg(long, num_args = 1.., default_values = ["gender", "ethnicity", "religion"])]
        measure: Vec<String>,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long, env = OUT_DIR_ENV, default_value = "biasaudit-out")]
        out_dir: PathBuf,
    },
    /// Render saved results as csv, json or plot data.
    Emit {
        /// results.json or temporal.json.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "csv")]
        format: EmitFormat,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SliceArgs {
    /// Corpus directory or articles file.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, num_args = 1..)]
    orientation: Vec<Orientation>,
    #[arg(long, num_args = 1..)]
    year: Vec<i32>,
    /// Full filter expression, e.g. `orientation=liberal,year=2010..2015`.
    #[arg(long, conflicts_with_all = ["orientation", "year"])]
    filter: Option<SliceFilter>,
}

impl SliceArgs {
    fn filter(&self) -> SliceFilter {
        self.filter
            .clone()
            .unwrap_or_else(|| SliceFilter::new(self.orientation.iter().copied(), self.year.iter().copied()))
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value_t = 300)]
    dim: usize,
    #[arg(long, default_value_t = 5)]
    window: usize,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    /// Subsampling threshold; 0 disables subsampling.
    #[arg(long, default_value_t = 1e-5)]
    subsample: f64,
    #[arg(long, default_value_t = 0.025)]
    learning_rate: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Hogwild workers; ignored with --deterministic.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Single worker, bit-identical output for equal seeds.
    #[arg(long)]
    deterministic: bool,
    #[arg(long, default_value_t = 5, conflicts_with = "max_size")]
    min_count: u64,
    #[arg(long)]
    max_size: Option<usize>,
}

impl TrainArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            dim: self.dim,
            window: self.window,
            epochs: self.epochs,
            negatives: self.negatives,
            subsample: (self.subsample > 0.0).then_some(self.subsample),
            learning_rate: self.learning_rate,
            seed: self.seed,
            workers: self.workers,
            deterministic: self.deterministic || self.workers <= 1,
            ..TrainConfig::default()
        }
    }

    fn vocab(&self) -> VocabPolicy {
        match self.max_size {
            Some(n) => VocabPolicy::MaxSize(n),
            None => VocabPolicy::MinCount(self.min_count),
        }
    }
}

fn print_json<S: serde::Serialize>(value: &S) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn write_json<S: serde::Serialize>(path: &Path, value: &S) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn })
        .init();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(command: Command) -> anyhow::Result<ExitCode> {
    let tokenize = TokenizeConfig::default();
    match command {
        Command::Ingest { input, out, fail_fast } => {
            let mode = if fail_fast { ErrorMode::FailFast } else { ErrorMode::SkipAndReport };
            let (corpus, report) = ingest(&input, mode)?;
            corpus.save_dir(&out, Some(&report))?;
            print_json(&report)?;
        }
        Command::Slice { slice, export, targets, targets_from } => {
            let corpus = Corpus::open(&slice.corpus)?;
            let view = corpus.slice(&slice.filter());
            let mut summary = serde_json::json!({
                "filter": view.filter().to_string(),
                "articles": view.len(),
                "fingerprint": view.fingerprint(),
            });
            if let Some(path) = export {
                summary["sentences"] = view.export_sentences(&path, &tokenize)?.into();
            }
            if let Some(path) = targets {
                let words = target_words(&targets_from)?;
                let mut text = words.iter().cloned().collect::<Vec<_>>().join("\n");
                text.push('\n');
                fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
                summary["targets"] = words.len().into();
            }
            print_json(&summary)?;
        }
        Command::Train { slice, train: args, out } => {
            let corpus = Corpus::open(&slice.corpus)?;
            let view = corpus.slice(&slice.filter());
            let vocab = build_vocab(&view, args.vocab(), &tokenize)?;
            let trained = train::<f32>(&view, &vocab, &args.config(), &tokenize)?;
            trained.space.save_text(&out)?;
            let report_path = out.with_extension("report.json");
            write_json(&report_path, &trained.report)?;
            print_json(&serde_json::json!({
                "embeddings": out,
                "tokens": trained.space.len(),
                "dim": trained.space.dim(),
                "epoch_losses": trained.report.epoch_losses,
            }))?;
        }
        Command::Pool { stream, out } => {
            let space = pool_file::<f32>(&stream)?;
            space.save_text(&out)?;
            print_json(&serde_json::json!({
                "embeddings": out,
                "tokens": space.len(),
                "dim": space.dim(),
                "model": space.metadata().source,
            }))?;
        }
        Command::ValidateStream { stream } => {
            let report = validate_stream(&stream)?;
            print_json(&report)?;
            if !report.is_valid() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Weat { embeddings, spec, permutations, seed } => {
            let space = Embeddings::load_text(&embeddings)?;
            let spec = WeatTestSpec::resolve(&spec)?;
            let cfg = (permutations > 0).then(|| PermutationConfig { permutations, seed, ..Default::default() });
            print_json(&weat(&spec, &space, cfg.as_ref())?)?;
        }
        Command::Similarity { embeddings, benchmark, format, rare_k, corpus, filter, min_count } => {
            let space = Embeddings::load_text(&embeddings)?;
            let mut bench = load_benchmark(&benchmark, format)?;
            if let (Some(k), Some(corpus)) = (rare_k, corpus) {
                let corpus = Corpus::open(&corpus)?;
                let vocab = build_vocab(&corpus.slice(&filter), VocabPolicy::MinCount(min_count), &tokenize)?;
                bench = rare_token_subset(&bench, &vocab, k)?;
            }
            print_json(&evaluate(&space, &bench)?)?;
        }
        Command::Run { plan, f64 } => {
            let plan = ExperimentPlan::load(&plan)?;
            let table = if f64 { run::<f64>(&plan)? } else { run::<f32>(&plan)? };
            let path = plan.output_dir.join("results.json");
            emit(&Emittable::Table(table.clone()), EmitFormat::Json, &path)?;
            let failed = table.cells.iter().filter(|c| c.error.is_some()).count();
            print_json(&serde_json::json!({
                "results": path,
                "cells": table.cells.len(),
                "failed_cells": failed,
                "deltas": table.deltas.len(),
                "variances": table.variances.len(),
            }))?;
        }
        Command::Temporal { corpus, orientation, from, to, measure, train: args, out_dir } => {
            let corpus = Corpus::open(&corpus)?;
            let measures = measure
                .iter()
                .map(|m| WeatTestSpec::resolve(m))
                .collect::<biasaudit::Result<Vec<_>>>()?;
            let plan = TemporalPlan {
                orientations: orientation,
                from,
                to,
                config: args.config(),
                vocab: args.vocab(),
                tokenize,
                measures,
            };
            let result = temporal_run::<f32>(&corpus, &plan)?;
            let path = out_dir.join("temporal.json");
            emit(&Emittable::Temporal(result.clone()), EmitFormat::Json, &path)?;
            print_json(&serde_json::json!({
                "results": path,
                "series": result.series.len(),
                "dated_articles": result.accounting.dated,
                "undated_excluded": result.accounting.undated,
            }))?;
        }
        Command::Emit { input, format, out } => {
            let item = Emittable::load(&input)?;
            match out {
                Some(path) => emit(&item, format, &path)?,
                None => std::io::stdout().lock().write_all(item.render(format)?.as_bytes())?,
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Words of WEAT specs (names or files) and benchmark files (by extension:
/// `.csv` is MEN style, anything else tab-separated).
fn target_words(sources: &[String]) -> anyhow::Result<BTreeSet<String>> {
    let mut words = BTreeSet::new();
    for source in sources {
        let path = Path::new(source);
        let is_spec = WeatTestSpec::builtin(source).is_some()
            || path.extension().is_some_and(|e| e == "json");
        if is_spec {
            words.extend(WeatTestSpec::resolve(source)?.words().map(str::to_owned));
        } else if path.exists() {
            let format = if path.extension().is_some_and(|e| e == "csv") {
                BenchmarkFormat::Csv
            } else {
                BenchmarkFormat::TabSeparated
            };
            for p in load_benchmark(path, format)?.pairs {
                words.insert(p.word1);
                words.insert(p.word2);
            }
        } else {
            bail!("{source} is neither a built-in spec nor an existing file");
        }
    }
    Ok(words)
}
