use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::sampling::{subsample_keep_prob, NegativeTable};
use crate::corpus::{CorpusView, TokenizeConfig, Vocabulary};
use crate::embedding::{EmbeddingSpace, SpaceMetadata};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `ln(1 + e^x)` without overflow.
fn softplus<T: Scalar>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Negative-sampling loss of one positive pair:
/// `-ln σ(u·v⁺) - Σ ln σ(-u·v⁻)`.
pub fn negative_sampling_loss<T: Scalar>(input: &[T], positive: &[T], negatives: &[&[T]]) -> T {
    let mut loss = softplus(-dot(input, positive));
    for n in negatives {
        loss += softplus(dot(input, n));
    }
    loss
}

/// Analytic gradients of [`negative_sampling_loss`].
#[derive(Debug, Clone, PartialEq)]
pub struct PairGradients<T> {
    pub loss: T,
    pub input: Vec<T>,
    pub positive: Vec<T>,
    pub negatives: Vec<Vec<T>>,
}

pub fn negative_sampling_gradients<T: Scalar>(
    input: &[T],
    positive: &[T],
    negatives: &[&[T]],
) -> PairGradients<T> {
    let g_pos = sigmoid(dot(input, positive)) - T::one();
    let mut grad_input: Vec<T> = positive.iter().map(|&v| g_pos * v).collect();
    let grad_positive = input.iter().map(|&u| g_pos * u).collect();
    let mut grad_negatives = Vec::with_capacity(negatives.len());
    for n in negatives {
        let g = sigmoid(dot(input, n));
        for (gi, &v) in grad_input.iter_mut().zip(n.iter()) {
            *gi += g * v;
        }
        grad_negatives.push(input.iter().map(|&u| g * u).collect());
    }
    PairGradients {
        loss: negative_sampling_loss(input, positive, negatives),
        input: grad_input,
        positive: grad_positive,
        negatives: grad_negatives,
    }
}

/// One SGD step on `(center, (output, label)…)`. Output rows are updated in
/// place; the input update is accumulated in `delta` and applied at the end.
/// Returns the loss before the update.
fn sgd_step<T: Scalar>(
    input: &mut [T],
    outputs: &mut [T],
    dim: usize,
    targets: &[(usize, bool)],
    lr: T,
    delta: &mut [T],
) -> T {
    delta.iter_mut().for_each(|d| *d = T::zero());
    let mut loss = T::zero();
    for &(id, label) in targets {
        let out = &mut outputs[id * dim..(id + 1) * dim];
        let score = dot(input, out);
        loss += if label { softplus(-score) } else { softplus(score) };
        let target = if label { T::one() } else { T::zero() };
        // Negative derivative of the loss with respect to the score.
        let g = (target - sigmoid(score)) * lr;
        for ((d, o), &u) in delta.iter_mut().zip(out.iter_mut()).zip(input.iter()) {
            *d += g * *o;
            *o += g * u;
        }
    }
    for (u, &d) in input.iter_mut().zip(delta.iter()) {
        *u += d;
    }
    loss
}

/// Measurements collected while training.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean loss per pair on a fixed evaluation sample, measured at the end
    /// of each epoch.
    pub epoch_losses: Vec<f64>,
    /// Mean loss per pair as seen by the updates during each epoch; 0 for an
    /// epoch without pairs.
    pub training_losses: Vec<f64>,
    pub pairs_per_epoch: Vec<u64>,
    pub workers: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Trained<T> {
    pub space: EmbeddingSpace<T>,
    pub report: TrainReport,
}

/// Row-major parameter matrix shared by Hogwild workers.
struct SharedMatrix<T> {
    ptr: *mut T,
    len: usize,
}

// SAFETY: workers write rows without synchronization. Lost or interleaved
// updates are tolerated by asynchronous SGD; the buffer outlives every worker.
unsafe impl<T: Send> Send for SharedMatrix<T> {}
unsafe impl<T: Send> Sync for SharedMatrix<T> {}

impl<T> SharedMatrix<T> {
    fn new(data: &mut [T]) -> Self {
        Self {
            ptr: data.as_mut_ptr(),
            len: data.len(),
        }
    }

    /// # Safety
    /// The backing buffer must outlive the returned slice.
    #[allow(clippy::mut_from_ref)]
    unsafe fn slice(&self) -> &mut [T] {
        std::slice::from_raw_parts_mut(self.ptr, self.len)
    }
}

/// Train skip-gram embeddings over the tokenized sentences of `view`.
pub fn train<T: Scalar>(
    view: &CorpusView<'_>,
    vocab: &Vocabulary,
    config: &TrainConfig,
    tokenize: &TokenizeConfig,
) -> Result<Trained<T>> {
    let sentences: Vec<Vec<usize>> = view
        .sentences(tokenize)
        .into_iter()
        .map(|s| s.iter().map(|t| vocab.id_or_unk(t)).collect())
        .collect();
    let source = format!("view {} ({} articles)", view.filter(), view.len());
    train_ids(&sentences, vocab, config, &source)
}

/// Train on sentences already mapped to vocabulary ids.
pub fn train_ids<T: Scalar>(
    sentences: &[Vec<usize>],
    vocab: &Vocabulary,
    config: &TrainConfig,
    source: &str,
) -> Result<Trained<T>> {
    config.validate()?;
    let dim = config.dim;
    let trainable = |id: usize| config.include_unk || id != Vocabulary::UNK_ID;
    let sentences: Vec<Vec<usize>> = sentences
        .iter()
        .map(|s| s.iter().copied().filter(|&id| trainable(id)).collect::<Vec<_>>())
        .filter(|s: &Vec<usize>| s.len() >= 2)
        .collect();
    if sentences.is_empty() {
        return Err(Error::InvalidInput(
            "no sentence has two trainable tokens; the view is too small to fill a window".into(),
        ));
    }
    if let Some(&bad) = sentences.iter().flatten().find(|&&id| id >= vocab.len()) {
        return Err(Error::InvalidInput(format!("token id {bad} is outside the vocabulary")));
    }
    let table = NegativeTable::new(vocab, config.include_unk)?;

    let total = vocab.total().max(1) as f64;
    let keep_probs: Vec<f64> = match config.subsample {
        Some(t) => vocab
            .counts()
            .iter()
            .map(|&c| {
                if c == 0 {
                    1.0
                } else {
                    subsample_keep_prob(c as f64 / total, t).unwrap_or(1.0)
                }
            })
            .collect(),
        None => vec![1.0; vocab.len()],
    };

    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    init_rng.set_stream(u64::MAX);
    let half = 0.5 / dim as f64;
    let mut input: Vec<T> = (0..vocab.len() * dim)
        .map(|_| T::of(init_rng.random_range(-half..half)))
        .collect();
    let mut output: Vec<T> = vec![T::zero(); vocab.len() * dim];

    let workers = config.effective_workers().min(sentences.len());
    let words_per_epoch: u64 = sentences.iter().map(|s| s.len() as u64).sum();
    let schedule = Schedule {
        lr0: config.learning_rate,
        min_lr: config.min_learning_rate,
        total_words: words_per_epoch * config.epochs as u64,
        processed: AtomicU64::new(0),
    };

    let eval_pairs = evaluation_sample(&sentences, config, &table);
    let chunk = sentences.len().div_ceil(workers);
    let shards: Vec<&[Vec<usize>]> = sentences.chunks(chunk).collect();
    let mut rngs: Vec<ChaCha8Rng> = (0..shards.len()).map(|w| worker_rng(config.seed, w as u64)).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut training_losses = Vec::with_capacity(config.epochs);
    let mut pairs_per_epoch = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let per_worker: Vec<(f64, u64)> = if shards.len() == 1 {
            vec![run_epoch(
                shards[0], &mut input, &mut output, dim, config, &keep_probs, &table, &schedule,
                &mut rngs[0],
            )]
        } else {
            let input_shared = SharedMatrix::new(&mut input);
            let output_shared = SharedMatrix::new(&mut output);
            std::thread::scope(|scope| {
                let handles: Vec<_> = shards
                    .iter()
                    .zip(rngs.iter_mut())
                    .map(|(shard, rng)| {
                        let (input_shared, output_shared) = (&input_shared, &output_shared);
                        let (keep_probs, table, schedule) = (&keep_probs, &table, &schedule);
                        scope.spawn(move || {
                            // SAFETY: `input` and `output` outlive the scope.
                            let (inp, out) = unsafe { (input_shared.slice(), output_shared.slice()) };
                            run_epoch(shard, inp, out, dim, config, keep_probs, table, schedule, rng)
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("training worker panicked"))
                    .collect()
            })
        };
        let (loss, pairs) = per_worker
            .iter()
            .fold((0.0, 0u64), |(l, p), &(wl, wp)| (l + wl, p + wp));
        training_losses.push(if pairs == 0 { 0.0 } else { loss / pairs as f64 });
        pairs_per_epoch.push(pairs);
        epoch_losses.push(evaluation_loss(&eval_pairs, &input, &output, dim));
    }

    let first = if config.include_unk { 0 } else { 1 };
    let tokens: Vec<String> = vocab.tokens()[first..].to_vec();
    let data = input.split_off(first * dim);
    let space = EmbeddingSpace::new(tokens, data, dim, SpaceMetadata::new("sgns", source))?;
    Ok(Trained {
        space,
        report: TrainReport {
            epoch_losses,
            training_losses,
            pairs_per_epoch,
            workers,
            seed: config.seed,
        },
    })
}

fn worker_rng(seed: u64, worker: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(worker);
    rng
}

struct Schedule {
    lr0: f64,
    min_lr: f64,
    total_words: u64,
    processed: AtomicU64,
}

impl Schedule {
    fn advance(&self, words: u64) -> f64 {
        let done = self.processed.fetch_add(words, Ordering::Relaxed);
        let progress = done as f64 / self.total_words.max(1) as f64;
        (self.lr0 * (1.0 - progress)).max(self.min_lr)
    }
}

/// Upper bound on the number of pairs in the evaluation sample.
const EVAL_PAIRS: usize = 20_000;

/// One evaluation pair: center, context, and its fixed negatives.
struct EvalPair {
    center: usize,
    context: usize,
    negatives: Vec<usize>,
}

/// Pairs drawn once, before training, with a stream reserved for evaluation,
/// so that epoch losses differ only through the parameters.
fn evaluation_sample(sentences: &[Vec<usize>], config: &TrainConfig, table: &NegativeTable) -> Vec<EvalPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(u64::MAX - 1);
    let total: usize = sentences.iter().map(|s| s.len()).sum();
    (0..EVAL_PAIRS.min(total))
        .map(|_| {
            let sentence = &sentences[rng.random_range(0..sentences.len())];
            let pos = rng.random_range(0..sentence.len());
            let lo = pos.saturating_sub(config.window);
            let hi = (pos + config.window).min(sentence.len() - 1);
            let mut c = rng.random_range(lo..hi);
            if c >= pos {
                c += 1;
            }
            let context = sentence[c];
            let negatives = (0..config.negatives)
                .map(|_| table.sample(&mut rng))
                .filter(|&n| n != context)
                .collect();
            EvalPair { center: sentence[pos], context, negatives }
        })
        .collect()
}

fn evaluation_loss<T: Scalar>(pairs: &[EvalPair], input: &[T], output: &[T], dim: usize) -> f64 {
    if pairs.is_empty() {
        return f64::NAN;
    }
    let row = |m: &'_ [T], id: usize| -> Vec<T> { m[id * dim..(id + 1) * dim].to_vec() };
    let total: f64 = pairs
        .iter()
        .map(|p| {
            let negatives: Vec<Vec<T>> = p.negatives.iter().map(|&n| row(output, n)).collect();
            let refs: Vec<&[T]> = negatives.iter().map(|v| v.as_slice()).collect();
            negative_sampling_loss(&row(input, p.center), &row(output, p.context), &refs).as_f64()
        })
        .sum();
    total / pairs.len() as f64
}

#[allow(clippy::too_many_arguments)]
fn run_epoch<T: Scalar>(
    sentences: &[Vec<usize>],
    input: &mut [T],
    output: &mut [T],
    dim: usize,
    config: &TrainConfig,
    keep_probs: &[f64],
    table: &NegativeTable,
    schedule: &Schedule,
    rng: &mut ChaCha8Rng,
) -> (f64, u64) {
    let mut loss_sum = 0.0;
    let mut pairs = 0u64;
    let mut kept = Vec::new();
    let mut targets = Vec::with_capacity(config.negatives + 1);
    let mut delta = vec![T::zero(); dim];
    for sentence in sentences {
        let lr = T::of(schedule.advance(sentence.len() as u64));
        kept.clear();
        kept.extend(sentence.iter().copied().filter(|&id| {
            let p = keep_probs[id];
            p >= 1.0 || rng.random::<f64>() < p
        }));
        if kept.len() < 2 {
            continue;
        }
        for pos in 0..kept.len() {
            let span = if config.shrink_window {
                rng.random_range(1..=config.window)
            } else {
                config.window
            };
            let center = kept[pos];
            let lo = pos.saturating_sub(span);
            let hi = (pos + span).min(kept.len() - 1);
            for (c, &context) in kept.iter().enumerate().take(hi + 1).skip(lo) {
                if c == pos {
                    continue;
                }
                targets.clear();
                targets.push((context, true));
                for _ in 0..config.negatives {
                    let neg = table.sample(rng);
                    if neg != context {
                        targets.push((neg, false));
                    }
                }
                let row = &mut input[center * dim..(center + 1) * dim];
                loss_sum += sgd_step(row, output, dim, &targets, lr, &mut delta).as_f64();
                pairs += 1;
            }
        }
    }
    (loss_sum, pairs)
}
