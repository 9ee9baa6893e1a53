//! Skip-gram with negative sampling.
//!
//! The trainer follows the classic word2vec recipe: frequency floor,
//! frequent-word subsampling, a unigram^0.75 noise distribution, a randomly
//! shrunk context window and a linearly decaying learning rate. With more
//! than one worker the parameter matrices are updated without locks
//! (Hogwild-style); only single-worker runs are reproducible.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::dot;
use crate::space::{EmbeddingSpace, SpaceError};
use crate::text::TokenizedCorpus;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("no token occurs at least min_count={min_count} times")]
    EmptyVocabulary { min_count: u64 },
    #[error(transparent)]
    Space(#[from] SpaceError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub min_count: u64,
    pub epochs: usize,
    pub initial_lr: f64,
    pub subsample_t: f64,
    pub seed: u64,
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 100,
            window: 5,
            negatives: 5,
            min_count: 5,
            epochs: 5,
            initial_lr: 0.025,
            subsample_t: 1e-3,
            seed: 1,
            workers: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.dim < 1 {
            return bad("dim must be >= 1");
        }
        if self.window < 1 {
            return bad("window must be >= 1");
        }
        if self.negatives < 1 {
            return bad("negatives must be >= 1");
        }
        if self.min_count < 1 {
            return bad("min_count must be >= 1");
        }
        if self.epochs < 1 {
            return bad("epochs must be >= 1");
        }
        if !(self.initial_lr > 0.0) {
            return bad("initial_lr must be > 0");
        }
        if !(self.subsample_t >= 0.0) {
            return bad("subsample_t must be >= 0");
        }
        if self.workers < 1 {
            return bad("workers must be >= 1");
        }
        Ok(())
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One logistic update between an input (context) vector and an output
/// vector with the given label (1 for the observed word, 0 for noise).
///
/// The output row is updated in place; the input's gradient step is
/// accumulated into `input_step` so that all outputs of one example see the
/// same input vector. Returns the logistic loss of this term before the
/// update. Equivalent to a plain SGD step `-lr * grad` of
/// `-log σ(±input·output)`.
pub fn negative_sampling_step(
    input: &[f64],
    output: &mut [f64],
    label: f64,
    lr: f64,
    input_step: &mut [f64],
) -> f64 {
    let score = dot(input, output);
    let f = sigmoid(score);
    let g = (label - f) * lr;
    for k in 0..input.len() {
        input_step[k] += g * output[k];
        output[k] += g * input[k];
    }
    if label > 0.5 {
        -f.ln()
    } else {
        -(1.0 - f).ln()
    }
}

/// Row-major matrix of f64 stored as relaxed atomics, shared by workers.
struct SharedMatrix {
    dim: usize,
    cells: Vec<AtomicU64>,
}

impl SharedMatrix {
    fn new(rows: usize, dim: usize, init: impl FnMut() -> f64) -> Self {
        let mut init = init;
        SharedMatrix {
            dim,
            cells: (0..rows * dim)
                .map(|_| AtomicU64::new(init().to_bits()))
                .collect(),
        }
    }

    fn load(&self, row: usize, out: &mut [f64]) {
        let base = row * self.dim;
        for (k, o) in out.iter_mut().enumerate() {
            *o = f64::from_bits(self.cells[base + k].load(Ordering::Relaxed));
        }
    }

    fn store(&self, row: usize, values: &[f64]) {
        let base = row * self.dim;
        for (k, v) in values.iter().enumerate() {
            self.cells[base + k].store(v.to_bits(), Ordering::Relaxed);
        }
    }

    fn into_vec(self) -> Vec<f64> {
        self.cells
            .into_iter()
            .map(|c| f64::from_bits(c.into_inner()))
            .collect()
    }
}

/// Vocabulary sorted by descending count, ties broken lexicographically.
struct Vocab {
    words: Vec<String>,
    counts: Vec<u64>,
    ids: HashMap<String, u32>,
}

impl Vocab {
    fn build(corpus: &TokenizedCorpus, min_count: u64) -> Self {
        let mut entries: Vec<(&String, u64)> = corpus
            .token_counts()
            .iter()
            .filter(|(_, &c)| c >= min_count)
            .map(|(w, &c)| (w, c))
            .collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let words: Vec<String> = entries.iter().map(|(w, _)| (*w).clone()).collect();
        let counts = entries.iter().map(|(_, c)| *c).collect();
        let ids = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        Vocab { words, counts, ids }
    }
}

struct Trainer<'a> {
    config: &'a TrainConfig,
    input: SharedMatrix,
    output: SharedMatrix,
    keep_prob: Vec<f64>,
    noise: WeightedIndex<f64>,
    processed: AtomicU64,
    total_steps: u64,
}

impl Trainer<'_> {
    fn learning_rate(&self) -> f64 {
        let done = self.processed.load(Ordering::Relaxed) as f64;
        let frac = 1.0 - done / (self.total_steps as f64 + 1.0);
        self.config.initial_lr * frac.max(1e-4)
    }

    fn run_shard(&self, sentences: &[Vec<u32>], worker: usize) {
        let dim = self.config.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(
            self.config
                .seed
                .wrapping_add(0x9e37_79b9_7f4a_7c15_u64.wrapping_mul(worker as u64 + 1)),
        );
        let mut in_buf = vec![0.0; dim];
        let mut out_buf = vec![0.0; dim];
        let mut step = vec![0.0; dim];
        let mut kept: Vec<u32> = Vec::new();

        for _ in 0..self.config.epochs {
            for sentence in sentences {
                kept.clear();
                for &w in sentence {
                    let p = self.keep_prob[w as usize];
                    if p >= 1.0 || rng.random::<f64>() < p {
                        kept.push(w);
                    }
                }
                self.processed
                    .fetch_add(sentence.len() as u64, Ordering::Relaxed);
                let lr = self.learning_rate();

                for (pos, &center) in kept.iter().enumerate() {
                    let reach = rng.random_range(1..=self.config.window);
                    let lo = pos.saturating_sub(reach);
                    let hi = (pos + reach).min(kept.len() - 1);
                    for (c, &context) in kept.iter().enumerate().take(hi + 1).skip(lo) {
                        if c == pos {
                            continue;
                        }
                        self.input.load(context as usize, &mut in_buf);
                        step.iter_mut().for_each(|x| *x = 0.0);

                        self.output.load(center as usize, &mut out_buf);
                        negative_sampling_step(&in_buf, &mut out_buf, 1.0, lr, &mut step);
                        self.output.store(center as usize, &out_buf);

                        for _ in 0..self.config.negatives {
                            let neg = self.noise.sample(&mut rng) as u32;
                            if neg == center {
                                continue;
                            }
                            self.output.load(neg as usize, &mut out_buf);
                            negative_sampling_step(&in_buf, &mut out_buf, 0.0, lr, &mut step);
                            self.output.store(neg as usize, &out_buf);
                        }

                        for (x, s) in in_buf.iter_mut().zip(&step) {
                            *x += s;
                        }
                        self.input.store(context as usize, &in_buf);
                    }
                }
            }
        }
    }
}

/// Trains an (unnormalized) embedding space over every token with
/// `count >= min_count`.
pub fn train(corpus: &TokenizedCorpus, config: &TrainConfig) -> Result<EmbeddingSpace, TrainError> {
    config.validate()?;
    if corpus.total_tokens() == 0 {
        return Err(TrainError::EmptyCorpus);
    }
    let vocab = Vocab::build(corpus, config.min_count);
    if vocab.words.is_empty() {
        return Err(TrainError::EmptyVocabulary {
            min_count: config.min_count,
        });
    }

    let sentences: Vec<Vec<u32>> = corpus
        .documents()
        .iter()
        .map(|d| d.iter().filter_map(|t| vocab.ids.get(t).copied()).collect())
        .filter(|s: &Vec<u32>| !s.is_empty())
        .collect();
    let train_words: u64 = vocab.counts.iter().sum();

    let keep_prob = vocab
        .counts
        .iter()
        .map(|&c| {
            if config.subsample_t <= 0.0 {
                return 1.0;
            }
            let threshold = config.subsample_t * train_words as f64;
            let c = c as f64;
            ((c / threshold).sqrt() + 1.0) * threshold / c
        })
        .collect();
    let noise = WeightedIndex::new(vocab.counts.iter().map(|&c| (c as f64).powf(0.75)))
        .expect("vocabulary counts are positive");

    let dim = config.dim;
    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let input = SharedMatrix::new(vocab.words.len(), dim, || {
        (init_rng.random::<f64>() - 0.5) / dim as f64
    });
    let output = SharedMatrix::new(vocab.words.len(), dim, || 0.0);

    let trainer = Trainer {
        config,
        input,
        output,
        keep_prob,
        noise,
        processed: AtomicU64::new(0),
        total_steps: config.epochs as u64 * train_words,
    };

    if config.workers == 1 {
        trainer.run_shard(&sentences, 0);
    } else {
        let chunk = sentences.len().div_ceil(config.workers).max(1);
        std::thread::scope(|scope| {
            for (w, shard) in sentences.chunks(chunk).enumerate() {
                let trainer = &trainer;
                scope.spawn(move || trainer.run_shard(shard, w));
            }
        });
    }

    let data = trainer.input.into_vec();
    let space = EmbeddingSpace::new(corpus.language().to_string(), vocab.words, dim, data)?;
    Ok(space)
}

/// L2-normalizes every row of a trained space.
pub fn normalize(space: &EmbeddingSpace) -> Result<EmbeddingSpace, SpaceError> {
    space.normalize()
}
