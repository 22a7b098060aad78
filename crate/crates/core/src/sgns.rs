//! Skip-gram with negative sampling.
//!
//! Each (center, context) slot is trained as one positive logistic example
//! plus `K` negatives drawn from the unigram distribution raised to `3/4`.

use std::borrow::Cow;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::distributions::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::WeightedAliasIndex;

use crate::cooccur::Boundary;
use crate::corpus::{TokenSequence, Vocabulary, WordId};
use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::softmax::dot;

/// Redraws allowed when a negative collides with the positive word.
pub const MAX_COLLISION_RETRIES: usize = 8;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(sigmoid(x)) = -softplus(-x)`, finite for any finite `x`.
pub fn log_sigmoid(x: f64) -> f64 {
    -((-x).max(0.0) + (-x.abs()).exp().ln_1p())
}

/// Noise distribution `P(w) = U(w)^power / Z` with an alias table for O(1)
/// draws.
#[derive(Debug, Clone)]
pub struct NoiseDistribution {
    probabilities: Vec<f64>,
    power: f64,
    alias: WeightedAliasIndex<f64>,
}

impl NoiseDistribution {
    pub fn new(counts: &[u64], power: f64) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidParameter("noise distribution needs a non-empty vocabulary".into()));
        }
        if !power.is_finite() || power < 0.0 {
            return Err(Error::InvalidParameter(format!("bad noise power {power}")));
        }
        let weights: Vec<f64> = counts.iter().map(|&n| (n as f64).powf(power)).collect();
        let z: f64 = weights.iter().sum();
        if !(z > 0.0) {
            return Err(Error::InvalidParameter("all noise weights are zero".into()));
        }
        let probabilities: Vec<f64> = weights.iter().map(|w| w / z).collect();
        let alias = WeightedAliasIndex::new(probabilities.clone())
            .map_err(|e| Error::InvalidParameter(format!("alias table: {e}")))?;
        Ok(NoiseDistribution {
            probabilities,
            power,
            alias,
        })
    }

    pub fn from_vocab(vocab: &Vocabulary, power: f64) -> Result<Self> {
        Self::new(vocab.counts(), power)
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> WordId {
        self.alias.sample(rng)
    }

    /// `k` i.i.d. draws. A draw equal to `avoid` is redrawn up to
    /// [`MAX_COLLISION_RETRIES`] times, then kept.
    pub fn sample_negatives<R: Rng + ?Sized>(&self, k: usize, avoid: Option<WordId>, rng: &mut R) -> Vec<WordId> {
        let mut out = Vec::with_capacity(k);
        self.fill_negatives(&mut out, k, avoid, rng);
        out
    }

    fn fill_negatives<R: Rng + ?Sized>(&self, out: &mut Vec<WordId>, k: usize, avoid: Option<WordId>, rng: &mut R) {
        out.clear();
        for _ in 0..k {
            let mut w = self.sample(rng);
            let mut retries = 0;
            while Some(w) == avoid && retries < MAX_COLLISION_RETRIES {
                w = self.sample(rng);
                retries += 1;
            }
            out.push(w);
        }
    }
}

/// `log s(v'_O . v_I) + sum_k log s(-v'_k . v_I)` for one training pair.
pub fn sgns_objective(emb: &EmbeddingSet, input: WordId, positive: WordId, negatives: &[WordId]) -> Result<f64> {
    emb.check_word(input)?;
    emb.check_word(positive)?;
    for &k in negatives {
        emb.check_word(k)?;
    }
    let v = emb.input(input);
    let mut obj = log_sigmoid(dot(emb.output(positive), v));
    for &k in negatives {
        obj += log_sigmoid(-dot(emb.output(k), v));
    }
    Ok(obj)
}

/// One ascent step on [`sgns_objective`]. All coefficients use the vectors
/// as they were before the step; only `v_input`, `v'_positive` and the
/// negatives' output vectors change. Returns the pre-step objective.
pub fn sgns_step(
    emb: &mut EmbeddingSet,
    input: WordId,
    positive: WordId,
    negatives: &[WordId],
    rate: f64,
) -> Result<f64> {
    emb.check_word(input)?;
    emb.check_word(positive)?;
    for &k in negatives {
        emb.check_word(k)?;
    }
    let mut scratch = Scratch::new(emb.dim(), negatives.len());
    Ok(step(emb, &mut scratch, input, positive, negatives, rate))
}

/// Storage the step routine can read and update. Implemented for plain
/// embeddings and for the lock-free shared view used by threaded training.
trait ParamStore {
    fn read_input(&self, w: WordId, buf: &mut [f64]);
    fn read_output(&self, w: WordId, buf: &mut [f64]);
    fn add_input(&mut self, w: WordId, alpha: f64, x: &[f64]);
    fn add_output(&mut self, w: WordId, alpha: f64, x: &[f64]);
}

impl ParamStore for EmbeddingSet {
    fn read_input(&self, w: WordId, buf: &mut [f64]) {
        buf.copy_from_slice(self.input(w));
    }

    fn read_output(&self, w: WordId, buf: &mut [f64]) {
        buf.copy_from_slice(self.output(w));
    }

    fn add_input(&mut self, w: WordId, alpha: f64, x: &[f64]) {
        crate::softmax::axpy(alpha, x, self.input_mut(w));
    }

    fn add_output(&mut self, w: WordId, alpha: f64, x: &[f64]) {
        crate::softmax::axpy(alpha, x, self.output_mut(w));
    }
}

/// f64 bits in relaxed atomics. Concurrent read-modify-write sequences may
/// lose updates, which asynchronous SGD tolerates; there is no undefined
/// behaviour.
struct AtomicEmbeddings {
    input: Vec<AtomicU64>,
    output: Vec<AtomicU64>,
    dim: usize,
}

impl AtomicEmbeddings {
    fn from_set(emb: &EmbeddingSet) -> Self {
        let wrap = |m: &[f64]| m.iter().map(|x| AtomicU64::new(x.to_bits())).collect();
        AtomicEmbeddings {
            input: wrap(emb.input_matrix()),
            output: wrap(emb.output_matrix()),
            dim: emb.dim(),
        }
    }

    fn write_back(&self, emb: &mut EmbeddingSet) {
        for (dst, src) in emb.input_matrix_mut().iter_mut().zip(&self.input) {
            *dst = f64::from_bits(src.load(Ordering::Relaxed));
        }
        for (dst, src) in emb.output_matrix_mut().iter_mut().zip(&self.output) {
            *dst = f64::from_bits(src.load(Ordering::Relaxed));
        }
    }
}

#[derive(Clone, Copy)]
struct SharedView<'a>(&'a AtomicEmbeddings);

impl SharedView<'_> {
    fn read(cells: &[AtomicU64], buf: &mut [f64]) {
        for (b, c) in buf.iter_mut().zip(cells) {
            *b = f64::from_bits(c.load(Ordering::Relaxed));
        }
    }

    fn add(cells: &[AtomicU64], alpha: f64, x: &[f64]) {
        for (c, xi) in cells.iter().zip(x) {
            let old = f64::from_bits(c.load(Ordering::Relaxed));
            c.store((old + alpha * xi).to_bits(), Ordering::Relaxed);
        }
    }
}

impl ParamStore for SharedView<'_> {
    fn read_input(&self, w: WordId, buf: &mut [f64]) {
        let d = self.0.dim;
        Self::read(&self.0.input[w * d..(w + 1) * d], buf);
    }

    fn read_output(&self, w: WordId, buf: &mut [f64]) {
        let d = self.0.dim;
        Self::read(&self.0.output[w * d..(w + 1) * d], buf);
    }

    fn add_input(&mut self, w: WordId, alpha: f64, x: &[f64]) {
        let d = self.0.dim;
        Self::add(&self.0.input[w * d..(w + 1) * d], alpha, x);
    }

    fn add_output(&mut self, w: WordId, alpha: f64, x: &[f64]) {
        let d = self.0.dim;
        Self::add(&self.0.output[w * d..(w + 1) * d], alpha, x);
    }
}

struct Scratch {
    v_in: Vec<f64>,
    v_out: Vec<f64>,
    grad_in: Vec<f64>,
    coef: Vec<f64>,
    negatives: Vec<WordId>,
}

impl Scratch {
    fn new(dim: usize, k: usize) -> Self {
        Scratch {
            v_in: vec![0.0; dim],
            v_out: vec![0.0; dim],
            grad_in: vec![0.0; dim],
            coef: Vec::with_capacity(k + 1),
            negatives: Vec::with_capacity(k),
        }
    }
}

fn step<P: ParamStore>(
    store: &mut P,
    scratch: &mut Scratch,
    input: WordId,
    positive: WordId,
    negatives: &[WordId],
    rate: f64,
) -> f64 {
    store.read_input(input, &mut scratch.v_in);
    scratch.grad_in.iter_mut().for_each(|g| *g = 0.0);
    scratch.coef.clear();

    let mut objective = 0.0;
    let targets = std::iter::once((positive, true)).chain(negatives.iter().map(|&k| (k, false)));
    for (target, is_positive) in targets.clone() {
        store.read_output(target, &mut scratch.v_out);
        let x = dot(&scratch.v_out, &scratch.v_in);
        let g = if is_positive {
            objective += log_sigmoid(x);
            1.0 - sigmoid(x)
        } else {
            objective += log_sigmoid(-x);
            -sigmoid(x)
        };
        crate::softmax::axpy(g, &scratch.v_out, &mut scratch.grad_in);
        scratch.coef.push(g);
    }
    for ((target, _), &g) in targets.zip(&scratch.coef) {
        store.add_output(target, rate * g, &scratch.v_in);
    }
    store.add_input(input, rate, &scratch.grad_in);
    objective
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgnsConfig {
    pub negatives: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub radius: usize,
    pub dim: usize,
    pub seed: u64,
    /// Frequent-word subsampling threshold; `None` trains on every token.
    pub subsample_threshold: Option<f64>,
    pub power: f64,
    /// More than one thread switches to lock-free asynchronous updates,
    /// which are not reproducible.
    pub threads: usize,
    /// Progress log granularity in slots (single-threaded mode).
    pub log_every: u64,
}

/// Corpora shorter than this get the small-data defaults.
pub const TOY_CORPUS_TOKENS: usize = 100_000;

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig {
            negatives: 5,
            learning_rate: 0.025,
            epochs: 3,
            radius: 3,
            dim: 128,
            seed: 1,
            subsample_threshold: None,
            power: 0.75,
            threads: 1,
            log_every: 100_000,
        }
    }
}

impl SgnsConfig {
    /// Small corpora want more negatives and fewer dimensions.
    pub fn toy() -> Self {
        SgnsConfig {
            negatives: 15,
            dim: 16,
            radius: 2,
            epochs: 500,
            ..SgnsConfig::default()
        }
    }

    pub fn for_corpus_len(tokens: usize) -> Self {
        if tokens < TOY_CORPUS_TOKENS {
            Self::toy()
        } else {
            Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.negatives == 0 {
            return Err(Error::InvalidParameter("negatives (K) must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter("learning rate must be positive".into()));
        }
        if self.epochs == 0 || self.radius == 0 || self.dim == 0 {
            return Err(Error::InvalidParameter("epochs, radius and dim must be at least 1".into()));
        }
        if let Some(t) = self.subsample_threshold {
            if !(t > 0.0) {
                return Err(Error::InvalidParameter("subsample threshold must be positive".into()));
            }
        }
        Ok(())
    }

    fn rate_at(&self, progress: f64) -> f64 {
        self.learning_rate * (1.0 - progress).max(1e-4)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProgressRecord {
    pub slots_processed: u64,
    pub mean_objective: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone)]
pub struct SgnsTraining {
    pub embeddings: EmbeddingSet,
    /// Mean per-slot objective of each epoch, measured before each step.
    pub epoch_means: Vec<f64>,
    pub log: Vec<ProgressRecord>,
}

impl SgnsTraining {
    /// CSV `slots_processed,mean_objective,learning_rate`.
    pub fn write_log<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "slots_processed,mean_objective,learning_rate")?;
        for r in &self.log {
            writeln!(out, "{},{},{}", r.slots_processed, r.mean_objective, r.learning_rate)?;
        }
        out.flush()
    }
}

pub fn train_sgns(ids: &TokenSequence, vocab: &Vocabulary, config: &SgnsConfig) -> Result<SgnsTraining> {
    config.validate()?;
    if ids.is_empty() {
        return Err(Error::InvalidParameter("corpus is empty".into()));
    }
    if let Some(&bad) = ids.ids.iter().find(|&&id| id >= vocab.len()) {
        return Err(Error::UnknownWordId {
            id: bad,
            len: vocab.len(),
        });
    }
    let noise = NoiseDistribution::from_vocab(vocab, config.power)?;
    let mut emb = EmbeddingSet::init(vocab.len(), config.dim, config.seed)?;
    // Independent stream for negatives and subsampling.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5EED_5A3F_0000_0001);

    let mut epoch_means = Vec::with_capacity(config.epochs);
    let mut log = Vec::new();
    let mut slots_processed = 0u64;

    for epoch in 0..config.epochs {
        let seq: Cow<TokenSequence> = match config.subsample_threshold {
            Some(t) => Cow::Owned(ids.subsample(vocab, t, &mut rng)),
            None => Cow::Borrowed(ids),
        };
        if seq.is_empty() {
            continue;
        }
        let sweep = Sweep {
            ids: &seq.ids,
            noise: &noise,
            config,
            epoch,
        };
        let (sum, count) = if config.threads <= 1 {
            sweep.run_logged(&mut emb, &mut rng, &mut slots_processed, &mut log)
        } else {
            let shared = AtomicEmbeddings::from_set(&emb);
            let base_seed: u64 = rng.gen();
            let (sum, count) = sweep.run_threaded(&shared, base_seed);
            shared.write_back(&mut emb);
            slots_processed += count;
            log.push(ProgressRecord {
                slots_processed,
                mean_objective: sum / count.max(1) as f64,
                learning_rate: config.rate_at((epoch + 1) as f64 / config.epochs as f64),
            });
            (sum, count)
        };
        let mean = sum / count.max(1) as f64;
        if !mean.is_finite() || !emb.is_finite() {
            return Err(Error::Diverged { epoch: epoch + 1 });
        }
        epoch_means.push(mean);
    }
    Ok(SgnsTraining {
        embeddings: emb,
        epoch_means,
        log,
    })
}

struct Sweep<'a> {
    ids: &'a [WordId],
    noise: &'a NoiseDistribution,
    config: &'a SgnsConfig,
    epoch: usize,
}

impl Sweep<'_> {
    /// Train on centers in `range`; windows may read outside it.
    fn run_range<P: ParamStore, R: Rng>(
        &self,
        store: &mut P,
        scratch: &mut Scratch,
        rng: &mut R,
        range: std::ops::Range<usize>,
    ) -> (f64, u64, f64) {
        let len = self.ids.len();
        let mut sum = 0.0;
        let mut count = 0u64;
        let mut rate = self.config.learning_rate;
        for t in range {
            let progress = (self.epoch as f64 + t as f64 / len as f64) / self.config.epochs as f64;
            rate = self.config.rate_at(progress);
            let center = self.ids[t];
            for pos in Boundary::Truncate.context_positions(t, len, self.config.radius) {
                let positive = self.ids[pos];
                let mut negatives = std::mem::take(&mut scratch.negatives);
                self.noise
                    .fill_negatives(&mut negatives, self.config.negatives, Some(positive), rng);
                sum += step(store, scratch, center, positive, &negatives, rate);
                scratch.negatives = negatives;
                count += 1;
            }
        }
        (sum, count, rate)
    }

    fn run_logged<R: Rng>(
        &self,
        emb: &mut EmbeddingSet,
        rng: &mut R,
        slots_processed: &mut u64,
        log: &mut Vec<ProgressRecord>,
    ) -> (f64, u64) {
        let mut scratch = Scratch::new(emb.dim(), self.config.negatives);
        let block = (self.config.log_every / (2 * self.config.radius as u64)).max(1) as usize;
        let (mut total_sum, mut total_count) = (0.0, 0u64);
        let mut start = 0;
        while start < self.ids.len() {
            let end = (start + block).min(self.ids.len());
            let (sum, count, rate) = self.run_range(emb, &mut scratch, rng, start..end);
            total_sum += sum;
            total_count += count;
            *slots_processed += count;
            if count > 0 {
                log.push(ProgressRecord {
                    slots_processed: *slots_processed,
                    mean_objective: sum / count as f64,
                    learning_rate: rate,
                });
            }
            start = end;
        }
        (total_sum, total_count)
    }

    fn run_threaded(&self, shared: &AtomicEmbeddings, base_seed: u64) -> (f64, u64) {
        let threads = self.config.threads.min(self.ids.len()).max(1);
        let chunk = self.ids.len().div_ceil(threads);
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..threads)
                .map(|i| {
                    let start = (i * chunk).min(self.ids.len());
                    let end = ((i + 1) * chunk).min(self.ids.len());
                    scope.spawn(move || {
                        let mut view = SharedView(shared);
                        let mut rng = ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(i as u64));
                        let mut scratch = Scratch::new(shared.dim, self.config.negatives);
                        let (sum, count, _) = self.run_range(&mut view, &mut scratch, &mut rng, start..end);
                        (sum, count)
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("training thread panicked"))
                .fold((0.0, 0), |(s, c), (s2, c2)| (s + s2, c + c2))
        })
    }
}
