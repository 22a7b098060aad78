//! Exact full-softmax skip-gram: probabilities, the average log probability
//! objective, its analytic gradients, and a gradient-ascent trainer.
//!
//! Everything here costs `O(W * dim)` per center word and is meant for small
//! vocabularies. Large corpora go through [`crate::sgns`].

use crate::cooccur::{Boundary, CooccurrenceTable, ProbMode};
use crate::corpus::{TokenSequence, WordId};
use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `log(sum(exp(x)))` without overflow.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Normalise logits into probabilities in place, max-shifted.
pub fn softmax_in_place(xs: &mut [f64]) {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in xs.iter_mut() {
        *x /= sum;
    }
}

/// Inner products `v'_w . v_center` for every `w`.
pub fn logits(emb: &EmbeddingSet, center: WordId) -> Vec<f64> {
    let v = emb.input(center);
    (0..emb.num_words()).map(|w| dot(emb.output(w), v)).collect()
}

/// The model's conditional distribution `p^(. | center)`.
pub fn softmax_row(emb: &EmbeddingSet, center: WordId) -> Result<Vec<f64>> {
    emb.check_word(center)?;
    let mut row = logits(emb, center);
    softmax_in_place(&mut row);
    Ok(row)
}

/// `log p^(. | center)` computed directly from logits, so tiny probabilities
/// keep their precision.
pub fn log_softmax_row(emb: &EmbeddingSet, center: WordId) -> Vec<f64> {
    let mut row = logits(emb, center);
    let lse = log_sum_exp(&row);
    for x in &mut row {
        *x -= lse;
    }
    row
}

/// Average log probability over the corpus, one term per valid
/// (position, offset) slot, divided by the corpus length.
pub fn average_log_prob(emb: &EmbeddingSet, ids: &TokenSequence, radius: usize) -> Result<f64> {
    average_log_prob_with(emb, ids, radius, Boundary::Truncate)
}

pub fn average_log_prob_with(
    emb: &EmbeddingSet,
    ids: &TokenSequence,
    radius: usize,
    boundary: Boundary,
) -> Result<f64> {
    if ids.is_empty() {
        return Err(Error::InvalidParameter("corpus is empty".into()));
    }
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; emb.num_words()];
    let mut total = 0.0;
    for (t, &s) in ids.ids.iter().enumerate() {
        emb.check_word(s)?;
        let row = rows[s].get_or_insert_with(|| log_softmax_row(emb, s));
        for p in boundary.context_positions(t, ids.len(), radius) {
            total += row[ids.ids[p]];
        }
    }
    Ok(total / ids.len() as f64)
}

/// The same objective grouped by word pairs: `(1/T) sum n(s,w) log p^(w|s)`.
pub fn grouped_log_prob(emb: &EmbeddingSet, table: &CooccurrenceTable) -> f64 {
    let mut total = 0.0;
    for s in 0..table.num_words() {
        let row = table.row(s);
        if row.is_empty() {
            continue;
        }
        let logp = log_softmax_row(emb, s);
        total += row.iter().map(|&(w, n)| n as f64 * logp[w]).sum::<f64>();
    }
    total / table.total_tokens() as f64
}

fn check_table(emb: &EmbeddingSet, table: &CooccurrenceTable) -> Result<()> {
    if emb.num_words() != table.num_words() {
        return Err(Error::InvalidParameter(format!(
            "embeddings cover {} words, table covers {}",
            emb.num_words(),
            table.num_words()
        )));
    }
    Ok(())
}

/// Per-context coefficients `n(s,w) - D_s p^(w|s)` for center `s`, where
/// `D_s` is the mode's denominator.
fn center_coefficients(emb: &EmbeddingSet, table: &CooccurrenceTable, s: WordId, mode: ProbMode) -> Vec<f64> {
    let denom = table.denominator(s, mode) as f64;
    let mut coef = logits(emb, s);
    softmax_in_place(&mut coef);
    for c in &mut coef {
        *c *= -denom;
    }
    for &(w, n) in table.row(s) {
        coef[w] += n as f64;
    }
    coef
}

/// Aggregate gradient of the objective with respect to the input vector of
/// `center`: `(1/T) sum_w (n(s,w) - D_s p^(w|s)) v'_w`, equivalently
/// `2c p(s) sum_w (p_c(w|s) - p^(w|s)) v'_w` in full-window mode.
///
/// [`ProbMode::Normalized`] uses the actual slot count for `D_s` and is the
/// exact derivative of the truncated-window objective;
/// [`ProbMode::FullWindow`] uses `2c n_s` and matches it only when no window is
/// truncated. A word that never occurs does not enter the objective, so its
/// gradient is zero.
pub fn grad_input(emb: &EmbeddingSet, table: &CooccurrenceTable, center: WordId, mode: ProbMode) -> Result<Vec<f64>> {
    check_table(emb, table)?;
    emb.check_word(center)?;
    if table.center_count(center) == 0 {
        return Ok(vec![0.0; emb.dim()]);
    }
    let coef = center_coefficients(emb, table, center, mode);
    let mut grad = vec![0.0; emb.dim()];
    for (w, &a) in coef.iter().enumerate() {
        axpy(a, emb.output(w), &mut grad);
    }
    let scale = 1.0 / table.total_tokens() as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok(grad)
}

/// Aggregate gradient with respect to the output vector of `context`:
/// `(1/T) sum_w (n(w,context) - D_w p^(context|w)) v_w`.
pub fn grad_output(emb: &EmbeddingSet, table: &CooccurrenceTable, context: WordId, mode: ProbMode) -> Result<Vec<f64>> {
    check_table(emb, table)?;
    emb.check_word(context)?;
    let mut grad = vec![0.0; emb.dim()];
    for w in 0..table.num_words() {
        if table.center_count(w) == 0 {
            continue;
        }
        let denom = table.denominator(w, mode) as f64;
        let p = softmax_row(emb, w)?[context];
        let a = table.pair_count(w, context) as f64 - denom * p;
        axpy(a, emb.input(w), &mut grad);
    }
    let scale = 1.0 / table.total_tokens() as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok(grad)
}

/// Gradients for every input and output vector at once, row-major like the
/// embedding matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub input: Vec<f64>,
    pub output: Vec<f64>,
}

impl Gradient {
    pub fn norm(&self) -> f64 {
        self.input.iter().chain(&self.output).map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// One pass over the centers computes all `2W` aggregate gradients in
/// `O(W^2 dim)`.
pub fn full_gradient(emb: &EmbeddingSet, table: &CooccurrenceTable, mode: ProbMode) -> Result<Gradient> {
    check_table(emb, table)?;
    let dim = emb.dim();
    let mut input = vec![0.0; emb.num_words() * dim];
    let mut output = vec![0.0; emb.num_words() * dim];
    for s in 0..table.num_words() {
        if table.center_count(s) == 0 {
            continue;
        }
        let coef = center_coefficients(emb, table, s, mode);
        let v_s = emb.input(s);
        let g_s = &mut input[s * dim..(s + 1) * dim];
        for (w, &a) in coef.iter().enumerate() {
            axpy(a, emb.output(w), g_s);
            axpy(a, v_s, &mut output[w * dim..(w + 1) * dim]);
        }
    }
    let scale = 1.0 / table.total_tokens() as f64;
    input.iter_mut().chain(output.iter_mut()).for_each(|g| *g *= scale);
    Ok(Gradient { input, output })
}

/// Input-vector gradient summed position by position over the corpus:
/// `(1/T) sum_{t: w_t = s} sum_j (v'_{w_{t+j}} - sum_w p^(w|s) v'_w)`.
pub fn positional_grad_input(
    emb: &EmbeddingSet,
    ids: &TokenSequence,
    radius: usize,
    boundary: Boundary,
    center: WordId,
) -> Result<Vec<f64>> {
    emb.check_word(center)?;
    let p = softmax_row(emb, center)?;
    let mut expected = vec![0.0; emb.dim()];
    for (w, &pw) in p.iter().enumerate() {
        axpy(pw, emb.output(w), &mut expected);
    }
    let mut grad = vec![0.0; emb.dim()];
    for (t, _) in ids.ids.iter().enumerate().filter(|&(_, &w)| w == center) {
        for pos in boundary.context_positions(t, ids.len(), radius) {
            axpy(1.0, emb.output(ids.ids[pos]), &mut grad);
            axpy(-1.0, &expected, &mut grad);
        }
    }
    let scale = 1.0 / ids.len() as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok(grad)
}

/// Output-vector gradient summed position by position:
/// `(1/T) sum_t (n_t(s) - k_t p^(s|w_t)) v_{w_t}`, where `n_t(s)` counts `s`
/// in the window at `t` and `k_t` is that window's slot count (`2c` without
/// truncation).
pub fn positional_grad_output(
    emb: &EmbeddingSet,
    ids: &TokenSequence,
    radius: usize,
    boundary: Boundary,
    context: WordId,
) -> Result<Vec<f64>> {
    emb.check_word(context)?;
    let mut grad = vec![0.0; emb.dim()];
    for (t, &w_t) in ids.ids.iter().enumerate() {
        let mut hits = 0usize;
        let mut slots = 0usize;
        for pos in boundary.context_positions(t, ids.len(), radius) {
            slots += 1;
            if ids.ids[pos] == context {
                hits += 1;
            }
        }
        let p = softmax_row(emb, w_t)?[context];
        axpy(hits as f64 - slots as f64 * p, emb.input(w_t), &mut grad);
    }
    let scale = 1.0 / ids.len() as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok(grad)
}

/// The input-vector update for one context occurrence of `winner` around
/// `center`, split into a pull towards the winner's output vector and pushes
/// away from every other output vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CompetitiveDecomposition {
    pub center: WordId,
    pub winner: WordId,
    /// Indexed by word id: `1 - p^(winner|center)` at `winner`,
    /// `-p^(w|center)` elsewhere.
    pub coefficients: Vec<f64>,
}

impl CompetitiveDecomposition {
    pub fn winner_coefficient(&self) -> f64 {
        self.coefficients[self.winner]
    }

    pub fn losers(&self) -> impl Iterator<Item = (WordId, f64)> + '_ {
        self.coefficients
            .iter()
            .copied()
            .enumerate()
            .filter(move |&(w, _)| w != self.winner)
    }

    /// `sum_w coefficient_w v'_w`, the per-occurrence input gradient.
    pub fn reconstruct(&self, emb: &EmbeddingSet) -> Vec<f64> {
        let mut grad = vec![0.0; emb.dim()];
        for (w, &a) in self.coefficients.iter().enumerate() {
            axpy(a, emb.output(w), &mut grad);
        }
        grad
    }
}

pub fn decompose_input_gradient(emb: &EmbeddingSet, center: WordId, winner: WordId) -> Result<CompetitiveDecomposition> {
    emb.check_word(winner)?;
    let mut coefficients = softmax_row(emb, center)?;
    for c in &mut coefficients {
        *c = -*c;
    }
    coefficients[winner] += 1.0;
    Ok(CompetitiveDecomposition {
        center,
        winner,
        coefficients,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateMode {
    /// One step per epoch along the aggregate gradient of every vector.
    FullBatch,
    /// Sweep the corpus and update after every window.
    PerPosition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrSchedule {
    Constant,
    /// `eta * (1 - (epoch - 1) / epochs)`, floored at `1e-4 * eta`.
    LinearDecay,
}

impl LrSchedule {
    pub fn rate(self, base: f64, epoch: usize, epochs: usize) -> f64 {
        match self {
            LrSchedule::Constant => base,
            LrSchedule::LinearDecay => {
                let frac = 1.0 - (epoch.saturating_sub(1)) as f64 / epochs as f64;
                base * frac.max(1e-4)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub radius: usize,
    pub dim: usize,
    pub seed: u64,
    pub mode: UpdateMode,
    pub schedule: LrSchedule,
    /// Denominator inside the update rule. [`ProbMode::FullWindow`] applies the
    /// `2c p(s) (p_c - p^)` rule literally; [`ProbMode::Normalized`] is the
    /// exact gradient of the truncated-window objective. They coincide when no
    /// window is truncated.
    pub gradient: ProbMode,
    /// Reject full-batch steps that lower the objective and halve the rate.
    pub divergence_guard: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.3,
            epochs: 500,
            radius: 2,
            dim: 16,
            seed: 1,
            mode: UpdateMode::FullBatch,
            schedule: LrSchedule::LinearDecay,
            gradient: ProbMode::FullWindow,
            divergence_guard: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter("learning rate must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("epochs must be at least 1".into()));
        }
        if self.radius == 0 {
            return Err(Error::InvalidParameter("window radius must be at least 1".into()));
        }
        if self.dim == 0 {
            return Err(Error::InvalidParameter("dim must be at least 1".into()));
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub objective: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone)]
pub struct ExactTraining {
    pub embeddings: EmbeddingSet,
    /// Epoch 0 is the initial state.
    pub log: Vec<EpochRecord>,
}

impl ExactTraining {
    /// CSV `epoch,E,learning_rate`.
    pub fn write_log<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "epoch,E,learning_rate")?;
        for r in &self.log {
            writeln!(out, "{},{},{}", r.epoch, r.objective, r.learning_rate)?;
        }
        out.flush()
    }
}

/// Gradient ascent on the exact objective from a seeded random start.
pub fn train_exact(ids: &TokenSequence, num_words: usize, config: &TrainConfig) -> Result<ExactTraining> {
    config.validate()?;
    let emb = EmbeddingSet::init(num_words, config.dim, config.seed)?;
    train_exact_from(emb, ids, config, |_, _| {})
}

/// Like [`train_exact`] but starting from `emb`. `observe` sees the state
/// after every epoch (and epoch 0).
pub fn train_exact_from<F>(
    mut emb: EmbeddingSet,
    ids: &TokenSequence,
    config: &TrainConfig,
    mut observe: F,
) -> Result<ExactTraining>
where
    F: FnMut(usize, &EmbeddingSet),
{
    config.validate()?;
    let table = CooccurrenceTable::count(ids, emb.num_words(), config.radius)?;
    let mut objective = grouped_log_prob(&emb, &table);
    let mut log = vec![EpochRecord {
        epoch: 0,
        objective,
        learning_rate: 0.0,
    }];
    observe(0, &emb);

    // Shrinks every time the guard rejects a step.
    let mut guard_scale = 1.0;
    for epoch in 1..=config.epochs {
        let rate = config.schedule.rate(config.learning_rate, epoch, config.epochs);
        let applied = match config.mode {
            UpdateMode::FullBatch => {
                let grad = full_gradient(&emb, &table, config.gradient)?;
                let mut applied = rate * guard_scale;
                loop {
                    let mut next = emb.clone();
                    axpy(applied, &grad.input, next.input_matrix_mut());
                    axpy(applied, &grad.output, next.output_matrix_mut());
                    let next_objective = grouped_log_prob(&next, &table);
                    if !next_objective.is_finite() {
                        return Err(Error::Diverged { epoch });
                    }
                    // Below ~1e-12 relative the comparison is just rounding.
                    let worse = next_objective < objective - 1e-12 * objective.abs();
                    if config.divergence_guard && worse && applied > rate * 1e-9 {
                        guard_scale *= 0.5;
                        applied = rate * guard_scale;
                        continue;
                    }
                    emb = next;
                    objective = next_objective;
                    break applied;
                }
            }
            UpdateMode::PerPosition => {
                let applied = rate * guard_scale;
                per_position_sweep(&mut emb, ids, config.radius, applied);
                let next_objective = grouped_log_prob(&emb, &table);
                if !next_objective.is_finite() || !emb.is_finite() {
                    return Err(Error::Diverged { epoch });
                }
                if config.divergence_guard && next_objective < objective {
                    guard_scale *= 0.5;
                }
                objective = next_objective;
                applied
            }
        };
        log.push(EpochRecord {
            epoch,
            objective,
            learning_rate: applied,
        });
        observe(epoch, &emb);
    }
    Ok(ExactTraining { embeddings: emb, log })
}

/// One corpus sweep of per-window ascent steps on
/// `sum_j log p^(w_{t+j} | w_t)`.
fn per_position_sweep(emb: &mut EmbeddingSet, ids: &TokenSequence, radius: usize, rate: f64) {
    let dim = emb.dim();
    let num_words = emb.num_words();
    let mut hits = vec![0.0; num_words];
    let mut grad_in = vec![0.0; dim];
    for t in 0..ids.len() {
        let s = ids.ids[t];
        hits.iter_mut().for_each(|h| *h = 0.0);
        let mut slots = 0.0;
        for pos in Boundary::Truncate.context_positions(t, ids.len(), radius) {
            hits[ids.ids[pos]] += 1.0;
            slots += 1.0;
        }
        if slots == 0.0 {
            continue;
        }
        let mut p = logits(emb, s);
        softmax_in_place(&mut p);
        grad_in.iter_mut().for_each(|g| *g = 0.0);
        let v_s = emb.input(s).to_vec();
        for w in 0..num_words {
            let a = hits[w] - slots * p[w];
            axpy(a, emb.output(w), &mut grad_in);
            axpy(rate * a, &v_s, emb.output_mut(w));
        }
        axpy(rate, &grad_in, emb.input_mut(s));
    }
}
