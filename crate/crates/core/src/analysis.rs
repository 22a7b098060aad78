//! Validation of trained embeddings against corpus statistics.
//!
//! At the optimum of the skip-gram objective the model's conditional
//! distribution equals the co-occurrence distribution:
//! `p^(w | s) = n(s, w) / (2c n_s)`. [`optimality_report`] lays the two side
//! by side for one probe word, [`correlation`] summarises their agreement
//! over many words with a Pearson coefficient, and [`optimal_objective`]
//! gives the best objective value any embedding can reach.

use std::io::Write;

use crate::cooccur::{CooccurrenceTable, ProbMode};
use crate::corpus::{Vocabulary, WordId};
use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::softmax::softmax_row;

/// Probe words used for the correlation table: six nouns, six verbs, six
/// adjectives.
pub const DEFAULT_PROBES: [&str; 18] = [
    "water", "man", "king", "car", "bird", "war", "run", "play", "eat", "drink", "fly", "draw",
    "smart", "pretty", "beautiful", "dark", "high", "low",
];

/// Default number of most frequent words compared per probe.
pub const DEFAULT_TOP_N: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub word: WordId,
    pub text: String,
    pub ground_truth: f64,
    pub estimated: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportSummary {
    /// Largest `|p_c - p^|` over words that occur in the probe's windows.
    pub max_context_deviation: f64,
    /// Largest `p^` over words that never occur in the probe's windows.
    pub max_non_context_estimate: f64,
    /// `p^` mass on the probe's context words.
    pub context_mass: f64,
    pub estimated_sum: f64,
    /// `0.5 * sum |p_c - p^|`.
    pub total_variation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalityReport {
    pub probe: WordId,
    pub probe_text: String,
    pub mode: ProbMode,
    /// Descending `p_c`, then descending `p^`.
    pub rows: Vec<ReportRow>,
    pub summary: ReportSummary,
}

/// Side-by-side `p_c(w | probe)` and `p^(w | probe)` over the whole
/// vocabulary.
pub fn optimality_report(
    emb: &EmbeddingSet,
    table: &CooccurrenceTable,
    vocab: &Vocabulary,
    probe: &str,
    mode: ProbMode,
) -> Result<OptimalityReport> {
    let s = vocab.require_id(probe)?;
    if emb.num_words() != vocab.len() || table.num_words() != vocab.len() {
        return Err(Error::InvalidParameter(
            "embeddings, table and vocabulary disagree on vocabulary size".into(),
        ));
    }
    let truth = table
        .ground_truth_row(s, mode)
        .map_err(|_| Error::UndefinedProbability(probe.to_owned()))?;
    let estimate = softmax_row(emb, s)?;

    let mut rows: Vec<ReportRow> = (0..vocab.len())
        .map(|w| ReportRow {
            word: w,
            text: vocab.words()[w].clone(),
            ground_truth: truth[w],
            estimated: estimate[w],
        })
        .collect();
    rows.sort_by(|a, b| {
        b.ground_truth
            .total_cmp(&a.ground_truth)
            .then(b.estimated.total_cmp(&a.estimated))
    });

    let mut summary = ReportSummary {
        max_context_deviation: 0.0,
        max_non_context_estimate: 0.0,
        context_mass: 0.0,
        estimated_sum: 0.0,
        total_variation: 0.0,
    };
    for row in &rows {
        if row.ground_truth > 0.0 {
            summary.max_context_deviation = summary
                .max_context_deviation
                .max((row.ground_truth - row.estimated).abs());
            summary.context_mass += row.estimated;
        } else {
            summary.max_non_context_estimate = summary.max_non_context_estimate.max(row.estimated);
        }
        summary.estimated_sum += row.estimated;
        summary.total_variation += 0.5 * (row.ground_truth - row.estimated).abs();
    }

    Ok(OptimalityReport {
        probe: s,
        probe_text: probe.to_owned(),
        mode,
        rows,
        summary,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationResult {
    pub probe: WordId,
    pub probe_text: String,
    pub n: usize,
    pub corr: f64,
    pub mean_truth: f64,
    pub mean_estimate: f64,
    /// Least-squares fit `p_c = slope * p^ + intercept`.
    pub slope: f64,
    pub intercept: f64,
}

/// Pearson correlation coefficient, clamped to `[-1, 1]`.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    Ok(LinearFit::new(xs, ys)?.corr)
}

struct LinearFit {
    mean_x: f64,
    mean_y: f64,
    corr: f64,
    /// y on x
    slope: f64,
    intercept: f64,
}

impl LinearFit {
    fn new(xs: &[f64], ys: &[f64]) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "correlation needs two equal-length samples of size >= 2, got {} and {}",
                xs.len(),
                ys.len()
            )));
        }
        let n = xs.len() as f64;
        let mean_x = xs.iter().sum::<f64>() / n;
        let mean_y = ys.iter().sum::<f64>() / n;
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for (x, y) in xs.iter().zip(ys) {
            let dx = x - mean_x;
            let dy = y - mean_y;
            sxx += dx * dx;
            syy += dy * dy;
            sxy += dx * dy;
        }
        if sxx == 0.0 {
            return Err(Error::DegenerateCorrelation("first"));
        }
        if syy == 0.0 {
            return Err(Error::DegenerateCorrelation("second"));
        }
        let corr = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
        let slope = sxy / sxx;
        Ok(LinearFit {
            mean_x,
            mean_y,
            corr,
            slope,
            intercept: mean_y - slope * mean_x,
        })
    }
}

/// Pearson correlation between `p_c(w_u | probe)` and `p^(w_u | probe)` over
/// the `n` most frequent words `w_u` (ids `0..n`).
pub fn correlation(
    emb: &EmbeddingSet,
    table: &CooccurrenceTable,
    vocab: &Vocabulary,
    probe: &str,
    n: usize,
) -> Result<CorrelationResult> {
    let s = vocab.require_id(probe)?;
    if n > vocab.len() || n > emb.num_words() {
        return Err(Error::InvalidParameter(format!(
            "top-{n} requested from a vocabulary of {}",
            vocab.len()
        )));
    }
    let truth = table
        .ground_truth_row(s, ProbMode::FullWindow)
        .map_err(|_| Error::UndefinedProbability(probe.to_owned()))?;
    let estimate = softmax_row(emb, s)?;
    let truth = &truth[..n];
    let estimate = &estimate[..n];
    let fit = LinearFit::new(estimate, truth).map_err(|e| match e {
        Error::DegenerateCorrelation("first") => Error::DegenerateCorrelation("estimated"),
        Error::DegenerateCorrelation(_) => Error::DegenerateCorrelation("ground-truth"),
        other => other,
    })?;
    Ok(CorrelationResult {
        probe: s,
        probe_text: probe.to_owned(),
        n,
        corr: fit.corr,
        mean_truth: fit.mean_y,
        mean_estimate: fit.mean_x,
        slope: fit.slope,
        intercept: fit.intercept,
    })
}

/// Supremum of the average log probability on this table:
/// `(1/T) sum n(s,w) log(n(s,w) / slots(s))`, with `0 log 0 = 0`. Uses actual
/// slot counts because `p^(. | s)` must sum to one over the slots that exist.
pub fn optimal_objective(table: &CooccurrenceTable) -> f64 {
    let mut total = 0.0;
    for s in 0..table.num_words() {
        let slots = table.slot_count(s) as f64;
        for &(_, n) in table.row(s) {
            let n = n as f64;
            total += n * (n / slots).ln();
        }
    }
    total / table.total_tokens() as f64
}

/// `word\tp_c\tp_hat` with four decimals, in report order.
pub fn write_report_tsv<W: Write>(report: &OptimalityReport, mut out: W) -> std::io::Result<()> {
    writeln!(out, "word\tp_c\tp_hat")?;
    for row in &report.rows {
        writeln!(out, "{}\t{:.4}\t{:.4}", row.text, row.ground_truth, row.estimated)?;
    }
    out.flush()
}

/// Plot data: `p_c,p_hat` at full precision, in report order.
pub fn write_figure_csv<W: Write>(report: &OptimalityReport, mut out: W) -> std::io::Result<()> {
    writeln!(out, "p_c,p_hat")?;
    for row in &report.rows {
        writeln!(out, "{},{}", row.ground_truth, row.estimated)?;
    }
    out.flush()
}

/// One line per probe word.
pub fn write_correlation_tsv<W: Write>(results: &[CorrelationResult], mut out: W) -> std::io::Result<()> {
    writeln!(out, "word\tcorr\tn\tmean_p_c\tmean_p_hat\tslope\tintercept")?;
    for r in results {
        writeln!(
            out,
            "{}\t{:.4}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}",
            r.probe_text, r.corr, r.n, r.mean_truth, r.mean_estimate, r.slope, r.intercept
        )?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{tokenize, TokenSequence};
    use crate::cooccur::Boundary;
    use crate::LITTLE_STAR;
    use approx::assert_abs_diff_eq;

    fn little_star() -> (Vocabulary, CooccurrenceTable) {
        let tokens = tokenize(LITTLE_STAR);
        let vocab = Vocabulary::build(&tokens, 1).unwrap();
        let table = CooccurrenceTable::count(&vocab.encode(&tokens), vocab.len(), 2).unwrap();
        (vocab, table)
    }

    #[test]
    fn untrained_report_is_uniform() {
        let (vocab, table) = little_star();
        let emb = EmbeddingSet::zeros(vocab.len(), 4).unwrap();
        let report = optimality_report(&emb, &table, &vocab, "every", ProbMode::FullWindow).unwrap();
        assert_eq!(report.rows.len(), 26);
        for row in &report.rows {
            assert_abs_diff_eq!(row.estimated, 1.0 / 26.0, epsilon = 1e-15);
            // every p_c is k/12
            let k = row.ground_truth * 12.0;
            assert_abs_diff_eq!(k, k.round(), epsilon = 1e-12);
        }
        assert_eq!(report.rows[0].ground_truth, 2.0 / 12.0);
        assert_abs_diff_eq!(report.summary.estimated_sum, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn unknown_probe() {
        let (vocab, table) = little_star();
        let emb = EmbeddingSet::zeros(vocab.len(), 4).unwrap();
        assert!(matches!(
            optimality_report(&emb, &table, &vocab, "water", ProbMode::FullWindow),
            Err(Error::UnknownWord(_))
        ));
    }

    #[test]
    fn probe_without_occurrences_is_undefined() {
        let vocab = Vocabulary::from_parts(vec!["a".into(), "b".into()], vec![2, 0]).unwrap();
        let table = CooccurrenceTable::count(&TokenSequence::new(vec![0, 0]), 2, 1).unwrap();
        let emb = EmbeddingSet::zeros(2, 2).unwrap();
        assert!(matches!(
            optimality_report(&emb, &table, &vocab, "b", ProbMode::FullWindow),
            Err(Error::UndefinedProbability(_))
        ));
    }

    #[test]
    fn pearson_perfect_and_degenerate() {
        let xs = [0.1, 0.3, 0.2, 0.0];
        assert_abs_diff_eq!(pearson(&xs, &xs).unwrap(), 1.0, epsilon = 1e-15);
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert_abs_diff_eq!(pearson(&xs, &neg).unwrap(), -1.0, epsilon = 1e-15);
        assert!(matches!(
            pearson(&xs, &[0.5; 4]),
            Err(Error::DegenerateCorrelation(_))
        ));
    }

    #[test]
    fn optimal_objective_examples() {
        let table = CooccurrenceTable::count(&TokenSequence::new(vec![0, 1, 0, 1, 0]), 2, 1).unwrap();
        assert_abs_diff_eq!(optimal_objective(&table), 0.0, epsilon = 1e-15);

        // [0,0,1,1] on a ring: every window is {self, other}.
        let ids = TokenSequence::new(vec![0, 0, 1, 1]);
        let table = CooccurrenceTable::count_with(&ids, 2, 1, Boundary::Wrap).unwrap();
        let slots = table.total_slots() as f64;
        assert_abs_diff_eq!(optimal_objective(&table), -(slots / 4.0) * 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn report_files() {
        let (vocab, table) = little_star();
        let emb = EmbeddingSet::init(vocab.len(), 4, 1).unwrap();
        let report = optimality_report(&emb, &table, &vocab, "every", ProbMode::FullWindow).unwrap();
        let mut tsv = Vec::new();
        write_report_tsv(&report, &mut tsv).unwrap();
        let tsv = String::from_utf8(tsv).unwrap();
        assert_eq!(tsv.lines().count(), 27);
        assert!(tsv.lines().nth(1).unwrap().contains("\t0.1667\t"));

        let mut csv = Vec::new();
        write_figure_csv(&report, &mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 27);

        let mut empty = Vec::new();
        write_correlation_tsv(&[], &mut empty).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap().lines().count(), 1);
    }
}
