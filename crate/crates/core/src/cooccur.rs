//! Window co-occurrence counts and the corpus-derived probabilities that the
//! trained model is compared against.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::corpus::{TokenSequence, Vocabulary, WordId};
use crate::error::{Error, Result};

/// How windows behave at the two ends of the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    /// Offsets that fall outside the corpus are skipped.
    #[default]
    Truncate,
    /// The corpus is treated as a ring, so every position has exactly `2c`
    /// context slots.
    Wrap,
}

impl Boundary {
    /// Context positions of `t` in a corpus of length `len`, in offset order
    /// `-c..=-1, 1..=c`.
    pub fn context_positions(self, t: usize, len: usize, radius: usize) -> impl Iterator<Item = usize> {
        let c = radius as isize;
        let t = t as isize;
        let n = len as isize;
        (-c..=c).filter(|&j| j != 0).filter_map(move |j| {
            let p = t + j;
            match self {
                Boundary::Truncate => (0..n).contains(&p).then_some(p as usize),
                Boundary::Wrap => Some(p.rem_euclid(n) as usize),
            }
        })
    }
}

/// Denominator used when turning counts into `p_c(w | center)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProbMode {
    /// `n(center, w) / (2c * n(center))`, the textbook convention. Does not
    /// sum to one when windows were truncated.
    #[default]
    FullWindow,
    /// `n(center, w) / slots(center)`, normalised over the context slots that
    /// actually exist.
    Normalized,
}

/// Sparse `(center, context) -> count` table over radius-`c` windows with the
/// center removed. Counting is overlapping: a token is counted once for every
/// window it falls in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CooccurrenceTable {
    /// `rows[center]` holds `(context, count)` sorted by context id, counts > 0.
    rows: Vec<Vec<(WordId, u64)>>,
    center_counts: Vec<u64>,
    slot_counts: Vec<u64>,
    radius: usize,
    total_tokens: u64,
    boundary: Boundary,
}

impl CooccurrenceTable {
    /// Count with truncated windows.
    pub fn count(ids: &TokenSequence, num_words: usize, radius: usize) -> Result<Self> {
        Self::count_with(ids, num_words, radius, Boundary::Truncate)
    }

    pub fn count_with(
        ids: &TokenSequence,
        num_words: usize,
        radius: usize,
        boundary: Boundary,
    ) -> Result<Self> {
        validate(ids, num_words, radius)?;
        let mut acc = ShardCounts::new(num_words);
        acc.count_range(&ids.ids, 0..ids.len(), radius, boundary);
        Ok(acc.finish(num_words, radius, ids.len() as u64, boundary))
    }

    /// Count on `shards` contiguous chunks in parallel and merge. Each chunk
    /// owns the centers in its range and reads up to `c` tokens past either
    /// edge, so every slot is counted exactly once.
    pub fn count_sharded(
        ids: &TokenSequence,
        num_words: usize,
        radius: usize,
        shards: usize,
    ) -> Result<Self> {
        validate(ids, num_words, radius)?;
        let shards = shards.clamp(1, ids.len());
        let chunk = ids.len().div_ceil(shards);
        let parts: Vec<ShardCounts> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..ids.len())
                .step_by(chunk)
                .map(|start| {
                    let end = (start + chunk).min(ids.len());
                    scope.spawn(move || {
                        let mut acc = ShardCounts::new(num_words);
                        acc.count_range(&ids.ids, start..end, radius, Boundary::Truncate);
                        acc
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("counting thread panicked"))
                .collect()
        });
        let mut merged = ShardCounts::new(num_words);
        for part in parts {
            merged.merge(part);
        }
        Ok(merged.finish(num_words, radius, ids.len() as u64, Boundary::Truncate))
    }

    pub fn num_words(&self) -> usize {
        self.rows.len()
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn center_count(&self, w: WordId) -> u64 {
        self.center_counts[w]
    }

    pub fn center_counts(&self) -> &[u64] {
        &self.center_counts
    }

    /// Number of context slots that exist around all occurrences of `w`.
    pub fn slot_count(&self, w: WordId) -> u64 {
        self.slot_counts[w]
    }

    pub fn total_slots(&self) -> u64 {
        self.slot_counts.iter().sum()
    }

    /// Nonzero `(context, count)` entries for a center word.
    pub fn row(&self, center: WordId) -> &[(WordId, u64)] {
        &self.rows[center]
    }

    pub fn pair_count(&self, center: WordId, context: WordId) -> u64 {
        let row = &self.rows[center];
        row.binary_search_by_key(&context, |&(w, _)| w)
            .map_or(0, |i| row[i].1)
    }

    /// All nonzero `(center, context, count)` triples in id order.
    pub fn pairs(&self) -> impl Iterator<Item = (WordId, WordId, u64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(s, row)| row.iter().map(move |&(w, n)| (s, w, n)))
    }

    pub fn denominator(&self, center: WordId, mode: ProbMode) -> u64 {
        match mode {
            ProbMode::FullWindow => 2 * self.radius as u64 * self.center_counts[center],
            ProbMode::Normalized => self.slot_counts[center],
        }
    }

    fn check_id(&self, w: WordId) -> Result<()> {
        if w < self.num_words() {
            Ok(())
        } else {
            Err(Error::UnknownWordId {
                id: w,
                len: self.num_words(),
            })
        }
    }

    /// Corpus probability that `context` appears in the window of `center`.
    pub fn ground_truth_prob(&self, center: WordId, context: WordId, mode: ProbMode) -> Result<f64> {
        self.check_id(center)?;
        self.check_id(context)?;
        let denom = self.denominator(center, mode);
        if self.center_counts[center] == 0 || denom == 0 {
            return Err(Error::UndefinedProbability(format!("#{center}")));
        }
        Ok(self.pair_count(center, context) as f64 / denom as f64)
    }

    /// Dense `p_c(. | center)` over the whole vocabulary.
    pub fn ground_truth_row(&self, center: WordId, mode: ProbMode) -> Result<Vec<f64>> {
        self.check_id(center)?;
        let denom = self.denominator(center, mode);
        if self.center_counts[center] == 0 || denom == 0 {
            return Err(Error::UndefinedProbability(format!("#{center}")));
        }
        let mut out = vec![0.0; self.num_words()];
        for &(w, n) in &self.rows[center] {
            out[w] = n as f64 / denom as f64;
        }
        Ok(out)
    }

    /// `n_w / T`.
    pub fn unigram_prob(&self, w: WordId) -> Result<f64> {
        self.check_id(w)?;
        if self.total_tokens == 0 {
            return Err(Error::InvalidParameter("empty corpus".into()));
        }
        Ok(self.center_counts[w] as f64 / self.total_tokens as f64)
    }

    /// `#radius=<c>\ttotal_tokens=<T>` header, then `center\tcontext\tcount`
    /// rows in (center id, context id) order.
    pub fn write_tsv<W: Write>(&self, vocab: &Vocabulary, mut out: W) -> std::io::Result<()> {
        write!(out, "#radius={}\ttotal_tokens={}", self.radius, self.total_tokens)?;
        if self.boundary == Boundary::Wrap {
            write!(out, "\tboundary=wrap")?;
        }
        writeln!(out)?;
        for (s, w, n) in self.pairs() {
            writeln!(out, "{}\t{}\t{}", vocab.words()[s], vocab.words()[w], n)?;
        }
        out.flush()
    }

    pub fn read_tsv<R: BufRead>(input: R, vocab: &Vocabulary, origin: &Path) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let header = match lines.next() {
            Some((_, line)) => line.map_err(|e| Error::io(origin, e))?,
            None => return Err(Error::parse(origin, 1, "missing header")),
        };
        let mut radius = None;
        let mut total_tokens = None;
        let mut boundary = Boundary::Truncate;
        for field in header.trim_start_matches('#').split('\t') {
            match field.split_once('=') {
                Some(("radius", v)) => radius = v.parse().ok(),
                Some(("total_tokens", v)) => total_tokens = v.parse().ok(),
                Some(("boundary", "wrap")) => boundary = Boundary::Wrap,
                _ => return Err(Error::parse(origin, 1, format!("bad header field {field:?}"))),
            }
        }
        let (Some(radius), Some(total_tokens)) = (radius, total_tokens) else {
            return Err(Error::parse(origin, 1, "header needs radius and total_tokens"));
        };

        let num_words = vocab.len();
        let mut acc = ShardCounts::new(num_words);
        for (lineno, line) in lines {
            let line = line.map_err(|e| Error::io(origin, e))?;
            if line.is_empty() {
                continue;
            }
            let bad = || Error::parse(origin, lineno + 1, "expected center<TAB>context<TAB>count");
            let mut fields = line.split('\t');
            let (Some(s), Some(w), Some(n), None) =
                (fields.next(), fields.next(), fields.next(), fields.next())
            else {
                return Err(bad());
            };
            let s = vocab.require_id(s)?;
            let w = vocab.require_id(w)?;
            let n: u64 = n.parse().map_err(|_| bad())?;
            *acc.pairs.entry((s, w)).or_insert(0) += n;
        }
        acc.centers.copy_from_slice(vocab.counts());
        Ok(acc.finish(num_words, radius, total_tokens, boundary))
    }

    pub fn save(&self, vocab: &Vocabulary, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_tsv(vocab, BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(vocab: &Vocabulary, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_tsv(BufReader::new(file), vocab, path)
    }
}

fn validate(ids: &TokenSequence, num_words: usize, radius: usize) -> Result<()> {
    if radius == 0 {
        return Err(Error::InvalidParameter("window radius must be at least 1".into()));
    }
    if ids.is_empty() {
        return Err(Error::InvalidParameter("corpus is empty".into()));
    }
    if let Some(&bad) = ids.ids.iter().find(|&&id| id >= num_words) {
        return Err(Error::UnknownWordId {
            id: bad,
            len: num_words,
        });
    }
    Ok(())
}

struct ShardCounts {
    pairs: HashMap<(WordId, WordId), u64>,
    centers: Vec<u64>,
}

impl ShardCounts {
    fn new(num_words: usize) -> Self {
        ShardCounts {
            pairs: HashMap::new(),
            centers: vec![0; num_words],
        }
    }

    fn count_range(
        &mut self,
        ids: &[WordId],
        centers: std::ops::Range<usize>,
        radius: usize,
        boundary: Boundary,
    ) {
        for t in centers {
            let s = ids[t];
            self.centers[s] += 1;
            for p in boundary.context_positions(t, ids.len(), radius) {
                *self.pairs.entry((s, ids[p])).or_insert(0) += 1;
            }
        }
    }

    fn merge(&mut self, other: ShardCounts) {
        for (key, n) in other.pairs {
            *self.pairs.entry(key).or_insert(0) += n;
        }
        for (a, b) in self.centers.iter_mut().zip(other.centers) {
            *a += b;
        }
    }

    fn finish(self, num_words: usize, radius: usize, total_tokens: u64, boundary: Boundary) -> CooccurrenceTable {
        let mut rows = vec![Vec::new(); num_words];
        for ((s, w), n) in self.pairs {
            rows[s].push((w, n));
        }
        for row in &mut rows {
            row.sort_unstable_by_key(|&(w, _)| w);
        }
        let slot_counts = rows
            .iter()
            .map(|row| row.iter().map(|&(_, n)| n).sum())
            .collect();
        CooccurrenceTable {
            rows,
            center_counts: self.centers,
            slot_counts,
            radius,
            total_tokens,
            boundary,
        }
    }
}
