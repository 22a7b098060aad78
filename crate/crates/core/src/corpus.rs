//! Tokenization, frequency-ordered vocabularies and id encoding.
//!
//! The corpus is treated as one contiguous stream of lowercase alphabetic
//! tokens. Anything that is not alphabetic (punctuation, digits, whitespace)
//! separates tokens.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};

pub type WordId = usize;

/// Split text into lowercase alphabetic tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphabetic() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Like [`tokenize`] but starts from raw bytes, rejecting malformed UTF-8.
pub fn tokenize_bytes(bytes: &[u8]) -> Result<Vec<String>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Decode {
        offset: e.valid_up_to(),
    })?;
    Ok(tokenize(text))
}

/// Read a corpus file as text. With `max_bytes`, only a prefix is read; the
/// cut is moved back to a character boundary so a slice of valid UTF-8 never
/// fails to decode.
pub fn read_corpus(path: impl AsRef<Path>, max_bytes: Option<u64>) -> Result<String> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    match max_bytes {
        Some(limit) => file.take(limit).read_to_end(&mut bytes),
        None => BufReader::new(file).read_to_end(&mut bytes),
    }
    .map_err(|e| Error::io(path, e))?;

    if max_bytes.is_some() {
        if let Err(e) = std::str::from_utf8(&bytes) {
            // Only a truncated trailing sequence is forgivable.
            if e.error_len().is_none() {
                bytes.truncate(e.valid_up_to());
            }
        }
    }
    String::from_utf8(bytes).map_err(|e| Error::Decode {
        offset: e.utf8_error().valid_up_to(),
    })
}

/// Word/id mapping ordered by descending frequency, ties by first appearance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, WordId>,
    total_tokens: u64,
}

impl Vocabulary {
    pub fn build<S: AsRef<str>>(tokens: &[S], min_count: u64) -> Result<Self> {
        if min_count == 0 {
            return Err(Error::InvalidParameter("min_count must be at least 1".into()));
        }
        // word -> (count, first position)
        let mut seen: HashMap<&str, (u64, usize)> = HashMap::new();
        for (pos, token) in tokens.iter().enumerate() {
            seen.entry(token.as_ref()).or_insert((0, pos)).0 += 1;
        }
        let mut entries: Vec<(&str, u64, usize)> = seen
            .into_iter()
            .filter(|&(_, (count, _))| count >= min_count)
            .map(|(word, (count, first))| (word, count, first))
            .collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));

        let (words, counts) = entries
            .into_iter()
            .map(|(word, count, _)| (word.to_owned(), count))
            .unzip();
        Self::from_parts(words, counts)
    }

    /// Assemble a vocabulary from words already in id order.
    pub fn from_parts(words: Vec<String>, counts: Vec<u64>) -> Result<Self> {
        if words.len() != counts.len() {
            return Err(Error::InvalidParameter(format!(
                "{} words but {} counts",
                words.len(),
                counts.len()
            )));
        }
        if counts.windows(2).any(|pair| pair[0] < pair[1]) {
            return Err(Error::InvalidParameter(
                "vocabulary counts must be non-increasing in id order".into(),
            ));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (id, word) in words.iter().enumerate() {
            if index.insert(word.clone(), id).is_some() {
                return Err(Error::InvalidParameter(format!("duplicate word {word:?}")));
            }
        }
        let total_tokens = counts.iter().sum();
        Ok(Vocabulary {
            words,
            counts,
            index,
            total_tokens,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn id(&self, word: &str) -> Option<WordId> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: WordId) -> Option<&str> {
        self.words.get(id).map(String::as_str)
    }

    pub fn count(&self, id: WordId) -> u64 {
        self.counts[id]
    }

    pub fn require_id(&self, word: &str) -> Result<WordId> {
        self.id(word).ok_or_else(|| Error::UnknownWord(word.to_owned()))
    }

    /// Drop out-of-vocabulary tokens and map the rest to ids.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> TokenSequence {
        TokenSequence {
            ids: tokens.iter().filter_map(|t| self.id(t.as_ref())).collect(),
        }
    }

    pub fn decode<'a>(&'a self, seq: &TokenSequence) -> Vec<&'a str> {
        seq.ids.iter().map(|&id| self.words[id].as_str()).collect()
    }

    /// One `word<TAB>count` line per word, in id order.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (word, count) in self.words.iter().zip(&self.counts) {
            writeln!(out, "{word}\t{count}")?;
        }
        out.flush()
    }

    pub fn read_tsv<R: BufRead>(input: R, origin: &Path) -> Result<Self> {
        let mut words = Vec::new();
        let mut counts = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::io(origin, e))?;
            if line.is_empty() {
                continue;
            }
            let (word, count) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(origin, lineno + 1, "expected word<TAB>count"))?;
            let count = count
                .parse()
                .map_err(|_| Error::parse(origin, lineno + 1, format!("bad count {count:?}")))?;
            words.push(word.to_owned());
            counts.push(count);
        }
        Self::from_parts(words, counts)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_tsv(BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_tsv(BufReader::new(file), path)
    }
}

/// A corpus as word ids, in corpus order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSequence {
    pub ids: Vec<WordId>,
}

impl TokenSequence {
    pub fn new(ids: Vec<WordId>) -> Self {
        TokenSequence { ids }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Largest id plus one, i.e. the smallest vocabulary this sequence fits.
    pub fn min_vocab_len(&self) -> usize {
        self.ids.iter().max().map_or(0, |&m| m + 1)
    }

    /// Frequent-word subsampling: each token of word `w` is discarded with
    /// probability `1 - sqrt(threshold / f(w))`, where `f(w)` is its relative
    /// frequency. Not part of the plain skip-gram objective; opt-in only.
    pub fn subsample<R: Rng>(&self, vocab: &Vocabulary, threshold: f64, rng: &mut R) -> Self {
        let total = vocab.total_tokens().max(1) as f64;
        let keep: Vec<f64> = vocab
            .counts()
            .iter()
            .map(|&n| {
                let f = n as f64 / total;
                (threshold / f).sqrt().min(1.0)
            })
            .collect();
        TokenSequence {
            ids: self
                .ids
                .iter()
                .copied()
                .filter(|&id| rng.gen::<f64>() < keep[id])
                .collect(),
        }
    }
}
