//! C ABI over `skipgram-core`.
//!
//! Objects cross the boundary as opaque handles (`SgCorpus`, `SgTable`,
//! `SgEmbeddings`) created by `sg_*` constructors and released with the
//! matching `*_free`. Every fallible call returns an [`SgStatus`]; on failure
//! `sg_last_error_message` describes the most recent error on the calling
//! thread. Panics never unwind into C: they are reported as
//! `SG_STATUS_INTERNAL`.
//!
//! Handles are not synchronized. Sharing one between threads requires
//! external locking unless every call on it is read-only.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use skipgram_core::analysis;
use skipgram_core::corpus::read_corpus;
use skipgram_core::sgns::{self, SgnsConfig};
use skipgram_core::softmax::{self, LrSchedule, TrainConfig, UpdateMode};
use skipgram_core::{tokenize, CooccurrenceTable, EmbeddingSet, Error, ProbMode, TokenSequence, Vocabulary};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownWord = 3,
    UndefinedProbability = 4,
    DegenerateCorrelation = 5,
    Diverged = 6,
    Io = 7,
    Parse = 8,
    Internal = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgProbMode {
    /// Divide pair counts by `2c` times the center count.
    FullWindow = 0,
    /// Divide pair counts by the context slots actually observed.
    Normalized = 1,
}

impl From<SgProbMode> for ProbMode {
    fn from(mode: SgProbMode) -> Self {
        match mode {
            SgProbMode::FullWindow => ProbMode::FullWindow,
            SgProbMode::Normalized => ProbMode::Normalized,
        }
    }
}

/// Settings for full-softmax training. Get defaults from
/// `sg_exact_config_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SgExactConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub radius: usize,
    pub dim: usize,
    pub seed: u64,
    /// Nonzero: one update per window instead of per epoch.
    pub per_position: u8,
    /// Nonzero: decay the rate linearly over the epochs.
    pub linear_decay: u8,
    pub gradient: SgProbMode,
    /// Nonzero: reject full-batch steps that lower the objective.
    pub divergence_guard: u8,
}

/// Settings for negative-sampling training. Get defaults from
/// `sg_sgns_config_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SgSgnsConfig {
    pub negatives: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub radius: usize,
    pub dim: usize,
    pub seed: u64,
    /// Subsampling threshold; zero or negative disables subsampling.
    pub subsample_threshold: f64,
    pub power: f64,
    pub threads: usize,
}

/// A tokenized corpus and its vocabulary.
pub struct SgCorpus {
    vocab: Vocabulary,
    ids: TokenSequence,
    words: Vec<CString>,
}

/// Windowed co-occurrence counts.
pub struct SgTable {
    table: CooccurrenceTable,
}

/// Input and output vectors.
pub struct SgEmbeddings {
    emb: EmbeddingSet,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(msg));
}

struct Failure(SgStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidParameter(_) | Error::UnknownWordId { .. } | Error::Decode { .. } => SgStatus::InvalidArgument,
            Error::UnknownWord(_) => SgStatus::UnknownWord,
            Error::UndefinedProbability(_) => SgStatus::UndefinedProbability,
            Error::DegenerateCorrelation(_) => SgStatus::DegenerateCorrelation,
            Error::Diverged { .. } => SgStatus::Diverged,
            Error::Io { .. } | Error::Other(_) => SgStatus::Io,
            Error::Parse { .. } => SgStatus::Parse,
        };
        Failure(status, e.to_string())
    }
}

type FfiResult<T> = Result<T, Failure>;

fn guard(f: impl FnOnce() -> FfiResult<()>) -> SgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SgStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal error: {msg}"));
            SgStatus::Internal
        }
    }
}

fn null(name: &str) -> Failure {
    Failure(SgStatus::NullPointer, format!("{name} is null"))
}

unsafe fn borrow<'a, T>(p: *const T, name: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn c_str<'a>(p: *const c_char, name: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(SgStatus::InvalidArgument, format!("{name} is not valid UTF-8")))
}

unsafe fn write_out<T>(out: *mut T, value: T, name: &str) -> FfiResult<()> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

fn corpus_from_text(text: &str, min_count: u64) -> FfiResult<SgCorpus> {
    if min_count == 0 {
        return Err(Failure(SgStatus::InvalidArgument, "min_count must be at least 1".into()));
    }
    let tokens = tokenize(text);
    let vocab = Vocabulary::build(&tokens, min_count)?;
    let ids = vocab.encode(&tokens);
    let words = vocab
        .words()
        .iter()
        .map(|w| CString::new(w.as_str()).expect("tokens have no nul bytes"))
        .collect();
    Ok(SgCorpus { vocab, ids, words })
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Tokenize `text` (NUL-terminated UTF-8) and keep words seen at least
/// `min_count` times.
///
/// # Safety
/// `text` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_corpus_from_text(text: *const c_char, min_count: u64, out: *mut *mut SgCorpus) -> SgStatus {
    guard(|| {
        let text = c_str(text, "text")?;
        let corpus = corpus_from_text(text, min_count)?;
        write_out(out, Box::into_raw(Box::new(corpus)), "out")
    })
}

/// Like `sg_corpus_from_text` but reads a file. `max_bytes` of zero reads
/// the whole file.
///
/// # Safety
/// `path` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_corpus_from_file(
    path: *const c_char,
    max_bytes: u64,
    min_count: u64,
    out: *mut *mut SgCorpus,
) -> SgStatus {
    guard(|| {
        let path = PathBuf::from(c_str(path, "path")?);
        let text = read_corpus(&path, (max_bytes > 0).then_some(max_bytes))?;
        let corpus = corpus_from_text(&text, min_count)?;
        write_out(out, Box::into_raw(Box::new(corpus)), "out")
    })
}

/// # Safety
/// `corpus` must come from a corpus constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sg_corpus_free(corpus: *mut SgCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Number of distinct retained words; 0 for a null handle.
///
/// # Safety
/// `corpus` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sg_corpus_vocab_size(corpus: *const SgCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.vocab.len())
}

/// Number of retained tokens; 0 for a null handle.
///
/// # Safety
/// `corpus` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sg_corpus_num_tokens(corpus: *const SgCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.ids.len())
}

/// Word for `id`, or null if out of range. Owned by the corpus.
///
/// # Safety
/// `corpus` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sg_corpus_word(corpus: *const SgCorpus, id: usize) -> *const c_char {
    corpus
        .as_ref()
        .and_then(|c| c.words.get(id))
        .map_or(ptr::null(), |w| w.as_ptr())
}

/// # Safety
/// `corpus` must be a live handle, `word` a valid C string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sg_corpus_word_id(corpus: *const SgCorpus, word: *const c_char, out: *mut usize) -> SgStatus {
    guard(|| {
        let corpus = borrow(corpus, "corpus")?;
        let word = c_str(word, "word")?;
        let id = corpus.vocab.require_id(word)?;
        write_out(out, id, "out")
    })
}

/// Count co-occurrences within `radius` positions, truncating windows at
/// the corpus ends.
///
/// # Safety
/// `corpus` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_table_count(corpus: *const SgCorpus, radius: usize, out: *mut *mut SgTable) -> SgStatus {
    guard(|| {
        let corpus = borrow(corpus, "corpus")?;
        let table = CooccurrenceTable::count(&corpus.ids, corpus.vocab.len(), radius)?;
        write_out(out, Box::into_raw(Box::new(SgTable { table })), "out")
    })
}

/// # Safety
/// `table` must come from `sg_table_count` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sg_table_free(table: *mut SgTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Occurrences of `context` within the window of `center`.
///
/// # Safety
/// `table` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_table_pair_count(table: *const SgTable, center: usize, context: usize, out: *mut u64) -> SgStatus {
    guard(|| {
        let table = &borrow(table, "table")?.table;
        let w = table.num_words();
        if center >= w || context >= w {
            return Err(Error::UnknownWordId { id: center.max(context), len: w }.into());
        }
        write_out(out, table.pair_count(center, context), "out")
    })
}

/// Corpus probability of `context` near `center`.
///
/// # Safety
/// `table` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_table_ground_truth_prob(
    table: *const SgTable,
    center: usize,
    context: usize,
    mode: SgProbMode,
    out: *mut f64,
) -> SgStatus {
    guard(|| {
        let table = &borrow(table, "table")?.table;
        let p = table.ground_truth_prob(center, context, mode.into())?;
        write_out(out, p, "out")
    })
}

/// Best achievable average log-probability for this table.
///
/// # Safety
/// `table` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_optimal_objective(table: *const SgTable, out: *mut f64) -> SgStatus {
    guard(|| {
        let table = &borrow(table, "table")?.table;
        write_out(out, analysis::optimal_objective(table), "out")
    })
}

#[no_mangle]
pub extern "C" fn sg_exact_config_default() -> SgExactConfig {
    let d = TrainConfig::default();
    SgExactConfig {
        learning_rate: d.learning_rate,
        epochs: d.epochs,
        radius: d.radius,
        dim: d.dim,
        seed: d.seed,
        per_position: u8::from(d.mode == UpdateMode::PerPosition),
        linear_decay: u8::from(d.schedule == LrSchedule::LinearDecay),
        gradient: match d.gradient {
            ProbMode::FullWindow => SgProbMode::FullWindow,
            ProbMode::Normalized => SgProbMode::Normalized,
        },
        divergence_guard: u8::from(d.divergence_guard),
    }
}

/// Defaults for small corpora: 15 negatives, 16 dimensions, radius 2.
#[no_mangle]
pub extern "C" fn sg_sgns_config_default() -> SgSgnsConfig {
    let d = SgnsConfig::toy();
    SgSgnsConfig {
        negatives: d.negatives,
        learning_rate: d.learning_rate,
        epochs: d.epochs,
        radius: d.radius,
        dim: d.dim,
        seed: d.seed,
        subsample_threshold: d.subsample_threshold.unwrap_or(0.0),
        power: d.power,
        threads: d.threads,
    }
}

/// Full-softmax gradient ascent.
///
/// # Safety
/// `corpus` and `config` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_train_exact(
    corpus: *const SgCorpus,
    config: *const SgExactConfig,
    out: *mut *mut SgEmbeddings,
) -> SgStatus {
    guard(|| {
        let corpus = borrow(corpus, "corpus")?;
        let c = borrow(config, "config")?;
        let cfg = TrainConfig {
            learning_rate: c.learning_rate,
            epochs: c.epochs,
            radius: c.radius,
            dim: c.dim,
            seed: c.seed,
            mode: if c.per_position != 0 { UpdateMode::PerPosition } else { UpdateMode::FullBatch },
            schedule: if c.linear_decay != 0 { LrSchedule::LinearDecay } else { LrSchedule::Constant },
            gradient: c.gradient.into(),
            divergence_guard: c.divergence_guard != 0,
        };
        let run = softmax::train_exact(&corpus.ids, corpus.vocab.len(), &cfg)?;
        write_out(out, Box::into_raw(Box::new(SgEmbeddings { emb: run.embeddings })), "out")
    })
}

/// Skip-gram with negative sampling.
///
/// # Safety
/// `corpus` and `config` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_train_sgns(
    corpus: *const SgCorpus,
    config: *const SgSgnsConfig,
    out: *mut *mut SgEmbeddings,
) -> SgStatus {
    guard(|| {
        let corpus = borrow(corpus, "corpus")?;
        let c = borrow(config, "config")?;
        let cfg = SgnsConfig {
            negatives: c.negatives,
            learning_rate: c.learning_rate,
            epochs: c.epochs,
            radius: c.radius,
            dim: c.dim,
            seed: c.seed,
            subsample_threshold: (c.subsample_threshold > 0.0).then_some(c.subsample_threshold),
            power: c.power,
            threads: c.threads.max(1),
            log_every: SgnsConfig::default().log_every,
        };
        let run = sgns::train_sgns(&corpus.ids, &corpus.vocab, &cfg)?;
        write_out(out, Box::into_raw(Box::new(SgEmbeddings { emb: run.embeddings })), "out")
    })
}

/// Seeded random vectors, as used at the start of training.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_embeddings_init(num_words: usize, dim: usize, seed: u64, out: *mut *mut SgEmbeddings) -> SgStatus {
    guard(|| {
        let emb = EmbeddingSet::init(num_words, dim, seed)?;
        write_out(out, Box::into_raw(Box::new(SgEmbeddings { emb })), "out")
    })
}

/// # Safety
/// `emb` must come from an embeddings constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sg_embeddings_free(emb: *mut SgEmbeddings) {
    if !emb.is_null() {
        drop(Box::from_raw(emb));
    }
}

/// # Safety
/// `emb` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sg_embeddings_num_words(emb: *const SgEmbeddings) -> usize {
    emb.as_ref().map_or(0, |e| e.emb.num_words())
}

/// # Safety
/// `emb` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sg_embeddings_dim(emb: *const SgEmbeddings) -> usize {
    emb.as_ref().map_or(0, |e| e.emb.dim())
}

/// Copy the input vector (`output == 0`) or output vector of `word` into
/// `buf`, which holds `len` doubles; `len` must equal the dimension.
///
/// # Safety
/// `emb` must be a live handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sg_embeddings_vector(
    emb: *const SgEmbeddings,
    word: usize,
    output: u8,
    buf: *mut f64,
    len: usize,
) -> SgStatus {
    guard(|| {
        let emb = &borrow(emb, "emb")?.emb;
        emb.check_word(word)?;
        let row = if output != 0 { emb.output(word) } else { emb.input(word) };
        copy_out(row, buf, len)
    })
}

unsafe fn copy_out(values: &[f64], buf: *mut f64, len: usize) -> FfiResult<()> {
    if buf.is_null() {
        return Err(null("buf"));
    }
    if len != values.len() {
        return Err(Failure(
            SgStatus::InvalidArgument,
            format!("buffer holds {len} values, need {}", values.len()),
        ));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), buf, len);
    Ok(())
}

/// Model distribution over context words for `center`; `buf` holds one
/// double per vocabulary word.
///
/// # Safety
/// `emb` must be a live handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sg_softmax_row(emb: *const SgEmbeddings, center: usize, buf: *mut f64, len: usize) -> SgStatus {
    guard(|| {
        let emb = &borrow(emb, "emb")?.emb;
        let row = softmax::softmax_row(emb, center)?;
        copy_out(&row, buf, len)
    })
}

/// Average log-probability of every window context over the corpus.
///
/// # Safety
/// `emb` and `corpus` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_average_log_prob(
    emb: *const SgEmbeddings,
    corpus: *const SgCorpus,
    radius: usize,
    out: *mut f64,
) -> SgStatus {
    guard(|| {
        let emb = &borrow(emb, "emb")?.emb;
        let corpus = borrow(corpus, "corpus")?;
        let e = softmax::average_log_prob(emb, &corpus.ids, radius)?;
        write_out(out, e, "out")
    })
}

/// Pearson correlation between corpus and model context probabilities of
/// `probe` over the `n` most frequent words.
///
/// # Safety
/// Handles must be live and `table` counted from `corpus`; `probe` must be a
/// valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_correlation(
    emb: *const SgEmbeddings,
    table: *const SgTable,
    corpus: *const SgCorpus,
    probe: *const c_char,
    n: usize,
    out: *mut f64,
) -> SgStatus {
    guard(|| {
        let emb = &borrow(emb, "emb")?.emb;
        let table = &borrow(table, "table")?.table;
        let corpus = borrow(corpus, "corpus")?;
        let probe = c_str(probe, "probe")?;
        let result = analysis::correlation(emb, table, &corpus.vocab, probe, n)?;
        write_out(out, result.corr, "out")
    })
}

/// Write `<prefix>.in.vec` and `<prefix>.out.vec`.
///
/// # Safety
/// Handles must be live; `prefix` must be a valid C string.
#[no_mangle]
pub unsafe extern "C" fn sg_embeddings_save(
    emb: *const SgEmbeddings,
    corpus: *const SgCorpus,
    prefix: *const c_char,
) -> SgStatus {
    guard(|| {
        let emb = &borrow(emb, "emb")?.emb;
        let corpus = borrow(corpus, "corpus")?;
        let prefix = c_str(prefix, "prefix")?;
        emb.save(prefix, corpus.vocab.words())?;
        Ok(())
    })
}

/// Read both vector files written by `sg_embeddings_save`.
///
/// # Safety
/// `prefix` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_embeddings_load(prefix: *const c_char, out: *mut *mut SgEmbeddings) -> SgStatus {
    guard(|| {
        let prefix = c_str(prefix, "prefix")?;
        let (_, emb) = EmbeddingSet::load(prefix)?;
        write_out(out, Box::into_raw(Box::new(SgEmbeddings { emb })), "out")
    })
}
