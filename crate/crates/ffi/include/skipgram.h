#ifndef SKIPGRAM_H
#define SKIPGRAM_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SgStatus {
  SG_STATUS_OK = 0,
  SG_STATUS_NULL_POINTER = 1,
  SG_STATUS_INVALID_ARGUMENT = 2,
  SG_STATUS_UNKNOWN_WORD = 3,
  SG_STATUS_UNDEFINED_PROBABILITY = 4,
  SG_STATUS_DEGENERATE_CORRELATION = 5,
  SG_STATUS_DIVERGED = 6,
  SG_STATUS_IO = 7,
  SG_STATUS_PARSE = 8,
  SG_STATUS_INTERNAL = 9,
} SgStatus;

typedef enum SgProbMode {
  // Divide pair counts by `2c` times the center count.
  SG_PROB_MODE_FULL_WINDOW = 0,
  // Divide pair counts by the context slots actually observed.
  SG_PROB_MODE_NORMALIZED = 1,
} SgProbMode;

// A tokenized corpus and its vocabulary.
typedef struct SgCorpus SgCorpus;

// Input and output vectors.
typedef struct SgEmbeddings SgEmbeddings;

// Windowed co-occurrence counts.
typedef struct SgTable SgTable;

// Settings for full-softmax training. Get defaults from
// `sg_exact_config_default`.
typedef struct SgExactConfig {
  double learning_rate;
  size_t epochs;
  size_t radius;
  size_t dim;
  uint64_t seed;
  // Nonzero: one update per window instead of per epoch.
  uint8_t per_position;
  // Nonzero: decay the rate linearly over the epochs.
  uint8_t linear_decay;
  enum SgProbMode gradient;
  // Nonzero: reject full-batch steps that lower the objective.
  uint8_t divergence_guard;
} SgExactConfig;

// Settings for negative-sampling training. Get defaults from
// `sg_sgns_config_default`.
typedef struct SgSgnsConfig {
  size_t negatives;
  double learning_rate;
  size_t epochs;
  size_t radius;
  size_t dim;
  uint64_t seed;
  // Subsampling threshold; zero or negative disables subsampling.
  double subsample_threshold;
  double power;
  size_t threads;
} SgSgnsConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. Valid until
// the next failing call on the same thread.
const char *sg_last_error_message(void);

// Tokenize `text` (NUL-terminated UTF-8) and keep words seen at least
// `min_count` times.
//
// # Safety
// `text` must be a valid C string; `out` must be writable.
enum SgStatus sg_corpus_from_text(const char *text, uint64_t min_count, struct SgCorpus **out);

// Like `sg_corpus_from_text` but reads a file. `max_bytes` of zero reads
// the whole file.
//
// # Safety
// `path` must be a valid C string; `out` must be writable.
enum SgStatus sg_corpus_from_file(const char *path,
                                  uint64_t max_bytes,
                                  uint64_t min_count,
                                  struct SgCorpus **out);

// # Safety
// `corpus` must come from a corpus constructor and not be used afterwards.
void sg_corpus_free(struct SgCorpus *corpus);

// Number of distinct retained words; 0 for a null handle.
//
// # Safety
// `corpus` must be null or a live handle.
size_t sg_corpus_vocab_size(const struct SgCorpus *corpus);

// Number of retained tokens; 0 for a null handle.
//
// # Safety
// `corpus` must be null or a live handle.
size_t sg_corpus_num_tokens(const struct SgCorpus *corpus);

// Word for `id`, or null if out of range. Owned by the corpus.
//
// # Safety
// `corpus` must be null or a live handle.
const char *sg_corpus_word(const struct SgCorpus *corpus, size_t id);

// # Safety
// `corpus` must be a live handle, `word` a valid C string, `out` writable.
enum SgStatus sg_corpus_word_id(const struct SgCorpus *corpus, const char *word, size_t *out);

// Count co-occurrences within `radius` positions, truncating windows at
// the corpus ends.
//
// # Safety
// `corpus` must be a live handle; `out` must be writable.
enum SgStatus sg_table_count(const struct SgCorpus *corpus, size_t radius, struct SgTable **out);

// # Safety
// `table` must come from `sg_table_count` and not be used afterwards.
void sg_table_free(struct SgTable *table);

// Occurrences of `context` within the window of `center`.
//
// # Safety
// `table` must be a live handle; `out` must be writable.
enum SgStatus sg_table_pair_count(const struct SgTable *table,
                                  size_t center,
                                  size_t context,
                                  uint64_t *out);

// Corpus probability of `context` near `center`.
//
// # Safety
// `table` must be a live handle; `out` must be writable.
enum SgStatus sg_table_ground_truth_prob(const struct SgTable *table,
                                         size_t center,
                                         size_t context,
                                         enum SgProbMode mode,
                                         double *out);

// Best achievable average log-probability for this table.
//
// # Safety
// `table` must be a live handle; `out` must be writable.
enum SgStatus sg_optimal_objective(const struct SgTable *table, double *out);

struct SgExactConfig sg_exact_config_default(void);

// Defaults for small corpora: 15 negatives, 16 dimensions, radius 2.
struct SgSgnsConfig sg_sgns_config_default(void);

// Full-softmax gradient ascent.
//
// # Safety
// `corpus` and `config` must be valid; `out` must be writable.
enum SgStatus sg_train_exact(const struct SgCorpus *corpus,
                             const struct SgExactConfig *config,
                             struct SgEmbeddings **out);

// Skip-gram with negative sampling.
//
// # Safety
// `corpus` and `config` must be valid; `out` must be writable.
enum SgStatus sg_train_sgns(const struct SgCorpus *corpus,
                            const struct SgSgnsConfig *config,
                            struct SgEmbeddings **out);

// Seeded random vectors, as used at the start of training.
//
// # Safety
// `out` must be writable.
enum SgStatus sg_embeddings_init(size_t num_words,
                                 size_t dim,
                                 uint64_t seed,
                                 struct SgEmbeddings **out);

// # Safety
// `emb` must come from an embeddings constructor and not be used afterwards.
void sg_embeddings_free(struct SgEmbeddings *emb);

// # Safety
// `emb` must be null or a live handle.
size_t sg_embeddings_num_words(const struct SgEmbeddings *emb);

// # Safety
// `emb` must be null or a live handle.
size_t sg_embeddings_dim(const struct SgEmbeddings *emb);

// Copy the input vector (`output == 0`) or output vector of `word` into
// `buf`, which holds `len` doubles; `len` must equal the dimension.
//
// # Safety
// `emb` must be a live handle; `buf` must hold `len` doubles.
enum SgStatus sg_embeddings_vector(const struct SgEmbeddings *emb,
                                   size_t word,
                                   uint8_t output,
                                   double *buf,
                                   size_t len);

// Model distribution over context words for `center`; `buf` holds one
// double per vocabulary word.
//
// # Safety
// `emb` must be a live handle; `buf` must hold `len` doubles.
enum SgStatus sg_softmax_row(const struct SgEmbeddings *emb,
                             size_t center,
                             double *buf,
                             size_t len);

// Average log-probability of every window context over the corpus.
//
// # Safety
// `emb` and `corpus` must be live handles; `out` must be writable.
enum SgStatus sg_average_log_prob(const struct SgEmbeddings *emb,
                                  const struct SgCorpus *corpus,
                                  size_t radius,
                                  double *out);

// Pearson correlation between corpus and model context probabilities of
// `probe` over the `n` most frequent words.
//
// # Safety
// Handles must be live and `table` counted from `corpus`; `probe` must be a
// valid C string; `out` must be writable.
enum SgStatus sg_correlation(const struct SgEmbeddings *emb,
                             const struct SgTable *table,
                             const struct SgCorpus *corpus,
                             const char *probe,
                             size_t n,
                             double *out);

// Write `<prefix>.in.vec` and `<prefix>.out.vec`.
//
// # Safety
// Handles must be live; `prefix` must be a valid C string.
enum SgStatus sg_embeddings_save(const struct SgEmbeddings *emb,
                                 const struct SgCorpus *corpus,
                                 const char *prefix);

// Read both vector files written by `sg_embeddings_save`.
//
// # Safety
// `prefix` must be a valid C string; `out` must be writable.
enum SgStatus sg_embeddings_load(const char *prefix, struct SgEmbeddings **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SKIPGRAM_H */
