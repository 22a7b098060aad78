//! SGNS on a synthetic topic-structured corpus: the trained probabilities
//! should track the corpus co-occurrence probabilities. This exercises the
//! same pipeline as the large-corpus correlation check at a size that needs
//! no external data.

mod common;

use rand::Rng;

use skipgram_core::analysis;
use skipgram_core::sgns::{self, SgnsConfig};
use skipgram_core::{CooccurrenceTable, TokenSequence, Vocabulary};

const TOPICS: usize = 12;
const WORDS_PER_TOPIC: usize = 25;
const FUNCTION_WORDS: usize = 10;

/// Segments of 30 tokens drawn from one topic (Zipf-weighted within the
/// topic), with 25% function words shared by all topics.
fn synthetic_corpus(len: usize, seed: u64) -> Vec<String> {
    let mut rng = common::rng(seed);
    let zipf: Vec<f64> = (1..=WORDS_PER_TOPIC).map(|r| 1.0 / r as f64).collect();
    let total: f64 = zipf.iter().sum();
    let mut tokens = Vec::with_capacity(len);
    while tokens.len() < len {
        let topic = rng.gen_range(0..TOPICS);
        for _ in 0..30 {
            if rng.gen_bool(0.25) {
                tokens.push(format!("f{}", rng.gen_range(0..FUNCTION_WORDS)));
                continue;
            }
            let mut u = rng.gen::<f64>() * total;
            let mut rank = 0;
            while rank + 1 < WORDS_PER_TOPIC && u > zipf[rank] {
                u -= zipf[rank];
                rank += 1;
            }
            tokens.push(format!("t{topic}w{rank}"));
        }
    }
    tokens.truncate(len);
    tokens
}

#[test]
fn sgns_probabilities_correlate_with_corpus_probabilities() {
    let tokens = synthetic_corpus(200_000, 1);
    let vocab = Vocabulary::build(&tokens, 5).unwrap();
    let ids: TokenSequence = vocab.encode(&tokens);
    let config = SgnsConfig {
        negatives: 5,
        radius: 3,
        dim: 32,
        epochs: 3,
        ..SgnsConfig::default()
    };
    let run = sgns::train_sgns(&ids, &vocab, &config).unwrap();
    assert!(run.embeddings.is_finite());

    let table = CooccurrenceTable::count(&ids, vocab.len(), config.radius).unwrap();
    let n = vocab.len().min(200);
    let probes: Vec<&str> = (0..TOPICS).map(|t| vocab.words().iter().find(|w| w.starts_with(&format!("t{t}w"))).unwrap().as_str()).collect();
    let corrs: Vec<f64> = probes
        .iter()
        .map(|p| analysis::correlation(&run.embeddings, &table, &vocab, p, n).unwrap().corr)
        .collect();
    let mean = corrs.iter().sum::<f64>() / corrs.len() as f64;
    println!("synthetic correlation: mean {mean:.3}, per probe {corrs:.3?}");
    assert!(corrs.iter().all(|&c| c > 0.0), "{corrs:?}");
    assert!(mean >= 0.15, "mean {mean}");
}
