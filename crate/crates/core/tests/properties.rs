mod common;

use proptest::prelude::*;
use rand::Rng;

use common::*;
use skipgram_core::analysis::{self, pearson};
use skipgram_core::sgns::{self, NoiseDistribution, SgnsConfig};
use skipgram_core::softmax;
use skipgram_core::{tokenize, CooccurrenceTable, EmbeddingSet, ProbMode, TokenSequence, Vocabulary};

fn corpus(max_words: usize, max_len: usize) -> impl Strategy<Value = (usize, Vec<usize>)> {
    (1..=max_words).prop_flat_map(move |w| (Just(w), prop::collection::vec(0..w, 1..=max_len)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn counting_matches_brute_force((w, ids) in corpus(12, 200), radius in 1usize..=4) {
        let oracle = brute_force_counts(&ids, w, radius);
        let seq = TokenSequence::new(ids);
        let table = CooccurrenceTable::count(&seq, w, radius).unwrap();
        for s in 0..w {
            for c in 0..w {
                prop_assert_eq!(table.pair_count(s, c), oracle[s][c]);
            }
            prop_assert_eq!(table.slot_count(s), oracle[s].iter().sum::<u64>());
        }
    }

    #[test]
    fn sharded_counting_equals_single_pass((w, ids) in corpus(10, 300), radius in 1usize..=4, shards in 1usize..=9) {
        let seq = TokenSequence::new(ids);
        let single = CooccurrenceTable::count(&seq, w, radius).unwrap();
        let sharded = CooccurrenceTable::count_sharded(&seq, w, radius, shards).unwrap();
        prop_assert_eq!(single.pairs().collect::<Vec<_>>(), sharded.pairs().collect::<Vec<_>>());
        prop_assert_eq!(single.center_counts(), sharded.center_counts());
    }

    #[test]
    fn probability_rows_sum_as_specified((w, ids) in corpus(8, 60), radius in 1usize..=3) {
        let seq = TokenSequence::new(ids);
        let table = CooccurrenceTable::count(&seq, w, radius).unwrap();
        for s in 0..w {
            if table.center_count(s) == 0 || table.slot_count(s) == 0 {
                continue;
            }
            let normalized: f64 = table.ground_truth_row(s, ProbMode::Normalized).unwrap().iter().sum();
            prop_assert!((normalized - 1.0).abs() < 1e-12);
            let full: f64 = table.ground_truth_row(s, ProbMode::FullWindow).unwrap().iter().sum();
            let expected = table.slot_count(s) as f64 / (2 * radius) as f64 / table.center_count(s) as f64;
            prop_assert!((full - expected).abs() < 1e-12);
            prop_assert!(full <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn decode_inverts_encode(words in prop::collection::vec("[a-z]{1,6}", 0..80)) {
        let text = words.join(" ");
        let tokens = tokenize(&text);
        prop_assert_eq!(&tokens, &words);
        let vocab = Vocabulary::build(&tokens, 1).unwrap();
        let ids = vocab.encode(&tokens);
        prop_assert_eq!(vocab.decode(&ids), tokens.iter().map(String::as_str).collect::<Vec<_>>());
        prop_assert!(vocab.counts().windows(2).all(|c| c[0] >= c[1]));
    }

    #[test]
    fn softmax_rows_normalize(w in 1usize..40, dim in 1usize..12, seed: u64, scale in 0.1f64..20.0) {
        let mut emb = EmbeddingSet::init(w, dim, seed).unwrap();
        emb.input_matrix_mut().iter_mut().for_each(|x| *x *= scale);
        for s in 0..w {
            let row = softmax::softmax_row(&emb, s).unwrap();
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|p| p.is_finite() && *p >= 0.0));
        }
    }

    #[test]
    fn objective_never_exceeds_optimum((w, ids) in corpus(8, 60), radius in 1usize..=3, dim in 1usize..6, seed: u64) {
        let seq = TokenSequence::new(ids);
        let table = CooccurrenceTable::count(&seq, w, radius).unwrap();
        let emb = EmbeddingSet::init(w, dim, seed).unwrap();
        let e = softmax::average_log_prob(&emb, &seq, radius).unwrap();
        prop_assert!(e <= analysis::optimal_objective(&table) + 1e-9);
        prop_assert!((e - softmax::grouped_log_prob(&emb, &table)).abs() < 1e-12);
    }

    #[test]
    fn pearson_is_affine_invariant(
        pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..50),
        a in 0.01f64..100.0, b in -50.0f64..50.0, c in 0.01f64..100.0, d in -50.0f64..50.0,
    ) {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        prop_assume!(pearson(&xs, &ys).is_ok());
        let r = pearson(&xs, &ys).unwrap();
        let xs2: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
        let ys2: Vec<f64> = ys.iter().map(|y| c * y + d).collect();
        prop_assert!((pearson(&xs2, &ys2).unwrap() - r).abs() < 1e-9);
        prop_assert!(r.abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn sgns_step_touches_one_input_and_k_plus_one_outputs(w in 8usize..30, dim in 1usize..8, k in 1usize..6, seed: u64) {
        let mut rng = rng(seed);
        let emb = EmbeddingSet::init(w, dim, seed).unwrap();
        let input = rng.gen_range(0..w);
        let positive = rng.gen_range(0..w);
        let mut negatives = Vec::new();
        while negatives.len() < k {
            let n = rng.gen_range(0..w);
            if n != positive && !negatives.contains(&n) {
                negatives.push(n);
            }
        }
        let mut stepped = emb.clone();
        sgns::sgns_step(&mut stepped, input, positive, &negatives, 0.5).unwrap();
        let changed = |a: &[f64], b: &[f64]| a.chunks(dim).zip(b.chunks(dim)).filter(|(x, y)| x != y).count();
        prop_assert_eq!(changed(emb.input_matrix(), stepped.input_matrix()), 1);
        prop_assert_eq!(changed(emb.output_matrix(), stepped.output_matrix()), k + 1);
    }

    #[test]
    fn sgns_steps_stay_finite(seed: u64, rate in 0.01f64..50.0) {
        let mut rng = rng(seed);
        let mut emb = EmbeddingSet::init(6, 4, seed).unwrap();
        for _ in 0..200 {
            let negatives: Vec<usize> = (0..3).map(|_| rng.gen_range(0..6)).collect();
            sgns::sgns_step(&mut emb, rng.gen_range(0..6), rng.gen_range(0..6), &negatives, rate).unwrap();
        }
        prop_assert!(emb.is_finite());
    }
}

#[test]
fn gradients_vanish_at_the_optimality_constraint() {
    // With one-hot output vectors and input vectors set to log p_c, the model
    // reproduces the normalized corpus probabilities exactly.
    let mut rng = rng(11);
    let mut tested = 0;
    while tested < 10 {
        let w = rng.gen_range(2..=4);
        let ids = random_ids(&mut rng, 80, w);
        let table = CooccurrenceTable::count(&ids, w, 3).unwrap();
        let rows: Vec<Vec<f64>> = (0..w)
            .map(|s| table.ground_truth_row(s, ProbMode::Normalized).unwrap_or_default())
            .collect();
        if rows.iter().flatten().any(|&p| p == 0.0) || rows.iter().any(Vec::is_empty) {
            continue;
        }
        let mut emb = EmbeddingSet::zeros(w, w).unwrap();
        for s in 0..w {
            emb.output_mut(s)[s] = 1.0;
            for (x, p) in emb.input_mut(s).iter_mut().zip(&rows[s]) {
                *x = p.ln();
            }
        }
        let g = softmax::full_gradient(&emb, &table, ProbMode::Normalized).unwrap();
        assert!(g.norm() < 1e-12, "gradient norm {}", g.norm());
        tested += 1;
    }
}

#[test]
fn gap_shrinks_at_each_hundred_epochs() {
    let (vocab, ids) = toy();
    let table = CooccurrenceTable::count(&ids, vocab.len(), 2).unwrap();
    let optimum = analysis::optimal_objective(&table);
    let config = softmax::TrainConfig::default();
    let init = EmbeddingSet::init(vocab.len(), config.dim, config.seed).unwrap();
    let mut gaps = Vec::new();
    let run = softmax::train_exact_from(init, &ids, &config, |epoch, emb| {
        if epoch % 100 == 0 {
            gaps.push(optimum - softmax::grouped_log_prob(emb, &table));
        }
    })
    .unwrap();
    assert_eq!(gaps.len(), 6);
    assert!(gaps.windows(2).all(|g| g[1] <= g[0]), "{gaps:?}");
    let report = analysis::optimality_report(&run.embeddings, &table, &vocab, "every", ProbMode::FullWindow).unwrap();
    assert!(report.summary.context_mass >= 0.75, "{}", report.summary.context_mass);
}

#[test]
fn sampler_passes_chi_square() {
    let (vocab, _) = toy();
    let noise = NoiseDistribution::from_vocab(&vocab, 0.75).unwrap();
    let mut rng = rng(12);
    let draws = 1_000_000u64;
    let mut hist = vec![0u64; vocab.len()];
    for _ in 0..draws {
        hist[noise.sample(&mut rng)] += 1;
    }
    let chi2: f64 = hist
        .iter()
        .zip(noise.probabilities())
        .map(|(&o, &p)| {
            let e = p * draws as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    // Upper 0.001 quantile of chi-square with 25 degrees of freedom.
    assert!(chi2 < 52.62, "chi2 {chi2}");
}

#[test]
fn sgns_training_is_bit_reproducible() {
    let (vocab, ids) = toy();
    let config = SgnsConfig {
        epochs: 3,
        ..SgnsConfig::toy()
    };
    let a = sgns::train_sgns(&ids, &vocab, &config).unwrap();
    let b = sgns::train_sgns(&ids, &vocab, &config).unwrap();
    assert_eq!(a.embeddings, b.embeddings);
    assert_eq!(a.epoch_means, b.epoch_means);
}

#[test]
fn exact_training_is_bit_reproducible() {
    let (vocab, ids) = toy();
    let config = softmax::TrainConfig {
        epochs: 50,
        ..Default::default()
    };
    let a = softmax::train_exact(&ids, vocab.len(), &config).unwrap();
    let b = softmax::train_exact(&ids, vocab.len(), &config).unwrap();
    assert_eq!(a.embeddings, b.embeddings);
}
