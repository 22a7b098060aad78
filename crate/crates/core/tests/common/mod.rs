#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use skipgram_core::{tokenize, EmbeddingSet, TokenSequence, Vocabulary, LITTLE_STAR};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_ids(rng: &mut impl Rng, len: usize, num_words: usize) -> TokenSequence {
    TokenSequence::new((0..len).map(|_| rng.gen_range(0..num_words)).collect())
}

pub fn toy() -> (Vocabulary, TokenSequence) {
    let tokens = tokenize(LITTLE_STAR);
    let vocab = Vocabulary::build(&tokens, 1).unwrap();
    let ids = vocab.encode(&tokens);
    (vocab, ids)
}

/// `n[s][w]` by the obvious double loop with truncated windows.
pub fn brute_force_counts(ids: &[usize], num_words: usize, radius: usize) -> Vec<Vec<u64>> {
    let mut n = vec![vec![0u64; num_words]; num_words];
    let t_len = ids.len() as isize;
    for t in 0..t_len {
        for j in -(radius as isize)..=(radius as isize) {
            if j == 0 || t + j < 0 || t + j >= t_len {
                continue;
            }
            n[ids[t as usize]][ids[(t + j) as usize]] += 1;
        }
    }
    n
}

/// Central differences of `f` with respect to every entry of both matrices,
/// returned as `(input, output)` gradients.
pub fn finite_difference(
    emb: &EmbeddingSet,
    h: f64,
    mut f: impl FnMut(&EmbeddingSet) -> f64,
) -> (Vec<f64>, Vec<f64>) {
    let mut work = emb.clone();
    let mut input = vec![0.0; emb.input_matrix().len()];
    for (i, g) in input.iter_mut().enumerate() {
        let x = work.input_matrix()[i];
        work.input_matrix_mut()[i] = x + h;
        let up = f(&work);
        work.input_matrix_mut()[i] = x - h;
        let down = f(&work);
        work.input_matrix_mut()[i] = x;
        *g = (up - down) / (2.0 * h);
    }
    let mut output = vec![0.0; emb.output_matrix().len()];
    for (i, g) in output.iter_mut().enumerate() {
        let x = work.output_matrix()[i];
        work.output_matrix_mut()[i] = x + h;
        let up = f(&work);
        work.output_matrix_mut()[i] = x - h;
        let down = f(&work);
        work.output_matrix_mut()[i] = x;
        *g = (up - down) / (2.0 * h);
    }
    (input, output)
}

/// Worst per-vector relative error `|a - b| / max(|a|, |b|)`, ignoring
/// vectors whose gradient is below `floor` on both sides.
pub fn max_relative_error(a: &[f64], b: &[f64], dim: usize, floor: f64) -> f64 {
    a.chunks(dim)
        .zip(b.chunks(dim))
        .map(|(x, y)| {
            let diff = norm(&x.iter().zip(y).map(|(p, q)| p - q).collect::<Vec<_>>());
            let scale = norm(x).max(norm(y));
            if scale < floor {
                diff / floor
            } else {
                diff / scale
            }
        })
        .fold(0.0, f64::max)
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Haar-ish random orthogonal matrix by Gram-Schmidt on a Gaussian matrix,
/// row-major.
pub fn random_orthogonal(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while q.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for u in &q {
                let proj: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(x, a)| *x -= proj * a);
            }
        }
        let n = norm(&v);
        if n > 1e-8 {
            q.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    q.concat()
}

pub fn rotate(q: &[f64], matrix: &mut [f64], dim: usize) {
    for row in matrix.chunks_mut(dim) {
        let rotated: Vec<f64> = (0..dim)
            .map(|i| (0..dim).map(|j| q[i * dim + j] * row[j]).sum())
            .collect();
        row.copy_from_slice(&rotated);
    }
}
