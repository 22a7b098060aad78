//! Paired input/output vectors and their text persistence.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::WordId;
use crate::error::{Error, Result};

/// Input vectors `v_w` (word embeddings) and output vectors `v'_w` (context
/// embeddings), stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    input: Vec<f64>,
    output: Vec<f64>,
    num_words: usize,
    dim: usize,
    seed: Option<u64>,
}

impl EmbeddingSet {
    /// Every entry i.i.d. `N(0, 1/dim)`, fully determined by `seed`.
    pub fn init(num_words: usize, dim: usize, seed: u64) -> Result<Self> {
        check_shape(num_words, dim)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0 / (dim as f64).sqrt()).expect("positive std dev");
        let len = num_words * dim;
        let input = normal.sample_iter(&mut rng).take(len).collect();
        let output = normal.sample_iter(&mut rng).take(len).collect();
        Ok(EmbeddingSet {
            input,
            output,
            num_words,
            dim,
            seed: Some(seed),
        })
    }

    pub fn zeros(num_words: usize, dim: usize) -> Result<Self> {
        check_shape(num_words, dim)?;
        Ok(EmbeddingSet {
            input: vec![0.0; num_words * dim],
            output: vec![0.0; num_words * dim],
            num_words,
            dim,
            seed: None,
        })
    }

    /// Build from row-major matrices of equal shape.
    pub fn from_matrices(num_words: usize, dim: usize, input: Vec<f64>, output: Vec<f64>) -> Result<Self> {
        check_shape(num_words, dim)?;
        if input.len() != num_words * dim || output.len() != num_words * dim {
            return Err(Error::InvalidParameter(format!(
                "expected {num_words}x{dim} matrices, got {} and {} entries",
                input.len(),
                output.len()
            )));
        }
        Ok(EmbeddingSet {
            input,
            output,
            num_words,
            dim,
            seed: None,
        })
    }

    pub fn num_words(&self) -> usize {
        self.num_words
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn input(&self, w: WordId) -> &[f64] {
        &self.input[w * self.dim..(w + 1) * self.dim]
    }

    pub fn output(&self, w: WordId) -> &[f64] {
        &self.output[w * self.dim..(w + 1) * self.dim]
    }

    pub fn input_mut(&mut self, w: WordId) -> &mut [f64] {
        &mut self.input[w * self.dim..(w + 1) * self.dim]
    }

    pub fn output_mut(&mut self, w: WordId) -> &mut [f64] {
        &mut self.output[w * self.dim..(w + 1) * self.dim]
    }

    pub fn input_matrix(&self) -> &[f64] {
        &self.input
    }

    pub fn output_matrix(&self) -> &[f64] {
        &self.output
    }

    pub fn input_matrix_mut(&mut self) -> &mut [f64] {
        &mut self.input
    }

    pub fn output_matrix_mut(&mut self) -> &mut [f64] {
        &mut self.output
    }

    pub fn is_finite(&self) -> bool {
        self.input.iter().chain(&self.output).all(|x| x.is_finite())
    }

    pub fn check_word(&self, w: WordId) -> Result<()> {
        if w < self.num_words {
            Ok(())
        } else {
            Err(Error::UnknownWordId {
                id: w,
                len: self.num_words,
            })
        }
    }

    /// Write `<prefix>.in.vec` and `<prefix>.out.vec`. Both are always
    /// written: optimality checks need the output vectors.
    pub fn save<S: AsRef<str>>(&self, prefix: impl AsRef<Path>, words: &[S]) -> Result<(PathBuf, PathBuf)> {
        if words.len() != self.num_words {
            return Err(Error::InvalidParameter(format!(
                "{} words for {} vectors",
                words.len(),
                self.num_words
            )));
        }
        let (in_path, out_path) = vec_paths(prefix);
        write_vec_file(&in_path, words, &self.input, self.dim)?;
        write_vec_file(&out_path, words, &self.output, self.dim)?;
        Ok((in_path, out_path))
    }

    /// Load both vector files written by [`EmbeddingSet::save`]. Returns the
    /// word list alongside the vectors.
    pub fn load(prefix: impl AsRef<Path>) -> Result<(Vec<String>, Self)> {
        let (in_path, out_path) = vec_paths(prefix);
        if !out_path.exists() {
            return Err(Error::io(
                &out_path,
                std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    "output vectors are required to compare estimated against ground-truth \
                     context probabilities, but the .out.vec file is missing",
                ),
            ));
        }
        let (words, dim, input) = read_vec_file(&in_path)?;
        let (out_words, out_dim, output) = read_vec_file(&out_path)?;
        if out_words != words || out_dim != dim {
            return Err(Error::parse(
                &out_path,
                1,
                "word list or dimension differs from the .in.vec file",
            ));
        }
        let set = EmbeddingSet::from_matrices(words.len(), dim, input, output)?;
        Ok((words, set))
    }
}

fn check_shape(num_words: usize, dim: usize) -> Result<()> {
    if num_words == 0 || dim == 0 {
        return Err(Error::InvalidParameter(format!(
            "embedding shape must be positive, got {num_words}x{dim}"
        )));
    }
    Ok(())
}

pub fn vec_paths(prefix: impl AsRef<Path>) -> (PathBuf, PathBuf) {
    let prefix = prefix.as_ref().as_os_str();
    let mut in_path = prefix.to_owned();
    in_path.push(".in.vec");
    let mut out_path = prefix.to_owned();
    out_path.push(".out.vec");
    (in_path.into(), out_path.into())
}

/// Header `W dim`, then `word v_1 ... v_dim` per line. Values use the
/// shortest representation that round-trips exactly.
pub fn write_vec<W: Write, S: AsRef<str>>(mut out: W, words: &[S], matrix: &[f64], dim: usize) -> std::io::Result<()> {
    writeln!(out, "{} {}", words.len(), dim)?;
    for (word, row) in words.iter().zip(matrix.chunks(dim)) {
        write!(out, "{}", word.as_ref())?;
        for x in row {
            write!(out, " {x}")?;
        }
        writeln!(out)?;
    }
    out.flush()
}

fn write_vec_file<S: AsRef<str>>(path: &Path, words: &[S], matrix: &[f64], dim: usize) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_vec(BufWriter::new(file), words, matrix, dim).map_err(|e| Error::io(path, e))
}

pub fn read_vec<R: BufRead>(input: R, origin: &Path) -> Result<(Vec<String>, usize, Vec<f64>)> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse(origin, 1, "missing `W dim` header"))?
        .map_err(|e| Error::io(origin, e))?;
    let mut parts = header.split_whitespace().map(str::parse::<usize>);
    let (Some(Ok(num_words)), Some(Ok(dim)), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(Error::parse(origin, 1, format!("bad header {header:?}")));
    };

    let mut words = Vec::with_capacity(num_words);
    let mut matrix = Vec::with_capacity(num_words * dim);
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(' ');
        let word = fields.next().unwrap_or_default();
        let before = matrix.len();
        for field in fields {
            let x: f64 = field
                .parse()
                .map_err(|_| Error::parse(origin, lineno, format!("bad number {field:?}")))?;
            matrix.push(x);
        }
        if matrix.len() - before != dim {
            return Err(Error::parse(
                origin,
                lineno,
                format!("expected {dim} values, got {}", matrix.len() - before),
            ));
        }
        words.push(word.to_owned());
    }
    if words.len() != num_words {
        return Err(Error::parse(
            origin,
            1,
            format!("header promises {num_words} words, file has {}", words.len()),
        ));
    }
    Ok((words, dim, matrix))
}

fn read_vec_file(path: &Path) -> Result<(Vec<String>, usize, Vec<f64>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_vec(BufReader::new(file), path)
}
