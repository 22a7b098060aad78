//! A laboratory for the skip-gram word embedding model.
//!
//! The crate trains the exact full-softmax model and its negative-sampling
//! approximation, and compares the trained conditional distributions
//! `p^(w | center)` against the corpus co-occurrence probabilities they
//! should converge to.
//!
//! Pipeline: [`corpus`] turns text into ids, [`cooccur`] counts windows,
//! [`softmax`] and [`sgns`] train, [`analysis`] validates.

pub mod analysis;
pub mod cli;
pub mod cooccur;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod sgns;
pub mod softmax;

pub use cooccur::{Boundary, CooccurrenceTable, ProbMode};
pub use corpus::{tokenize, TokenSequence, Vocabulary, WordId};
pub use embedding::EmbeddingSet;
pub use error::{Error, Result};

/// The little-star song, a 36-token toy corpus with 26 distinct words.
pub const LITTLE_STAR: &str = "Every person had a star, every star had a friend, and for every \
person carrying a star there was someone else who reflected it, and everyone carried this \
reflection like a secret confidante in the heart.";
