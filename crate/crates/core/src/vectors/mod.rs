//! Dense token vectors: skip-gram embeddings and character n-gram lexical vectors.

mod lexical;
mod skipgram;

pub use lexical::{char_ngrams, lexical_vector, CharNgrams, LexicalTable, NgramConfig};
pub use skipgram::{
    read_embeddings, train_skipgram, train_skipgram_with_report, write_embeddings, EmbeddingTable,
    SkipGramConfig, SkipGramReport,
};

use thiserror::Error;

use crate::math;

#[derive(Debug, Error)]
pub enum VectorError {
    #[error("empty effective vocabulary")]
    EmptyVocabulary,
    #[error("dimension must be at least 2, got {0}")]
    DimTooSmall(usize),
    #[error("malformed embedding file at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("malformed lexical table description: {0}")]
    MalformedLexical(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// A dense real vector. Unit-normalized where the producing operation says so.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseVector(pub Vec<f64>);

impl DenseVector {
    pub fn zeros(dim: usize) -> DenseVector {
        DenseVector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        math::norm(&self.0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }

    pub fn normalized(&self) -> DenseVector {
        DenseVector(math::normalized(&self.0))
    }

    pub fn cosine(&self, other: &DenseVector) -> f64 {
        math::cosine(&self.0, &other.0)
    }
}

impl From<Vec<f64>> for DenseVector {
    fn from(v: Vec<f64>) -> Self {
        DenseVector(v)
    }
}
