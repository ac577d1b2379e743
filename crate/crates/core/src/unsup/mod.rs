//! Unsupervised features: bi-gram and sentence vectors, k-means codebooks,
//! and the discrete cluster-id feature groups D, G, H, J, K, L and M.

mod compose;
mod features;
mod kmeans;

pub use compose::{compose_span_vector, SequenceVector, PAD_TOKEN};
pub use features::{emit_unsup_features, Apply, GroupSpec, UnsupFeatureConfig, UnsupResources, UNSUP_LETTERS};
pub use kmeans::{
    assign_cluster, kmeans, kmeans_with_trace, read_codebook, write_codebook, Codebook,
    KmeansTrace, SpaceTag,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum UnsupError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("need at least {k} distinct vectors, found {distinct}")]
    TooFewDistinct { k: usize, distinct: usize },
    #[error("dimension mismatch: vector has {got}, codebook expects {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("no codebook for enabled group {0}")]
    MissingCodebook(char),
    #[error("malformed codebook at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("unknown space tag `{0}`")]
    UnknownSpace(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
