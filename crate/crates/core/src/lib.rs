//! Active-learning workbench for sequence labeling.
//!
//! The pipeline has four layers:
//!
//! * [`corpus`] reads BIO-labeled CoNLL-style data and counts annotation units.
//! * [`vectors`] and [`unsup`] turn an unlabeled text stream into skip-gram
//!   embeddings, character n-gram lexical vectors, bi-gram and sentence
//!   vectors, and k-means codebooks that quantize them into discrete features.
//! * [`featgen`] assembles hand-crafted (A/B/C) and cluster (D..M) feature
//!   strings per token; [`crf`] trains and decodes a linear-chain CRF on them.
//! * [`strategies`], [`alloop`] and [`eval`] run pool-based active learning
//!   and measure the annotation effort needed to reach a supervised target.
//!
//! [`cli`] ties the layers to files, caches and reports; the `activecrf`
//! binary is a thin wrapper around it.

pub mod alloop;
pub mod cli;
pub mod corpus;
pub mod crf;
pub mod eval;
pub mod featgen;
pub mod math;
pub mod strategies;
pub mod unsup;
pub mod vectors;

use thiserror::Error;

pub use alloop::{ActiveLearner, AlState, AnnotationRates, HistoryRow};
pub use corpus::{ConceptSpan, Corpus, Sentence, Token, UnitCounts};
pub use crf::{CrfConfig, CrfModel};
pub use eval::{Prf, TTestResult};
pub use featgen::{FeatureGroupConfig, FeatureVector, Featurizer, Lexicon};
pub use strategies::{ScoredCandidate, Strategy};
pub use unsup::{Codebook, SequenceVector, SpaceTag};
pub use vectors::{DenseVector, EmbeddingTable, LexicalTable};

/// Crate-wide error, one variant per subsystem.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
    #[error(transparent)]
    Vectors(#[from] vectors::VectorError),
    #[error(transparent)]
    Unsup(#[from] unsup::UnsupError),
    #[error(transparent)]
    Featgen(#[from] featgen::FeatgenError),
    #[error(transparent)]
    Crf(#[from] crf::CrfError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
    #[error(transparent)]
    Al(#[from] alloop::AlError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
