//! Linear-chain conditional random field.
//!
//! Scores are log-linear in a weight vector laid out as
//! `[emission F×L | transition L×L | start L | stop L]`, where feature 0 is
//! an implicit bias present at every position. Training maximizes the
//! Gaussian-penalized conditional log-likelihood with L-BFGS from a zero
//! start; inference is exact by dynamic programming in log space.

mod inference;
mod io;
pub mod lbfgs;
mod train;

pub use inference::{forward_backward, sequence_confidence, viterbi, Lattice};
pub use io::{read_model, write_model, MODEL_MAGIC};
pub use train::{
    log_likelihood_and_gradient, train, train_from, unpenalized_log_likelihood_and_gradient,
    CrfConfig, Example, TrainReport,
};

use std::collections::HashMap;

use thiserror::Error;

use crate::featgen::FeatureVector;

pub const BIAS_FEATURE: &str = "<bias>";

#[derive(Debug, Error)]
pub enum CrfError {
    #[error("no training data")]
    EmptyData,
    #[error("sequence {sequence}: {features} feature rows but {labels} labels")]
    LengthMismatch {
        sequence: usize,
        features: usize,
        labels: usize,
    },
    #[error("sequence {sequence}: label `{label}` is not in the model alphabet")]
    UnknownLabel { sequence: usize, label: String },
    #[error("non-finite objective at sequence {sequence}")]
    NonFinite { sequence: usize },
    #[error("weight vector has {got} entries, model expects {expected}")]
    WeightLength { expected: usize, got: usize },
    #[error("malformed model file at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// A featurized sequence under a model's alphabets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedSequence {
    /// Feature indices per position; always starts with the bias.
    pub features: Vec<Vec<u32>>,
    pub labels: Option<Vec<usize>>,
}

impl EncodedSequence {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrfModel {
    labels: Vec<String>,
    label_index: HashMap<String, usize>,
    features: Vec<String>,
    feature_index: HashMap<String, u32>,
    weights: Vec<f64>,
    sigma2: f64,
}

impl CrfModel {
    /// A zero-weight model over the given alphabets. The bias feature is
    /// prepended to `features` if absent.
    pub fn with_alphabets(labels: Vec<String>, features: Vec<String>, sigma2: f64) -> CrfModel {
        let mut feats = Vec::with_capacity(features.len() + 1);
        feats.push(BIAS_FEATURE.to_string());
        feats.extend(features.into_iter().filter(|f| f != BIAS_FEATURE));
        let label_index = labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        let feature_index = feats.iter().enumerate().map(|(i, f)| (f.clone(), i as u32)).collect();
        let n_weights = feats.len() * labels.len() + labels.len() * labels.len() + 2 * labels.len();
        CrfModel {
            labels,
            label_index,
            features: feats,
            feature_index,
            weights: vec![0.0; n_weights],
            sigma2,
        }
    }

    /// Alphabets from a training set: labels ordered `O` first then
    /// lexicographically; features in order of first appearance.
    pub fn alphabets_from(data: &[Example<'_>]) -> (Vec<String>, Vec<String>) {
        let mut labels: Vec<String> = data
            .iter()
            .flat_map(|e| e.labels.iter().cloned())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        if let Some(pos) = labels.iter().position(|l| l == "O") {
            let o = labels.remove(pos);
            labels.insert(0, o);
        }
        let mut seen = std::collections::HashSet::new();
        let mut features = Vec::new();
        for e in data {
            for f in e.features.tokens.iter().flatten() {
                if seen.insert(f.as_str()) {
                    features.push(f.clone());
                }
            }
        }
        (labels, features)
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn num_features(&self) -> usize {
        self.features.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn label_id(&self, label: &str) -> Option<usize> {
        self.label_index.get(label).copied()
    }

    pub fn feature_id(&self, feature: &str) -> Option<u32> {
        self.feature_index.get(feature).copied()
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn set_weights(&mut self, w: Vec<f64>) -> Result<(), CrfError> {
        if w.len() != self.weights.len() {
            return Err(CrfError::WeightLength {
                expected: self.weights.len(),
                got: w.len(),
            });
        }
        self.weights = w;
        Ok(())
    }

    pub fn num_weights(&self) -> usize {
        self.weights.len()
    }

    pub(crate) fn transition_offset(&self) -> usize {
        self.features.len() * self.labels.len()
    }

    pub(crate) fn start_offset(&self) -> usize {
        self.transition_offset() + self.labels.len() * self.labels.len()
    }

    pub(crate) fn stop_offset(&self) -> usize {
        self.start_offset() + self.labels.len()
    }

    pub fn emission_weight(&self, feature: u32, label: usize) -> f64 {
        self.weights[feature as usize * self.labels.len() + label]
    }

    pub fn transition_weight(&self, from: usize, to: usize) -> f64 {
        self.weights[self.transition_offset() + from * self.labels.len() + to]
    }

    pub fn start_weight(&self, label: usize) -> f64 {
        self.weights[self.start_offset() + label]
    }

    pub fn stop_weight(&self, label: usize) -> f64 {
        self.weights[self.stop_offset() + label]
    }

    /// Maps feature strings to indices; features outside the alphabet are ignored.
    pub fn encode(&self, fv: &FeatureVector) -> EncodedSequence {
        EncodedSequence {
            features: fv
                .tokens
                .iter()
                .map(|tok| {
                    std::iter::once(0)
                        .chain(tok.iter().filter_map(|f| self.feature_id(f)).filter(|&i| i != 0))
                        .collect()
                })
                .collect(),
            labels: None,
        }
    }

    pub fn encode_labeled(
        &self,
        fv: &FeatureVector,
        labels: &[String],
        sequence: usize,
    ) -> Result<EncodedSequence, CrfError> {
        if fv.len() != labels.len() {
            return Err(CrfError::LengthMismatch {
                sequence,
                features: fv.len(),
                labels: labels.len(),
            });
        }
        let ids = labels
            .iter()
            .map(|l| {
                self.label_id(l).ok_or_else(|| CrfError::UnknownLabel {
                    sequence,
                    label: l.clone(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut enc = self.encode(fv);
        enc.labels = Some(ids);
        Ok(enc)
    }

    /// Decodes the most probable label sequence.
    pub fn predict(&self, fv: &FeatureVector) -> Vec<String> {
        let (path, _) = viterbi(self, &self.encode(fv));
        path.into_iter().map(|i| self.labels[i].clone()).collect()
    }

    /// Unnormalized log score of a label path.
    pub fn path_score(&self, seq: &EncodedSequence, path: &[usize]) -> f64 {
        if path.is_empty() {
            return 0.0;
        }
        let mut s = self.start_weight(path[0]) + self.stop_weight(path[path.len() - 1]);
        for (t, &y) in path.iter().enumerate() {
            s += seq.features[t].iter().map(|&f| self.emission_weight(f, y)).sum::<f64>();
            if t > 0 {
                s += self.transition_weight(path[t - 1], y);
            }
        }
        s
    }
}
