//! Phrase-level scoring and the 5×2 cross-validated paired t-test.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ConceptSpan;

/// Two-tailed critical value of Student's t with 5 degrees of freedom at α = 0.05.
pub const T_CRITICAL_DF5: f64 = 2.571;

/// Variance sums at or below this are treated as exactly zero, so that
/// differences equal up to rounding still hit the degenerate rule.
const ZERO_VARIANCE: f64 = 1e-20;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("gold has {gold} sentences but prediction has {pred}")]
    Misaligned { gold: usize, pred: usize },
    #[error("need at least 2 sequences to split, got {0}")]
    TooFewSequences(usize),
}

/// Micro-averaged precision, recall and F1 with the underlying counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Prf {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Prf {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        Prf {
            precision,
            recall,
            f1: f1_score(precision, recall),
            tp,
            fp,
            fn_,
        }
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn check_aligned<T>(gold: &[T], pred: &[T]) -> Result<(), EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::Misaligned {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    Ok(())
}

fn count_matches(gold: &[ConceptSpan], pred: &[ConceptSpan]) -> usize {
    // Spans within a sentence are distinct, so set intersection is exact.
    pred.iter().filter(|p| gold.contains(p)).count()
}

/// Exact-match phrase scoring, micro-averaged over every concept type.
pub fn phrase_prf(gold: &[Vec<ConceptSpan>], pred: &[Vec<ConceptSpan>]) -> Result<Prf, EvalError> {
    check_aligned(gold, pred)?;
    let (mut tp, mut n_gold, mut n_pred) = (0, 0, 0);
    for (g, p) in gold.iter().zip(pred) {
        tp += count_matches(g, p);
        n_gold += g.len();
        n_pred += p.len();
    }
    Ok(Prf::from_counts(tp, n_pred - tp, n_gold - tp))
}

/// The same scoring restricted to each concept type in turn.
pub fn phrase_prf_by_type(
    gold: &[Vec<ConceptSpan>],
    pred: &[Vec<ConceptSpan>],
) -> Result<BTreeMap<String, Prf>, EvalError> {
    check_aligned(gold, pred)?;
    let mut counts: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    for (g, p) in gold.iter().zip(pred) {
        for s in g {
            let c = counts.entry(s.concept_type.clone()).or_default();
            c.2 += 1;
            if p.contains(s) {
                c.0 += 1;
            }
        }
        for s in p {
            counts.entry(s.concept_type.clone()).or_default().1 += 1;
        }
    }
    Ok(counts
        .into_iter()
        .map(|(t, (tp, n_pred, n_gold))| (t, Prf::from_counts(tp, n_pred - tp, n_gold - tp)))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub degrees_of_freedom: usize,
    pub significant_at_05: bool,
    /// `differences[i][j] = f1_a[i][j] - f1_b[i][j]`.
    pub differences: [[f64; 2]; 5],
}

/// Dietterich's 5×2cv paired t-test on per-fold F1 scores.
///
/// When every fold variance is zero the statistic is undefined; a nonzero
/// first difference is reported as an infinite `t` carrying its sign, and an
/// all-zero difference matrix as `t = 0`.
pub fn five_by_two_ttest(f1_a: &[[f64; 2]; 5], f1_b: &[[f64; 2]; 5]) -> TTestResult {
    let mut differences = [[0.0; 2]; 5];
    for i in 0..5 {
        for j in 0..2 {
            differences[i][j] = f1_a[i][j] - f1_b[i][j];
        }
    }
    let variance_sum: f64 = differences
        .iter()
        .map(|[p1, p2]| {
            let mean = (p1 + p2) / 2.0;
            (p1 - mean).powi(2) + (p2 - mean).powi(2)
        })
        .sum();
    let p11 = differences[0][0];
    let t = if variance_sum <= ZERO_VARIANCE {
        if p11 == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(p11)
        }
    } else {
        p11 / (variance_sum / 5.0).sqrt()
    };
    TTestResult {
        t_statistic: t,
        degrees_of_freedom: 5,
        significant_at_05: t.abs() > T_CRITICAL_DF5,
        differences,
    }
}

/// One 2-fold split: both halves of the index set.
pub type Halving = (Vec<usize>, Vec<usize>);

/// Five independent random halvings of `0..n`, each as `(first, second)`
/// with both halves sorted.
pub fn make_5x2_splits(n: usize, seed: u64) -> Result<Vec<Halving>, EvalError> {
    if n < 2 {
        return Err(EvalError::TooFewSequences(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..5)
        .map(|_| {
            let mut ids: Vec<usize> = (0..n).collect();
            ids.shuffle(&mut rng);
            let mut a = ids[..n / 2].to_vec();
            let mut b = ids[n / 2..].to_vec();
            a.sort_unstable();
            b.sort_unstable();
            (a, b)
        })
        .collect())
}
