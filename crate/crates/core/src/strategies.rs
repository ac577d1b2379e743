//! Query strategies: scoring pool candidates and picking the next batch.
//!
//! | name   | final score                                  |
//! |--------|----------------------------------------------|
//! | `rs`   | none, uniform sample                         |
//! | `lc`   | `u`                                          |
//! | `idiv` | `u · div`                                    |
//! | `idd`  | `u · dens^β · div`                           |
//! | `dki`  | `(1 − λ) · u + λ · dk`                       |
//!
//! with `u = 1 − P(y*|x)`, `div = 1 − max(0, max_l sim(x, l))` over the
//! labeled set, `dens` the mean non-negative similarity to the rest of the
//! pool, and `dk` the lexicon coverage of the sentence.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Sentence;
use crate::crf::{sequence_confidence, CrfModel};
use crate::featgen::{semantic_spans, FeatureVector, Lexicon};
use crate::math;
use crate::unsup::{compose_span_vector, SequenceVector};
use crate::vectors::{EmbeddingTable, LexicalTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Rs,
    Lc,
    IDiv,
    Idd,
    Dki,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [Strategy::Rs, Strategy::Lc, Strategy::IDiv, Strategy::Idd, Strategy::Dki];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Rs => "rs",
            Strategy::Lc => "lc",
            Strategy::IDiv => "idiv",
            Strategy::Idd => "idd",
            Strategy::Dki => "dki",
        }
    }

    pub fn needs_model(self) -> bool {
        self != Strategy::Rs
    }

    pub fn needs_similarity(self) -> bool {
        matches!(self, Strategy::IDiv | Strategy::Idd)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnknownStrategy(pub String);

impl fmt::Display for UnknownStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown strategy `{}` (expected rs, lc, idiv, idd or dki)", self.0)
    }
}

impl std::error::Error for UnknownStrategy {}

impl FromStr for Strategy {
    type Err = UnknownStrategy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownStrategy(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyParams {
    /// Exponent on the density term of IDD.
    pub beta: f64,
    /// Weight of domain knowledge in DKI.
    pub lambda: f64,
}

impl Default for StrategyParams {
    fn default() -> Self {
        StrategyParams { beta: 1.0, lambda: 0.5 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub seq_id: usize,
    pub uncertainty: f64,
    pub diversity: f64,
    pub density: f64,
    pub domain_knowledge: f64,
    pub final_score: f64,
}

impl ScoredCandidate {
    /// Combines component scores under `strategy`. Components a strategy
    /// does not use are ignored.
    pub fn combine(
        strategy: Strategy,
        params: &StrategyParams,
        seq_id: usize,
        uncertainty: f64,
        diversity: f64,
        density: f64,
        domain_knowledge: f64,
    ) -> ScoredCandidate {
        let final_score = match strategy {
            Strategy::Rs => 0.0,
            Strategy::Lc => uncertainty,
            Strategy::IDiv => uncertainty * diversity,
            Strategy::Idd => uncertainty * density.powf(params.beta) * diversity,
            Strategy::Dki => (1.0 - params.lambda) * uncertainty + params.lambda * domain_knowledge,
        };
        ScoredCandidate {
            seq_id,
            uncertainty,
            diversity,
            density,
            domain_knowledge,
            final_score,
        }
    }
}

/// `1 − P(y*|x)` under the model.
pub fn score_lc(model: &CrfModel, features: &FeatureVector) -> f64 {
    let u = 1.0 - sequence_confidence(model, &model.encode(features));
    u.clamp(0.0, 1.0)
}

/// The combined sentence vector used by every similarity-based strategy.
pub fn sentence_vector(sentence: &Sentence, emb: &EmbeddingTable, lex: &LexicalTable) -> SequenceVector {
    let keys: Vec<String> = sentence.tokens.iter().map(|t| t.vector_key()).collect();
    compose_span_vector(&keys, emb, lex)
}

/// Cosine of the combined vectors; symmetric, in `[-1, 1]`.
pub fn sentence_similarity(a: &SequenceVector, b: &SequenceVector) -> f64 {
    math::cosine(a.combined.as_slice(), b.combined.as_slice())
}

/// `1 − max(0, max similarity to the labeled set)`; 1 for an empty set.
pub fn diversity<'a>(candidate: &SequenceVector, labeled: impl IntoIterator<Item = &'a SequenceVector>) -> f64 {
    let max_sim = labeled
        .into_iter()
        .map(|l| sentence_similarity(candidate, l))
        .fold(0.0, f64::max);
    1.0 - max_sim
}

/// Mean of `max(0, similarity)` to the other pool members; 1 if there are none.
pub fn density<'a>(candidate: &SequenceVector, others: impl IntoIterator<Item = &'a SequenceVector>) -> f64 {
    let (sum, n) = others
        .into_iter()
        .fold((0.0, 0usize), |(s, n), u| (s + sentence_similarity(candidate, u).max(0.0), n + 1));
    if n == 0 {
        1.0
    } else {
        sum / n as f64
    }
}

pub fn score_idiv<'a>(
    uncertainty: f64,
    candidate: &SequenceVector,
    labeled: impl IntoIterator<Item = &'a SequenceVector>,
) -> f64 {
    uncertainty * diversity(candidate, labeled)
}

/// `others` is the pool without the candidate itself.
pub fn score_idd<'a>(
    uncertainty: f64,
    candidate: &SequenceVector,
    labeled: impl IntoIterator<Item = &'a SequenceVector>,
    others: impl IntoIterator<Item = &'a SequenceVector>,
    params: &StrategyParams,
) -> f64 {
    uncertainty * density(candidate, others).powf(params.beta) * diversity(candidate, labeled)
}

/// Share of the sentence covered by lexicon spans, weighted by span length
/// and scaled by the longest lexicon entry; in `[0, 1]`.
pub fn domain_knowledge(sentence: &Sentence, lexicon: &Lexicon) -> f64 {
    let max_len = lexicon.max_len();
    if max_len == 0 || sentence.tokens.is_empty() {
        return 0.0;
    }
    let total: usize = semantic_spans(sentence, lexicon).iter().map(|t| t.span_len).sum();
    (total as f64 / (sentence.len() * max_len) as f64).clamp(0.0, 1.0)
}

pub fn score_dki(uncertainty: f64, sentence: &Sentence, lexicon: &Lexicon, params: &StrategyParams) -> f64 {
    (1.0 - params.lambda) * uncertainty + params.lambda * domain_knowledge(sentence, lexicon)
}

/// Picks up to `batch_size` sequence ids. RS samples uniformly without
/// replacement from `seed`; the rest take the highest final scores, ties
/// broken toward the lower `seq_id`. The result is in selection order.
pub fn select_batch(scores: &[ScoredCandidate], batch_size: usize, strategy: Strategy, seed: u64) -> Vec<usize> {
    let b = batch_size.min(scores.len());
    if strategy == Strategy::Rs {
        let mut ids: Vec<usize> = scores.iter().map(|c| c.seq_id).collect();
        ids.sort_unstable();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        return sample(&mut rng, ids.len(), b).into_iter().map(|i| ids[i]).collect();
    }
    let mut ranked: Vec<&ScoredCandidate> = scores.iter().collect();
    ranked.sort_by(|a, b| {
        b.final_score
            .total_cmp(&a.final_score)
            .then(a.seq_id.cmp(&b.seq_id))
    });
    ranked.into_iter().take(b).map(|c| c.seq_id).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{BioTag, Token};
    use crate::crf::CrfModel;
    use crate::vectors::DenseVector;
    use proptest::prelude::{prop, prop_assert, prop_assert_eq, prop_assume, proptest};
    use super::Strategy;

    fn sv(v: &[f64]) -> SequenceVector {
        let c = DenseVector(math::normalized(v));
        SequenceVector {
            lex_part: c.clone(),
            word_part: DenseVector(vec![]),
            combined: c,
        }
    }

    fn sentence(words: &[&str]) -> Sentence {
        Sentence {
            tokens: words.iter().map(|w| Token::new(w, None, BioTag::Outside)).collect(),
            doc_id: "d".into(),
            seq_id: 0,
        }
    }

    fn cand(seq_id: usize, score: f64) -> ScoredCandidate {
        ScoredCandidate::combine(Strategy::Lc, &StrategyParams::default(), seq_id, score, 1.0, 1.0, 0.0)
    }

    #[test]
    fn names_parse_case_insensitively() {
        for s in Strategy::ALL {
            assert_eq!(s.name().to_uppercase().parse::<Strategy>().unwrap(), s);
            assert_eq!(s.to_string().parse::<Strategy>().unwrap(), s);
        }
        assert!("qbc".parse::<Strategy>().is_err());
    }

    #[test]
    fn lc_on_uniform_model() {
        let model = CrfModel::with_alphabets(vec!["O".into(), "B-X".into()], vec![], 10.0);
        let fv = FeatureVector {
            tokens: vec![vec![], vec![]],
        };
        assert!((score_lc(&model, &fv) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn similarity_basics() {
        let a = sv(&[1.0, 2.0, 0.5]);
        assert!((sentence_similarity(&a, &a) - 1.0).abs() < 1e-9);
        assert_eq!(sentence_similarity(&sv(&[1.0, 0.0]), &sv(&[0.0, 3.0])), 0.0);
        let b = sv(&[-0.3, 1.0, 2.0]);
        let brute = math::dot(&math::normalized(&[1.0, 2.0, 0.5]), &math::normalized(&[-0.3, 1.0, 2.0]));
        assert!((sentence_similarity(&a, &b) - brute).abs() < 1e-12);
        assert_eq!(sentence_similarity(&a, &b), sentence_similarity(&b, &a));
    }

    #[test]
    fn idiv_cases() {
        let x = sv(&[1.0, 1.0, 0.0]);
        let labeled = [sv(&[0.0, 0.0, 1.0]), sv(&[1.0, 1.0, 0.0])];
        assert!(score_idiv(0.8, &x, &labeled).abs() < 1e-12);
        assert_eq!(score_idiv(0.8, &x, &[]), 0.8);
        let three = [sv(&[1.0, 0.0, 0.0]), sv(&[0.0, 1.0, 0.2]), sv(&[0.5, -1.0, 0.0])];
        let max_sim = three.iter().map(|l| math::dot(&x.combined.0, &l.combined.0)).fold(f64::MIN, f64::max);
        assert!((score_idiv(0.5, &x, &three) - 0.5 * (1.0 - max_sim)).abs() < 1e-12);
    }

    #[test]
    fn idd_cases() {
        let p = StrategyParams::default();
        let x = sv(&[1.0, 0.0]);
        let orth = [sv(&[0.0, 1.0]), sv(&[0.0, -2.0])];
        assert_eq!(score_idd(0.9, &x, &[], &orth, &p), 0.0);
        let dups = [x.clone(), x.clone(), x.clone()];
        let labeled = [sv(&[1.0, 1.0])];
        let idd = score_idd(0.9, &x, &labeled, &dups, &p);
        assert!((idd - score_idiv(0.9, &x, &labeled)).abs() < 1e-12);
        assert_eq!(density(&x, &[]), 1.0);
        let pool: Vec<SequenceVector> = [[1.0, 0.2], [0.3, 1.0], [-1.0, 0.1], [0.7, 0.7], [0.0, 1.0]]
            .iter()
            .map(|v| sv(v))
            .collect();
        let brute: f64 = pool.iter().map(|u| math::dot(&x.combined.0, &u.combined.0).max(0.0)).sum::<f64>() / 5.0;
        assert!((density(&x, &pool) - brute).abs() < 1e-12);
    }

    #[test]
    fn dki_cases() {
        let p = StrategyParams::default();
        let mut lex = Lexicon::new();
        lex.insert("atrial fibrillation", "DISO");
        let s = sentence(&["has", "atrial", "fibrillation"]);
        assert!((domain_knowledge(&s, &lex) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(score_dki(0.6, &sentence(&["no", "match"]), &lex, &p), 0.3);
        assert_eq!(domain_knowledge(&sentence(&["atrial", "fibrillation"]), &lex), 1.0);
        assert_eq!(score_dki(0.6, &s, &Lexicon::new(), &p), 0.3);
    }

    #[test]
    fn selection_rules() {
        let scores = vec![cand(4, 0.2), cand(1, 0.9), cand(2, 0.9), cand(3, 0.5)];
        assert_eq!(select_batch(&scores, 2, Strategy::Lc, 0), vec![1, 2]);
        assert_eq!(select_batch(&scores, 3, Strategy::Lc, 0), vec![1, 2, 3]);
        let mut all = select_batch(&scores, 10, Strategy::Lc, 0);
        all.sort_unstable();
        assert_eq!(all, vec![1, 2, 3, 4]);
        let rs = select_batch(&scores, 2, Strategy::Rs, 7);
        assert_eq!(rs, select_batch(&scores, 2, Strategy::Rs, 7));
        assert_eq!(rs.len(), 2);
        assert_ne!(rs[0], rs[1]);
    }

    proptest! {
        #[test]
        fn lc_selection_survives_monotone_rescaling(
            confs in prop::collection::vec(0.0f64..1.0, 1..40),
            b in 1usize..10,
        ) {
            let p = StrategyParams::default();
            let build = |f: &dyn Fn(f64) -> f64| -> Vec<ScoredCandidate> {
                confs.iter().enumerate()
                    .map(|(i, &c)| ScoredCandidate::combine(Strategy::Lc, &p, i, 1.0 - f(c), 1.0, 1.0, 0.0))
                    .collect()
            };
            let base = select_batch(&build(&|c| c), b, Strategy::Lc, 0);
            let scaled = select_batch(&build(&|c| 0.5 * c + 0.25), b, Strategy::Lc, 0);
            prop_assert_eq!(base, scaled);
        }

        #[test]
        fn scores_are_bounded(
            u in 0.0f64..1.0,
            c in prop::collection::vec(-1.0f64..1.0, 3),
            pool in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 0..6),
            labeled in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 0..6),
        ) {
            prop_assume!(math::norm(&c) > 1e-3);
            let p = StrategyParams::default();
            let x = sv(&c);
            let pool: Vec<_> = pool.iter().filter(|v| math::norm(v) > 1e-3).map(|v| sv(v)).collect();
            let labeled: Vec<_> = labeled.iter().filter(|v| math::norm(v) > 1e-3).map(|v| sv(v)).collect();
            let idiv = score_idiv(u, &x, &labeled);
            let idd = score_idd(u, &x, &labeled, &pool, &p);
            prop_assert!(idiv.is_finite() && idiv >= 0.0 && idiv <= u + 1e-12);
            prop_assert!(idd.is_finite() && idd >= 0.0 && idd <= idiv + 1e-12);
        }

        #[test]
        fn idiv_matches_lc_without_labels(
            us in prop::collection::vec(0.0f64..1.0, 1..30),
            b in 1usize..8,
        ) {
            let p = StrategyParams::default();
            let x = sv(&[1.0, 0.0]);
            let lc: Vec<_> = us.iter().enumerate()
                .map(|(i, &u)| ScoredCandidate::combine(Strategy::Lc, &p, i, u, 1.0, 1.0, 0.0)).collect();
            let idiv: Vec<_> = us.iter().enumerate()
                .map(|(i, &u)| ScoredCandidate::combine(Strategy::IDiv, &p, i, u, diversity(&x, &[]), 1.0, 0.0))
                .collect();
            prop_assert_eq!(select_batch(&lc, b, Strategy::Lc, 0), select_batch(&idiv, b, Strategy::IDiv, 0));
        }
    }
}
