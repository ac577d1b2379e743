//! Pool-based active learning with a simulated annotator.
//!
//! Every iteration scores the pool, moves a batch into the labeled set with
//! its gold labels, retrains the CRF from scratch and evaluates on the test
//! corpus. The run stops once test F1 reaches a target or the pool is empty.

use std::collections::BTreeSet;
use std::io::Write;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{count_units, extract_concepts, spans_from_labels, ConceptSpan, Corpus, UnitCounts};
use crate::crf::{self, CrfConfig, CrfError, CrfModel, Example};
use crate::eval::{phrase_prf, EvalError, Prf};
use crate::featgen::{FeatgenError, FeatureVector, Featurizer, Lexicon};
use crate::strategies::{self, ScoredCandidate, Strategy, StrategyParams};
use crate::unsup::SequenceVector;

#[derive(Debug, Error)]
pub enum AlError {
    #[error("training corpus is empty")]
    EmptyTrain,
    #[error("initial fraction must lie in (0, 0.01), got {0}")]
    InitFraction(f64),
    #[error("batch size must be at least 1")]
    ZeroBatch,
    #[error("annotation rate undefined: total is 0")]
    ZeroTotal,
    #[error("strategy `{strategy}` needs {what}")]
    MissingResource { strategy: Strategy, what: &'static str },
    #[error("{what} has {got} entries but the training corpus has {expected}")]
    ResourceSize {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error(transparent)]
    Crf(#[from] CrfError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Featgen(#[from] FeatgenError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlConfig {
    pub strategy: Strategy,
    pub init_fraction: f64,
    /// Defaults to the initial set size.
    pub batch_size: Option<usize>,
    pub seed: u64,
    pub params: StrategyParams,
    pub crf: CrfConfigSnapshot,
}

impl Default for AlConfig {
    fn default() -> Self {
        AlConfig {
            strategy: Strategy::Lc,
            init_fraction: 0.005,
            batch_size: None,
            seed: 1,
            params: StrategyParams::default(),
            crf: CrfConfig::default().into(),
        }
    }
}

/// Serializable mirror of [`CrfConfig`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrfConfigSnapshot {
    pub sigma2: f64,
    pub max_iters: usize,
    pub tolerance: f64,
    pub memory: usize,
}

impl From<CrfConfig> for CrfConfigSnapshot {
    fn from(c: CrfConfig) -> Self {
        CrfConfigSnapshot {
            sigma2: c.sigma2,
            max_iters: c.max_iters,
            tolerance: c.tolerance,
            memory: c.memory,
        }
    }
}

impl From<CrfConfigSnapshot> for CrfConfig {
    fn from(c: CrfConfigSnapshot) -> Self {
        CrfConfig {
            sigma2: c.sigma2,
            max_iters: c.max_iters,
            tolerance: c.tolerance,
            memory: c.memory,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iteration: usize,
    pub used: UnitCounts,
    pub sar: f64,
    pub tar: f64,
    pub car: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlState {
    pub labeled_ids: BTreeSet<usize>,
    pub pool_ids: BTreeSet<usize>,
    pub iteration: usize,
    pub history: Vec<HistoryRow>,
    pub seed: u64,
}

impl AlState {
    pub fn labeled_units(&self, train: &Corpus) -> UnitCounts {
        count_units(self.labeled_ids.iter().map(|&i| &train.sentences[i]))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRates {
    pub sar: f64,
    pub tar: f64,
    pub car: f64,
    pub reached: bool,
    pub target_f1: f64,
    /// First iteration whose test F1 met the target.
    pub iteration: Option<usize>,
}

/// `100 · used / total`.
pub fn annotation_rate(used: usize, total: usize) -> Result<f64, AlError> {
    if total == 0 {
        return Err(AlError::ZeroTotal);
    }
    Ok(100.0 * used as f64 / total as f64)
}

pub fn initial_size(n: usize, init_fraction: f64) -> usize {
    ((init_fraction * n as f64).round() as usize).clamp(1, n.max(1))
}

/// Uniformly samples `max(1, round(f·n))` sequences as the initial labeled set.
pub fn init_split(n: usize, init_fraction: f64, seed: u64) -> Result<AlState, AlError> {
    if n == 0 {
        return Err(AlError::EmptyTrain);
    }
    if !(init_fraction > 0.0 && init_fraction < 0.01) {
        return Err(AlError::InitFraction(init_fraction));
    }
    let k = initial_size(n, init_fraction);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labeled_ids: BTreeSet<usize> = sample(&mut rng, n, k).into_iter().collect();
    let pool_ids = (0..n).filter(|i| !labeled_ids.contains(i)).collect();
    Ok(AlState {
        labeled_ids,
        pool_ids,
        iteration: 0,
        history: Vec::new(),
        seed,
    })
}

/// Per-iteration seed for random selection.
fn iteration_seed(seed: u64, iteration: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (iteration as u64).wrapping_add(1).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// Similarity bookkeeping updated as sequences leave the pool, so each
/// iteration costs `O(pool × batch)` similarities instead of `O(pool²)`.
struct SimilarityIndex {
    vectors: Vec<SequenceVector>,
    /// Max of `max(0, sim)` to the labeled set, per train id.
    max_labeled: Vec<f64>,
    /// Sum of `max(0, sim)` to the other pool members, if density is needed.
    density_sum: Option<Vec<f64>>,
}

impl SimilarityIndex {
    fn new(vectors: Vec<SequenceVector>, state: &AlState, with_density: bool) -> SimilarityIndex {
        let n = vectors.len();
        let sim = |a: usize, b: usize| strategies::sentence_similarity(&vectors[a], &vectors[b]).max(0.0);
        let mut max_labeled = vec![0.0; n];
        for &p in &state.pool_ids {
            max_labeled[p] = state.labeled_ids.iter().map(|&l| sim(p, l)).fold(0.0, f64::max);
        }
        let density_sum = with_density.then(|| {
            let pool: Vec<usize> = state.pool_ids.iter().copied().collect();
            let mut sums = vec![0.0; n];
            for (i, &a) in pool.iter().enumerate() {
                for &b in &pool[i + 1..] {
                    let s = sim(a, b);
                    sums[a] += s;
                    sums[b] += s;
                }
            }
            sums
        });
        SimilarityIndex {
            vectors,
            max_labeled,
            density_sum,
        }
    }

    fn move_to_labeled(&mut self, batch: &[usize], remaining_pool: &BTreeSet<usize>) {
        for &p in remaining_pool {
            for &b in batch {
                let s = strategies::sentence_similarity(&self.vectors[p], &self.vectors[b]).max(0.0);
                if s > self.max_labeled[p] {
                    self.max_labeled[p] = s;
                }
                if let Some(d) = self.density_sum.as_mut() {
                    d[p] = (d[p] - s).max(0.0);
                }
            }
        }
    }

    fn diversity(&self, id: usize) -> f64 {
        1.0 - self.max_labeled[id]
    }

    fn density(&self, id: usize, pool_len: usize) -> f64 {
        match &self.density_sum {
            Some(d) if pool_len > 1 => (d[id] / (pool_len - 1) as f64).min(1.0),
            _ => 1.0,
        }
    }
}

/// Inputs beyond the features that some strategies need.
#[derive(Clone, Debug, Default)]
pub struct StrategyResources {
    /// One sentence vector per training sequence, indexed by `seq_id`.
    pub sentence_vectors: Option<Vec<SequenceVector>>,
    pub lexicon: Option<Lexicon>,
}

/// Drives one active-learning run over fixed train and test corpora.
pub struct ActiveLearner {
    train: Corpus,
    train_features: Vec<FeatureVector>,
    train_labels: Vec<Vec<String>>,
    test_features: Vec<FeatureVector>,
    test_gold: Vec<Vec<ConceptSpan>>,
    cfg: AlConfig,
    lexicon: Option<Lexicon>,
    index: Option<SimilarityIndex>,
    pending_vectors: Option<Vec<SequenceVector>>,
    model: Option<CrfModel>,
}

impl ActiveLearner {
    pub fn new(
        train: Corpus,
        test: &Corpus,
        featurizer: &Featurizer,
        resources: StrategyResources,
        cfg: AlConfig,
    ) -> Result<ActiveLearner, AlError> {
        let train_features = featurizer.featurize_all(&train.sentences)?;
        let test_features = featurizer.featurize_all(&test.sentences)?;
        Self::from_features(train, train_features, test, test_features, resources, cfg)
    }

    /// Like [`ActiveLearner::new`] with features computed by the caller.
    pub fn from_features(
        train: Corpus,
        train_features: Vec<FeatureVector>,
        test: &Corpus,
        test_features: Vec<FeatureVector>,
        resources: StrategyResources,
        cfg: AlConfig,
    ) -> Result<ActiveLearner, AlError> {
        if train.sentences.is_empty() {
            return Err(AlError::EmptyTrain);
        }
        if cfg.batch_size == Some(0) {
            return Err(AlError::ZeroBatch);
        }
        let n = train.sentences.len();
        if cfg.strategy.needs_similarity() {
            match &resources.sentence_vectors {
                None => {
                    return Err(AlError::MissingResource {
                        strategy: cfg.strategy,
                        what: "sentence vectors",
                    })
                }
                Some(v) if v.len() != n => {
                    return Err(AlError::ResourceSize {
                        what: "sentence vectors",
                        expected: n,
                        got: v.len(),
                    })
                }
                _ => {}
            }
        }
        if cfg.strategy == Strategy::Dki && resources.lexicon.is_none() {
            return Err(AlError::MissingResource {
                strategy: cfg.strategy,
                what: "a lexicon",
            });
        }
        for (what, got, expected) in [
            ("train features", train_features.len(), n),
            ("test features", test_features.len(), test.sentences.len()),
        ] {
            if got != expected {
                return Err(AlError::ResourceSize { what, expected, got });
            }
        }
        Ok(ActiveLearner {
            train_labels: train.sentences.iter().map(|s| s.labels()).collect(),
            test_gold: test.sentences.iter().map(extract_concepts).collect(),
            train,
            train_features,
            test_features,
            cfg,
            lexicon: resources.lexicon,
            index: None,
            pending_vectors: resources.sentence_vectors,
            model: None,
        })
    }

    pub fn config(&self) -> &AlConfig {
        &self.cfg
    }

    pub fn train_corpus(&self) -> &Corpus {
        &self.train
    }

    pub fn model(&self) -> Option<&CrfModel> {
        self.model.as_ref()
    }

    pub fn batch_size(&self) -> usize {
        self.cfg
            .batch_size
            .unwrap_or_else(|| initial_size(self.train.sentences.len(), self.cfg.init_fraction))
    }

    /// Draws the initial labeled set, trains on it and records iteration 0.
    pub fn start(&mut self) -> Result<AlState, AlError> {
        let mut state = init_split(self.train.sentences.len(), self.cfg.init_fraction, self.cfg.seed)?;
        if self.cfg.strategy.needs_similarity() {
            let vectors = self.pending_vectors.take().expect("checked in constructor");
            self.index = Some(SimilarityIndex::new(vectors, &state, self.cfg.strategy == Strategy::Idd));
        }
        self.retrain_and_record(&mut state)?;
        Ok(state)
    }

    fn retrain_and_record(&mut self, state: &mut AlState) -> Result<(), AlError> {
        // Sorted by seq_id, so labeling the whole pool reproduces full training.
        let data: Vec<Example<'_>> = state
            .labeled_ids
            .iter()
            .map(|&i| Example {
                features: &self.train_features[i],
                labels: &self.train_labels[i],
            })
            .collect();
        let (model, _) = crf::train(&data, &self.cfg.crf.into())?;
        let prf = evaluate(&model, &self.test_features, &self.test_gold)?;
        self.model = Some(model);

        let used = state.labeled_units(&self.train);
        let total = self.train.totals;
        state.history.push(HistoryRow {
            iteration: state.iteration,
            used,
            sar: annotation_rate(used.sequences, total.sequences)?,
            tar: annotation_rate(used.tokens, total.tokens)?,
            car: if total.concepts == 0 { 0.0 } else { annotation_rate(used.concepts, total.concepts)? },
            precision: prf.precision,
            recall: prf.recall,
            f1: prf.f1,
        });
        Ok(())
    }

    /// Scores every pool member under the configured strategy, in `seq_id` order.
    pub fn score_pool(&self, state: &AlState) -> Vec<ScoredCandidate> {
        let strategy = self.cfg.strategy;
        let params = &self.cfg.params;
        let pool_len = state.pool_ids.len();
        state
            .pool_ids
            .iter()
            .map(|&id| {
                let uncertainty = match (&self.model, strategy.needs_model()) {
                    (Some(m), true) => strategies::score_lc(m, &self.train_features[id]),
                    _ => 0.0,
                };
                let (diversity, density) = match &self.index {
                    Some(ix) => (ix.diversity(id), ix.density(id, pool_len)),
                    None => (1.0, 1.0),
                };
                let dk = match (&self.lexicon, strategy) {
                    (Some(lex), Strategy::Dki) => strategies::domain_knowledge(&self.train.sentences[id], lex),
                    _ => 0.0,
                };
                ScoredCandidate::combine(strategy, params, id, uncertainty, diversity, density, dk)
            })
            .collect()
    }

    /// One select, label, retrain, evaluate step. Returns the selected batch.
    pub fn run_iteration(&mut self, state: &mut AlState) -> Result<Vec<usize>, AlError> {
        if state.pool_ids.is_empty() {
            return Ok(Vec::new());
        }
        let scores = self.score_pool(state);
        let batch = strategies::select_batch(
            &scores,
            self.batch_size(),
            self.cfg.strategy,
            iteration_seed(state.seed, state.iteration + 1),
        );
        for id in &batch {
            state.pool_ids.remove(id);
            state.labeled_ids.insert(*id);
        }
        if let Some(ix) = self.index.as_mut() {
            ix.move_to_labeled(&batch, &state.pool_ids);
        }
        state.iteration += 1;
        self.retrain_and_record(state)?;
        Ok(batch)
    }

    /// Iterates until test F1 reaches `target_f1` or the pool runs out.
    pub fn run_until(&mut self, state: &mut AlState, target_f1: f64) -> Result<AnnotationRates, AlError> {
        loop {
            let last = state.history.last().expect("start() records iteration 0");
            if last.f1 >= target_f1 {
                return Ok(AnnotationRates {
                    sar: last.sar,
                    tar: last.tar,
                    car: last.car,
                    reached: true,
                    target_f1,
                    iteration: Some(last.iteration),
                });
            }
            if state.pool_ids.is_empty() {
                return Ok(AnnotationRates {
                    sar: 100.0,
                    tar: 100.0,
                    car: 100.0,
                    reached: false,
                    target_f1,
                    iteration: None,
                });
            }
            self.run_iteration(state)?;
        }
    }

    /// [`start`](Self::start) followed by [`run_until`](Self::run_until).
    pub fn run(&mut self, target_f1: f64) -> Result<(AlState, AnnotationRates), AlError> {
        let mut state = self.start()?;
        let rates = self.run_until(&mut state, target_f1)?;
        Ok((state, rates))
    }
}

/// Decodes every test sequence and scores the phrases against gold.
pub fn evaluate(model: &CrfModel, features: &[FeatureVector], gold: &[Vec<ConceptSpan>]) -> Result<Prf, EvalError> {
    let pred: Vec<Vec<ConceptSpan>> = features.iter().map(|f| spans_from_labels(&model.predict(f))).collect();
    phrase_prf(gold, &pred)
}

/// Trains on the whole corpus in order and scores the test set: the
/// supervised reference that active learning tries to match.
pub fn supervised(
    train_features: &[FeatureVector],
    train: &Corpus,
    test_features: &[FeatureVector],
    test: &Corpus,
    cfg: &CrfConfig,
) -> Result<(CrfModel, Prf), AlError> {
    let labels: Vec<Vec<String>> = train.sentences.iter().map(|s| s.labels()).collect();
    let data: Vec<Example<'_>> = train_features
        .iter()
        .zip(&labels)
        .map(|(f, l)| Example { features: f, labels: l })
        .collect();
    let (model, _) = crf::train(&data, cfg)?;
    let gold: Vec<Vec<ConceptSpan>> = test.sentences.iter().map(extract_concepts).collect();
    let prf = evaluate(&model, test_features, &gold)?;
    Ok((model, prf))
}

pub const HISTORY_HEADER: &str = "iteration,seq_used,tok_used,concept_used,sar,tar,car,precision,recall,f1";

/// Writes the history table. Reals use a fixed six decimals so that equal
/// runs produce identical bytes.
pub fn write_history_csv<W: Write>(history: &[HistoryRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{HISTORY_HEADER}")?;
    for r in history {
        writeln!(
            out,
            "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.iteration,
            r.used.sequences,
            r.used.tokens,
            r.used.concepts,
            r.sar,
            r.tar,
            r.car,
            r.precision,
            r.recall,
            r.f1
        )?;
    }
    Ok(())
}
