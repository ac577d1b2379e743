//! Skip-gram with negative sampling.
//!
//! Reference mode (`threads == 1`) is single-threaded and bit-reproducible
//! for a fixed seed. With more threads, workers share the weight matrices
//! and apply unsynchronized (Hogwild-style) updates through relaxed atomics,
//! so results vary run to run.

use std::cell::Cell;
use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DenseVector, VectorError};

#[derive(Clone, Debug, PartialEq)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub min_count: usize,
    pub seed: u64,
    pub learning_rate: f64,
    /// Frequent-token subsampling threshold; `None` disables it.
    pub subsample: Option<f64>,
    pub threads: usize,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            min_count: 2,
            seed: 1,
            learning_rate: 0.025,
            subsample: None,
            threads: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<f64>,
    dim: usize,
    pub training_meta: Option<SkipGramConfig>,
}

impl EmbeddingTable {
    pub fn from_rows(rows: Vec<(String, Vec<f64>)>, dim: usize) -> Result<EmbeddingTable, VectorError> {
        if dim < 2 {
            return Err(VectorError::DimTooSmall(dim));
        }
        let mut vocab = Vec::with_capacity(rows.len());
        let mut index = HashMap::with_capacity(rows.len());
        let mut vectors = Vec::with_capacity(rows.len() * dim);
        for (i, (tok, v)) in rows.into_iter().enumerate() {
            if v.len() != dim {
                return Err(VectorError::Malformed {
                    line: i + 2,
                    reason: format!("expected {dim} values, found {}", v.len()),
                });
            }
            index.insert(tok.clone(), i);
            vocab.push(tok);
            vectors.extend(v);
        }
        Ok(EmbeddingTable {
            vocab,
            index,
            vectors,
            dim,
            training_meta: None,
        })
    }

    /// A table with no entries: every lookup is out of vocabulary.
    pub fn empty(dim: usize) -> EmbeddingTable {
        EmbeddingTable {
            vocab: Vec::new(),
            index: HashMap::new(),
            vectors: Vec::new(),
            dim,
            training_meta: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index
            .get(token)
            .map(|&i| &self.vectors[i * self.dim..(i + 1) * self.dim])
    }

    pub fn vector(&self, token: &str) -> Option<DenseVector> {
        self.get(token).map(|v| DenseVector(v.to_vec()))
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }
}

/// Per-epoch mean negative-sampling loss of a training run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SkipGramReport {
    pub epoch_losses: Vec<f64>,
}

pub fn train_skipgram(
    stream: &[Vec<String>],
    cfg: &SkipGramConfig,
) -> Result<EmbeddingTable, VectorError> {
    train_skipgram_with_report(stream, cfg).map(|(t, _)| t)
}

struct Vocab {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
}

fn build_vocab(stream: &[Vec<String>], min_count: usize) -> Vocab {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for sent in stream {
        for tok in sent.iter().filter(|t| !t.is_empty()) {
            *counts.entry(tok.as_str()).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count as u64)
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let words: Vec<String> = kept.iter().map(|(w, _)| w.to_string()).collect();
    let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
    Vocab {
        words,
        counts: kept.iter().map(|&(_, c)| c).collect(),
        index,
    }
}

/// Cumulative unigram^0.75 distribution for negative draws.
struct NegativeSampler {
    cumulative: Vec<f64>,
}

impl NegativeSampler {
    fn new(counts: &[u64]) -> NegativeSampler {
        let mut acc = 0.0;
        let cumulative = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(0.75);
                acc
            })
            .collect();
        NegativeSampler { cumulative }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("non-empty vocabulary");
        let r = rng.random::<f64>() * total;
        self.cumulative
            .partition_point(|&c| c <= r)
            .min(self.cumulative.len() - 1)
    }
}

/// Shared-weight storage abstraction so the same update code serves the
/// reference and the Hogwild paths.
trait Store {
    fn load(&self, i: usize) -> f64;
    fn store(&self, i: usize, v: f64);
}

struct CellStore<'a>(&'a [Cell<f64>]);

impl Store for CellStore<'_> {
    fn load(&self, i: usize) -> f64 {
        self.0[i].get()
    }
    fn store(&self, i: usize, v: f64) {
        self.0[i].set(v)
    }
}

struct AtomicStore(Vec<AtomicU64>);

impl Store for AtomicStore {
    fn load(&self, i: usize) -> f64 {
        f64::from_bits(self.0[i].load(Ordering::Relaxed))
    }
    fn store(&self, i: usize, v: f64) {
        self.0[i].store(v.to_bits(), Ordering::Relaxed)
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

struct Trainer<'a> {
    cfg: &'a SkipGramConfig,
    sampler: &'a NegativeSampler,
    keep_prob: Option<Vec<f64>>,
    total_steps: usize,
    dim: usize,
}

#[derive(Default)]
struct LossAcc {
    sum: f64,
    pairs: u64,
}

impl Trainer<'_> {
    fn lr(&self, processed: usize) -> f64 {
        let frac = processed as f64 / (self.total_steps as f64 + 1.0);
        self.cfg.learning_rate * (1.0 - frac).max(1e-4)
    }

    /// One pass over `sentences`; `progress` counts processed tokens across workers.
    fn run_epoch<S: Store>(
        &self,
        input: &S,
        output: &S,
        sentences: &[Vec<usize>],
        rng: &mut ChaCha8Rng,
        progress: &AtomicUsize,
        loss: &mut LossAcc,
    ) {
        let dim = self.dim;
        let mut grad = vec![0.0; dim];
        let mut center_vec = vec![0.0; dim];
        let mut kept = Vec::new();
        for sent in sentences {
            kept.clear();
            match &self.keep_prob {
                Some(p) => kept.extend(sent.iter().copied().filter(|&w| rng.random::<f64>() < p[w])),
                None => kept.extend_from_slice(sent),
            }
            let processed = progress.fetch_add(sent.len(), Ordering::Relaxed);
            let lr = self.lr(processed);
            for (pos, &center) in kept.iter().enumerate() {
                let shrink = rng.random_range(0..self.cfg.window.max(1));
                let reach = self.cfg.window - shrink;
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach).min(kept.len() - 1);
                for (cpos, &context) in kept.iter().enumerate().take(hi + 1).skip(lo) {
                    if cpos == pos {
                        continue;
                    }
                    let cbase = center * dim;
                    for d in 0..dim {
                        center_vec[d] = input.load(cbase + d);
                    }
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    for n in 0..=self.cfg.negatives {
                        let (target, label) = if n == 0 {
                            (context, 1.0)
                        } else {
                            let t = self.sampler.draw(rng);
                            if t == context {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let tbase = target * dim;
                        let mut score = 0.0;
                        for d in 0..dim {
                            score += center_vec[d] * output.load(tbase + d);
                        }
                        let p = sigmoid(score);
                        loss.sum -= if label == 1.0 {
                            p.max(1e-300).ln()
                        } else {
                            (1.0 - p).max(1e-300).ln()
                        };
                        let g = (label - p) * lr;
                        for d in 0..dim {
                            let o = output.load(tbase + d);
                            grad[d] += g * o;
                            output.store(tbase + d, o + g * center_vec[d]);
                        }
                    }
                    loss.pairs += 1;
                    for d in 0..dim {
                        input.store(cbase + d, input.load(cbase + d) + grad[d]);
                    }
                }
            }
        }
    }
}

/// Trains embeddings and reports the mean loss of every epoch.
pub fn train_skipgram_with_report(
    stream: &[Vec<String>],
    cfg: &SkipGramConfig,
) -> Result<(EmbeddingTable, SkipGramReport), VectorError> {
    if cfg.dim < 2 {
        return Err(VectorError::DimTooSmall(cfg.dim));
    }
    let vocab = build_vocab(stream, cfg.min_count.max(1));
    if vocab.words.is_empty() {
        return Err(VectorError::EmptyVocabulary);
    }
    let sentences: Vec<Vec<usize>> = stream
        .iter()
        .map(|s| s.iter().filter_map(|t| vocab.index.get(t).copied()).collect::<Vec<_>>())
        .filter(|s: &Vec<usize>| !s.is_empty())
        .collect();
    let n_tokens: usize = sentences.iter().map(Vec::len).sum();
    let dim = cfg.dim;
    let v = vocab.words.len();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut input: Vec<f64> = (0..v * dim)
        .map(|_| (rng.random::<f64>() - 0.5) / dim as f64)
        .collect();
    let mut output = vec![0.0; v * dim];

    let keep_prob = cfg.subsample.map(|t| {
        let total: u64 = vocab.counts.iter().sum();
        vocab
            .counts
            .iter()
            .map(|&c| {
                let f = c as f64 / total as f64;
                ((t / f).sqrt() + t / f).min(1.0)
            })
            .collect()
    });
    let sampler = NegativeSampler::new(&vocab.counts);
    let trainer = Trainer {
        cfg,
        sampler: &sampler,
        keep_prob,
        total_steps: n_tokens * cfg.epochs,
        dim,
    };
    let progress = AtomicUsize::new(0);
    let mut report = SkipGramReport::default();

    if cfg.threads <= 1 {
        let in_cells = Cell::from_mut(input.as_mut_slice()).as_slice_of_cells();
        let out_cells = Cell::from_mut(output.as_mut_slice()).as_slice_of_cells();
        let (ins, outs) = (CellStore(in_cells), CellStore(out_cells));
        for _ in 0..cfg.epochs {
            let mut loss = LossAcc::default();
            trainer.run_epoch(&ins, &outs, &sentences, &mut rng, &progress, &mut loss);
            report.epoch_losses.push(loss.sum / loss.pairs.max(1) as f64);
        }
    } else {
        let ins = AtomicStore(input.iter().map(|x| AtomicU64::new(x.to_bits())).collect());
        let outs = AtomicStore(output.iter().map(|x| AtomicU64::new(x.to_bits())).collect());
        let chunk = sentences.len().div_ceil(cfg.threads);
        for epoch in 0..cfg.epochs {
            let losses: Vec<LossAcc> = std::thread::scope(|scope| {
                let handles: Vec<_> = sentences
                    .chunks(chunk.max(1))
                    .enumerate()
                    .map(|(w, part)| {
                        let (trainer, ins, outs, progress) = (&trainer, &ins, &outs, &progress);
                        let seed = cfg.seed ^ ((epoch as u64) << 32) ^ (w as u64 + 1);
                        scope.spawn(move || {
                            let mut rng = ChaCha8Rng::seed_from_u64(seed);
                            let mut loss = LossAcc::default();
                            trainer.run_epoch(ins, outs, part, &mut rng, progress, &mut loss);
                            loss
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
            });
            let (sum, pairs) = losses
                .iter()
                .fold((0.0, 0u64), |(s, p), l| (s + l.sum, p + l.pairs));
            report.epoch_losses.push(sum / pairs.max(1) as f64);
        }
        input = ins.0.iter().map(|a| f64::from_bits(a.load(Ordering::Relaxed))).collect();
    }

    let mut table = EmbeddingTable::from_rows(
        vocab
            .words
            .into_iter()
            .enumerate()
            .map(|(i, w)| (w, input[i * dim..(i + 1) * dim].to_vec()))
            .collect(),
        dim,
    )?;
    table.training_meta = Some(cfg.clone());
    Ok((table, report))
}

/// Writes `<vocab_size> <dim>` then one `token v1 .. vdim` line per entry.
pub fn write_embeddings<W: Write>(table: &EmbeddingTable, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{} {}", table.len(), table.dim())?;
    for (i, tok) in table.vocab().iter().enumerate() {
        write!(w, "{tok}")?;
        for x in table.row(i) {
            write!(w, " {x}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_embeddings<R: BufRead>(reader: R) -> Result<EmbeddingTable, VectorError> {
    let mut lines = reader.lines();
    let header = lines.next().ok_or(VectorError::Malformed {
        line: 1,
        reason: "missing header".into(),
    })??;
    let bad = |line: usize, reason: &str| VectorError::Malformed {
        line,
        reason: reason.to_string(),
    };
    let mut parts = header.split_whitespace();
    let size: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad(1, "bad vocabulary size"))?;
    let dim: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad(1, "bad dimension"))?;
    let mut rows = Vec::with_capacity(size);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(' ');
        let tok = fields.next().ok_or_else(|| bad(i + 2, "missing token"))?;
        let vals = fields
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(i + 2, &e.to_string()))?;
        rows.push((tok.to_string(), vals));
    }
    if rows.len() != size {
        return Err(bad(1, &format!("header says {size} rows, found {}", rows.len())));
    }
    EmbeddingTable::from_rows(rows, dim)
}
