//! Synthetic BIO corpora with planted distributional concept classes.
//!
//! Words come from a syllable generator, so spelling carries no class
//! signal. Labeled sentences put concept terms and distractor nouns into the
//! same slots after the same trigger words, so only word identity (or a
//! lexicon hit) separates them there. The unlabeled corpus surrounds each
//! class with its own marker words, which is what lets embeddings and their
//! clusters recover class membership for terms rare or unseen in training.
//! About half of the labeled sentences carry no slot at all.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{write_conll, BioTag, Corpus, Sentence, Token};

const CONSONANTS: &[u8] = b"bcdfghklmnprstvz";
const VOWELS: &[u8] = b"aeiou";
const LABEL_NAMES: &[&str] = &["problem", "test", "treatment", "anatomy", "drug", "finding"];

#[derive(Clone, Debug, PartialEq)]
pub struct SynthParams {
    pub seed: u64,
    pub train_sentences: usize,
    pub test_sentences: usize,
    pub concept_types: usize,
    pub distractor_types: usize,
    pub filler_types: usize,
    pub easy_fraction: f64,
    pub zipf: f64,
    pub lexicon_coverage: f64,
    pub unlabeled_per_type: usize,
    pub label_types: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            seed: 1,
            train_sentences: 2000,
            test_sentences: 1000,
            concept_types: 300,
            distractor_types: 300,
            filler_types: 60,
            easy_fraction: 0.5,
            zipf: 1.0,
            lexicon_coverage: 0.4,
            unlabeled_per_type: 12,
            label_types: 1,
        }
    }
}

impl SynthParams {
    pub fn from_config(cfg: &super::RunConfig) -> SynthParams {
        SynthParams {
            seed: cfg.synth_seed,
            train_sentences: cfg.synth_train,
            test_sentences: cfg.synth_test,
            concept_types: cfg.synth_concepts,
            distractor_types: cfg.synth_distractors,
            filler_types: cfg.synth_fillers,
            easy_fraction: cfg.synth_easy,
            zipf: cfg.synth_zipf,
            lexicon_coverage: cfg.synth_lexicon,
            unlabeled_per_type: cfg.synth_unlabeled,
            label_types: cfg.synth_labels,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.train_sentences == 0 || self.test_sentences == 0 {
            return Err("synthetic corpora need at least one sentence".into());
        }
        if self.label_types == 0 || self.label_types > LABEL_NAMES.len() {
            return Err(format!("label_types must be in 1..={}", LABEL_NAMES.len()));
        }
        if self.concept_types < self.label_types || self.distractor_types == 0 || self.filler_types == 0 {
            return Err("vocabulary sizes must be positive (one concept term per type at least)".into());
        }
        if !(0.0..1.0).contains(&self.easy_fraction) || !(0.0..=1.0).contains(&self.lexicon_coverage) {
            return Err("easy_fraction must be in [0, 1) and lexicon_coverage in [0, 1]".into());
        }
        if self.zipf.is_nan() || self.zipf < 0.0 {
            return Err("zipf exponent must be non-negative".into());
        }
        Ok(())
    }
}

/// A generated data set.
#[derive(Clone, Debug)]
pub struct SynthData {
    pub train: Corpus,
    pub test: Corpus,
    /// Unlabeled sentences for embedding training.
    pub unlabeled: Vec<Vec<String>>,
    /// `(term, group)` lexicon entries.
    pub lexicon: Vec<(String, String)>,
}

struct Vocab {
    func: Vec<String>,
    triggers: Vec<String>,
    fillers: Vec<(String, &'static str)>,
    /// Per label type: terms and their Zipf sampler.
    concepts: Vec<(Vec<String>, WeightedIndex<f64>)>,
    distractors: (Vec<String>, WeightedIndex<f64>),
    concept_markers: Vec<Vec<String>>,
    distractor_markers: Vec<String>,
}

fn fresh_word(rng: &mut ChaCha8Rng, seen: &mut HashSet<String>) -> String {
    loop {
        let syllables = rng.random_range(2..=3);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push(*CONSONANTS.choose(rng).unwrap() as char);
            w.push(*VOWELS.choose(rng).unwrap() as char);
        }
        if rng.random_bool(0.3) {
            w.push(*CONSONANTS.choose(rng).unwrap() as char);
        }
        if seen.insert(w.clone()) {
            return w;
        }
    }
}

fn zipf(n: usize, s: f64) -> WeightedIndex<f64> {
    WeightedIndex::new((0..n).map(|r| 1.0 / ((r + 1) as f64).powf(s))).expect("n > 0")
}

impl Vocab {
    fn new(p: &SynthParams, rng: &mut ChaCha8Rng) -> Vocab {
        let mut seen = HashSet::new();
        let mut words = |n: usize, rng: &mut ChaCha8Rng| -> Vec<String> { (0..n).map(|_| fresh_word(rng, &mut seen)).collect() };
        let func = words(12, rng);
        let triggers = words(10, rng);
        let filler_pos = ["JJ", "VB", "RB", "NNS"];
        let fillers = words(p.filler_types, rng)
            .into_iter()
            .map(|w| (w, *filler_pos.choose(rng).unwrap()))
            .collect();
        let per_type = p.concept_types / p.label_types;
        let concepts = (0..p.label_types)
            .map(|_| {
                let terms = words(per_type, rng);
                let sampler = zipf(terms.len(), p.zipf);
                (terms, sampler)
            })
            .collect();
        let dterms = words(p.distractor_types, rng);
        let dsampler = zipf(dterms.len(), p.zipf);
        let concept_markers = (0..p.label_types).map(|_| words(6, rng)).collect();
        let distractor_markers = words(6, rng);
        Vocab {
            func,
            triggers,
            fillers,
            concepts,
            distractors: (dterms, dsampler),
            concept_markers,
            distractor_markers,
        }
    }

    fn background(&self, rng: &mut ChaCha8Rng) -> (String, &'static str) {
        if rng.random_bool(0.35) {
            (self.func.choose(rng).unwrap().clone(), "DT")
        } else {
            let (w, pos) = self.fillers.choose(rng).unwrap();
            (w.clone(), pos)
        }
    }

    fn run_length(rng: &mut ChaCha8Rng) -> usize {
        match rng.random_range(0..10) {
            0..=5 => 1,
            6..=8 => 2,
            _ => 3,
        }
    }

    /// One labeled sentence as `(surface, pos, tag)` triples.
    fn labeled(&self, p: &SynthParams, rng: &mut ChaCha8Rng) -> Vec<(String, &'static str, BioTag)> {
        let mut out = Vec::new();
        if rng.random_bool(p.easy_fraction) {
            for _ in 0..rng.random_range(4..=8) {
                let (w, pos) = self.background(rng);
                out.push((w, pos, BioTag::Outside));
            }
            return out;
        }
        for _ in 0..rng.random_range(0..=2) {
            let (w, pos) = self.background(rng);
            out.push((w, pos, BioTag::Outside));
        }
        out.push((self.triggers.choose(rng).unwrap().clone(), "VB", BioTag::Outside));
        let len = Self::run_length(rng);
        if rng.random_bool(0.5) {
            let t = rng.random_range(0..self.concepts.len());
            let (terms, sampler) = &self.concepts[t];
            let name = LABEL_NAMES[t].to_string();
            for i in 0..len {
                let tag = if i == 0 { BioTag::Begin(name.clone()) } else { BioTag::Inside(name.clone()) };
                out.push((terms[sampler.sample(rng)].clone(), "NN", tag));
            }
        } else {
            let (terms, sampler) = &self.distractors;
            for _ in 0..len {
                out.push((terms[sampler.sample(rng)].clone(), "NN", BioTag::Outside));
            }
        }
        for _ in 0..rng.random_range(1..=3) {
            let (w, pos) = self.background(rng);
            out.push((w, pos, BioTag::Outside));
        }
        out
    }

    fn corpus(&self, p: &SynthParams, n: usize, doc_prefix: &str, rng: &mut ChaCha8Rng) -> Corpus {
        let sentences = (0..n)
            .map(|i| Sentence {
                tokens: self
                    .labeled(p, rng)
                    .into_iter()
                    .map(|(w, pos, tag)| Token::new(&w, Some(pos), tag))
                    .collect(),
                // Twenty sentences per document.
                doc_id: format!("{doc_prefix}{}", i / 20),
                seq_id: i,
            })
            .collect();
        Corpus::from_sentences(sentences)
    }

    /// A marker-framed unlabeled sentence around `terms`.
    fn framed(&self, terms: &[String], markers: &[String], rng: &mut ChaCha8Rng) -> Vec<String> {
        let mut s = vec![markers.choose(rng).unwrap().clone()];
        if rng.random_bool(0.5) {
            s.push(self.func.choose(rng).unwrap().clone());
        }
        s.extend(terms.iter().cloned());
        s.push(markers.choose(rng).unwrap().clone());
        if rng.random_bool(0.5) {
            s.push(self.background(rng).0);
        }
        s
    }
}

pub fn generate(p: &SynthParams) -> Result<SynthData, String> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let vocab = Vocab::new(p, &mut rng);
    let train = vocab.corpus(p, p.train_sentences, "train-", &mut rng);
    let test = vocab.corpus(p, p.test_sentences, "test-", &mut rng);

    let mut unlabeled: Vec<Vec<String>> = Vec::new();
    for (t, (terms, sampler)) in vocab.concepts.iter().enumerate() {
        for term in terms {
            for _ in 0..p.unlabeled_per_type {
                let mut run = vec![term.clone()];
                if rng.random_bool(0.3) {
                    run.push(terms[sampler.sample(&mut rng)].clone());
                }
                unlabeled.push(vocab.framed(&run, &vocab.concept_markers[t], &mut rng));
            }
        }
    }
    let (dterms, dsampler) = &vocab.distractors;
    for term in dterms {
        for _ in 0..p.unlabeled_per_type {
            let mut run = vec![term.clone()];
            if rng.random_bool(0.3) {
                run.push(dterms[dsampler.sample(&mut rng)].clone());
            }
            unlabeled.push(vocab.framed(&run, &vocab.distractor_markers, &mut rng));
        }
    }
    // Unlabeled text in the labeled style, so background words get vectors too.
    for _ in 0..p.train_sentences {
        unlabeled.push(vocab.labeled(p, &mut rng).into_iter().map(|(w, _, _)| w).collect());
    }
    unlabeled.shuffle(&mut rng);

    let mut lexicon = Vec::new();
    for (t, (terms, _)) in vocab.concepts.iter().enumerate() {
        let group = if p.label_types == 1 { "DISO".to_string() } else { LABEL_NAMES[t].to_uppercase() };
        let mut chosen: Vec<&String> = terms.iter().collect();
        chosen.shuffle(&mut rng);
        let keep = (p.lexicon_coverage * terms.len() as f64).round() as usize;
        let mut kept: Vec<&String> = chosen.into_iter().take(keep).collect();
        kept.sort();
        lexicon.extend(kept.into_iter().map(|w| (w.clone(), group.clone())));
    }
    Ok(SynthData {
        train,
        test,
        unlabeled,
        lexicon,
    })
}

pub const TRAIN_FILE: &str = "train.conll";
pub const TEST_FILE: &str = "test.conll";
pub const UNLABELED_FILE: &str = "unlabeled.txt";
pub const LEXICON_FILE: &str = "lexicon.tsv";

/// Writes the four data files into `dir`.
pub fn write_synth(data: &SynthData, dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let open = |name: &str| -> std::io::Result<std::io::BufWriter<std::fs::File>> {
        Ok(std::io::BufWriter::new(std::fs::File::create(dir.join(name))?))
    };
    write_conll(&data.train, open(TRAIN_FILE)?)?;
    write_conll(&data.test, open(TEST_FILE)?)?;
    let mut u = open(UNLABELED_FILE)?;
    for s in &data.unlabeled {
        writeln!(u, "{}", s.join(" "))?;
    }
    u.flush()?;
    let mut l = open(LEXICON_FILE)?;
    writeln!(l, "# term\tgroup")?;
    for (term, group) in &data.lexicon {
        writeln!(l, "{term}\t{group}")?;
    }
    l.flush()
}
