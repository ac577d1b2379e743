use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::{cache_key, file_hash, Cache, CacheOutcome, CliError, Manifest, RunConfig};
use crate::corpus::{preprocess, read_conll, Corpus};
use crate::featgen::{read_lexicon, FeatureGroupConfig, Featurizer, Lexicon};
use crate::strategies::sentence_vector;
use crate::unsup::{
    compose_span_vector, kmeans, read_codebook, write_codebook, Codebook, SequenceVector, SpaceTag,
    UnsupFeatureConfig, UnsupResources, PAD_TOKEN,
};
use crate::vectors::{
    read_embeddings, train_skipgram, write_embeddings, EmbeddingTable, LexicalTable, NgramConfig, SkipGramConfig,
};

/// Shared loading and caching for the subcommands; records inputs,
/// artifacts, timings and warnings into a manifest as it goes.
pub struct Pipeline {
    pub cfg: RunConfig,
    pub cache: Cache,
    pub manifest: Manifest,
    embeddings: Option<EmbeddingTable>,
}

impl Pipeline {
    pub fn new(cfg: RunConfig, command: &str) -> Pipeline {
        let mut manifest = Manifest::new(command);
        manifest.config = cfg.to_text();
        manifest.letters = cfg.letters.clone();
        Pipeline {
            cache: Cache::new(cfg.effective_cache_dir()),
            cfg,
            manifest,
            embeddings: None,
        }
    }

    pub fn timed<T>(&mut self, stage: &str, f: impl FnOnce(&mut Self) -> T) -> T {
        let start = Instant::now();
        let out = f(self);
        *self.manifest.timings.entry(stage.to_string()).or_default() += start.elapsed().as_secs_f64();
        out
    }

    pub fn warn(&mut self, msg: String) {
        eprintln!("warning: {msg}");
        self.manifest.warnings.push(msg);
    }

    fn note_cache(&mut self, what: &str, key: &str, outcome: CacheOutcome) {
        self.manifest.artifacts.insert(what.to_string(), key.to_string());
        if let CacheOutcome::Rebuilt(reason) = outcome {
            self.warn(format!("cached {what} {key} was corrupt ({reason}); rebuilt"));
        }
    }

    fn required(path: &Option<PathBuf>, key: &str) -> Result<PathBuf, CliError> {
        path.clone().ok_or_else(|| CliError::config(format!("`{key}` is not set")))
    }

    /// Reads the corpus configured for `role` (`train` or `test`).
    pub fn corpus(&mut self, role: &str) -> Result<Corpus, CliError> {
        let path = match role {
            "train" => Self::required(&self.cfg.train, "paths.train")?,
            _ => Self::required(&self.cfg.test, "paths.test")?,
        };
        let hash = file_hash(&path)?;
        self.manifest.inputs.insert(role.to_string(), hash);
        let f = File::open(&path).map_err(|e| CliError::io(&path, e))?;
        read_conll(BufReader::new(f)).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
    }

    pub fn lexicon(&mut self) -> Result<Option<Lexicon>, CliError> {
        let Some(path) = self.cfg.lexicon.clone() else {
            return Ok(None);
        };
        let hash = file_hash(&path)?;
        self.manifest.inputs.insert("lexicon".into(), hash);
        let f = File::open(&path).map_err(|e| CliError::io(&path, e))?;
        read_lexicon(BufReader::new(f))
            .map(Some)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))
    }

    pub fn lexical_table(&self) -> Result<LexicalTable, CliError> {
        let ngrams = NgramConfig::parse(&self.cfg.ngrams).map_err(|e| CliError::config(e.to_string()))?;
        LexicalTable::new(self.cfg.dim_lex, self.cfg.vectors_seed, ngrams).map_err(|e| CliError::config(e.to_string()))
    }

    pub fn skipgram_config(&self) -> SkipGramConfig {
        SkipGramConfig {
            dim: self.cfg.dim,
            window: self.cfg.sg_window,
            negatives: self.cfg.negatives,
            epochs: self.cfg.epochs,
            min_count: self.cfg.min_count,
            seed: self.cfg.vectors_seed,
            learning_rate: self.cfg.learning_rate,
            subsample: self.cfg.subsample,
            threads: self.cfg.threads,
        }
    }

    fn corpus_hashes(&mut self) -> Result<Vec<String>, CliError> {
        if self.cfg.embedding_corpus.is_empty() {
            return Err(CliError::config("`paths.embedding_corpus` is not set"));
        }
        let mut hashes = Vec::new();
        for (i, p) in self.cfg.embedding_corpus.clone().iter().enumerate() {
            let h = file_hash(p)?;
            self.manifest.inputs.insert(format!("embedding_corpus.{i}"), h.clone());
            hashes.push(h);
        }
        Ok(hashes)
    }

    /// The configured embedding corpora, concatenated in order, as
    /// preprocessed token sentences. Punctuation-only tokens are dropped.
    pub fn embedding_stream(&self) -> Result<Vec<Vec<String>>, CliError> {
        let mut out = Vec::new();
        for p in &self.cfg.embedding_corpus {
            let f = File::open(p).map_err(|e| CliError::io(p, e))?;
            for line in BufReader::new(f).lines() {
                let line = line.map_err(|e| CliError::io(p, e))?;
                let toks: Vec<String> = line
                    .split_whitespace()
                    .map(preprocess)
                    .filter(|t| !t.is_empty())
                    .collect();
                if !toks.is_empty() {
                    out.push(toks);
                }
            }
        }
        Ok(out)
    }

    fn embeddings_key(&mut self) -> Result<String, CliError> {
        let sg = self.skipgram_config();
        let mut parts = vec!["embeddings-v1".to_string()];
        parts.extend(self.corpus_hashes()?);
        parts.push(format!(
            "dim={} window={} negatives={} epochs={} min_count={} seed={} lr={} subsample={:?} threads={}",
            sg.dim, sg.window, sg.negatives, sg.epochs, sg.min_count, sg.seed, sg.learning_rate, sg.subsample, sg.threads
        ));
        Ok(cache_key(&parts))
    }

    /// Trained or cached skip-gram embeddings, and whether the cache was hit.
    pub fn embeddings(&mut self) -> Result<(EmbeddingTable, CacheOutcome), CliError> {
        let key = self.embeddings_key()?;
        if let Some(e) = &self.embeddings {
            return Ok((e.clone(), CacheOutcome::Hit));
        }
        let sg = self.skipgram_config();
        let (table, outcome) = self.timed("embeddings", |p| {
            p.cache.get_or_build(
                "embeddings",
                &key,
                "txt",
                |path| {
                    let f = File::open(path).map_err(|e| e.to_string())?;
                    read_embeddings(BufReader::new(f)).map_err(|e| e.to_string())
                },
                |t, path| write_embeddings(t, BufWriter::new(File::create(path)?)),
                || {
                    let stream = p.embedding_stream()?;
                    Ok(train_skipgram(&stream, &sg)?)
                },
            )
        })?;
        self.note_cache("embeddings", &key, outcome.clone());
        self.embeddings = Some(table.clone());
        Ok((table, outcome))
    }

    fn codebook_points(
        &self,
        space: SpaceTag,
        emb: &EmbeddingTable,
        lex: &LexicalTable,
    ) -> Result<Vec<Vec<f64>>, CliError> {
        Ok(match space {
            SpaceTag::Word => (0..emb.len()).map(|i| crate::math::normalized(emb.row(i))).collect(),
            SpaceTag::Lexical => emb.vocab().iter().map(|w| lex.vector(w).0).collect(),
            SpaceTag::Bigram => {
                let mut pairs = BTreeSet::new();
                for s in self.embedding_stream()? {
                    let padded: Vec<&str> = std::iter::once(PAD_TOKEN)
                        .chain(s.iter().map(String::as_str))
                        .chain(std::iter::once(PAD_TOKEN))
                        .collect();
                    for w in padded.windows(2) {
                        pairs.insert((w[0].to_string(), w[1].to_string()));
                    }
                }
                pairs
                    .into_iter()
                    .map(|(a, b)| compose_span_vector(&[a, b], emb, lex).combined.0)
                    .collect()
            }
            SpaceTag::Sentence => self
                .embedding_stream()?
                .into_iter()
                .collect::<BTreeSet<_>>()
                .into_iter()
                .map(|s| compose_span_vector(&s, emb, lex).combined.0)
                .collect(),
        })
    }

    pub fn codebook(&mut self, space: SpaceTag, k: usize) -> Result<(Codebook, CacheOutcome), CliError> {
        let (emb, _) = self.embeddings()?;
        let lex = self.lexical_table()?;
        let emb_key = self.manifest.artifacts["embeddings"].clone();
        let key = cache_key(&[
            "codebook-v1".to_string(),
            emb_key,
            lex.to_line(),
            space.to_string(),
            k.to_string(),
            self.cfg.kmeans_seed.to_string(),
            self.cfg.kmeans_max_iters.to_string(),
        ]);
        let seed = self.cfg.kmeans_seed;
        let max_iters = self.cfg.kmeans_max_iters;
        let (cb, outcome) = self.timed("codebooks", |p| {
            p.cache.get_or_build(
                "codebooks",
                &key,
                "txt",
                |path| {
                    let f = File::open(path).map_err(|e| e.to_string())?;
                    let cb = read_codebook(BufReader::new(f)).map_err(|e| e.to_string())?;
                    if cb.k() != k || cb.space_tag != space {
                        return Err("header does not match key".into());
                    }
                    Ok(cb)
                },
                |cb, path| write_codebook(cb, BufWriter::new(File::create(path)?)),
                || {
                    let points = p.codebook_points(space, &emb, &lex)?;
                    Ok(kmeans(&points, k, seed, max_iters, space)?)
                },
            )
        })?;
        self.note_cache(&format!("codebook.{space}.{k}"), &key, outcome.clone());
        Ok((cb, outcome))
    }

    pub fn unsup_config(&self, letters: &str) -> UnsupFeatureConfig {
        UnsupFeatureConfig::for_letters(letters, &self.cfg.k_overrides())
    }

    /// Featurizer for `letters`, building whatever artifacts it needs.
    pub fn featurizer(&mut self, letters: &str) -> Result<Featurizer, CliError> {
        let mut group_cfg = FeatureGroupConfig::with_letters(letters)?;
        group_cfg.window = self.cfg.window;
        let lexicon = if group_cfg.has('C') {
            Some(self.lexicon()?.ok_or_else(|| CliError::config("feature group C needs `paths.lexicon`"))?)
        } else {
            None
        };
        let ucfg = self.unsup_config(letters);
        let unsup = if ucfg.is_empty() {
            None
        } else {
            let mut codebooks = HashMap::new();
            for (space, k) in ucfg.required_codebooks() {
                let (cb, _) = self.codebook(space, k)?;
                codebooks.insert((space, k), cb);
            }
            let (embeddings, _) = self.embeddings()?;
            let res = UnsupResources {
                embeddings,
                lexical: self.lexical_table()?,
                codebooks,
            };
            Some((res, ucfg))
        };
        Ok(Featurizer::new(group_cfg, lexicon, unsup)?)
    }

    /// Sentence vectors of `corpus` for similarity-based strategies. Without
    /// an embedding corpus only the lexical part is informative.
    pub fn sentence_vectors(&mut self, corpus: &Corpus) -> Result<Vec<SequenceVector>, CliError> {
        let emb = if self.cfg.embedding_corpus.is_empty() {
            self.warn("no embedding corpus configured; sentence similarity uses lexical vectors only".into());
            EmbeddingTable::empty(self.cfg.dim)
        } else {
            self.embeddings()?.0
        };
        let lex = self.lexical_table()?;
        Ok(corpus.sentences.iter().map(|s| sentence_vector(s, &emb, &lex)).collect())
    }
}

/// Creates `dir` (and parents) or reports a data error.
pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}
