//! Flat `section.key = value` run configuration.
//!
//! Every key has a default; unknown keys and unparsable values are errors.
//! [`RunConfig::to_text`] writes the fully resolved configuration in the
//! same format, which is what manifests store and what cache keys hash.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::strategies::Strategy;

#[derive(Debug, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// A value that can appear on the right of `=`.
pub trait ConfigValue: Sized {
    fn parse_value(s: &str) -> Result<Self, String>;
    fn render(&self) -> String;
}

macro_rules! from_str_value {
    ($($t:ty),*) => {$(
        impl ConfigValue for $t {
            fn parse_value(s: &str) -> Result<Self, String> {
                s.parse().map_err(|e| format!("{e}"))
            }
            fn render(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

from_str_value!(usize, u64, f64, bool, String, Strategy);

impl ConfigValue for PathBuf {
    fn parse_value(s: &str) -> Result<Self, String> {
        Ok(PathBuf::from(s))
    }
    fn render(&self) -> String {
        self.display().to_string()
    }
}

/// `none` (or empty) is the absent value.
impl<T: ConfigValue> ConfigValue for Option<T> {
    fn parse_value(s: &str) -> Result<Self, String> {
        if s.is_empty() || s.eq_ignore_ascii_case("none") || s.eq_ignore_ascii_case("auto") {
            Ok(None)
        } else {
            T::parse_value(s).map(Some)
        }
    }
    fn render(&self) -> String {
        self.as_ref().map_or_else(|| "none".to_string(), T::render)
    }
}

/// Comma-separated list.
impl ConfigValue for Vec<PathBuf> {
    fn parse_value(s: &str) -> Result<Self, String> {
        Ok(s.split(',').map(str::trim).filter(|p| !p.is_empty()).map(PathBuf::from).collect())
    }
    fn render(&self) -> String {
        self.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(",")
    }
}

macro_rules! run_config {
    ($( $field:ident : $ty:ty = $default:expr, $key:literal, $doc:literal; )*) => {
        /// Resolved configuration for any subcommand.
        #[derive(Clone, Debug, PartialEq)]
        pub struct RunConfig {
            $( #[doc = $doc] pub $field: $ty, )*
        }

        impl Default for RunConfig {
            fn default() -> Self {
                RunConfig { $( $field: $default, )* }
            }
        }

        impl RunConfig {
            /// `(key, doc)` for every setting, in file order.
            pub const KEYS: &'static [(&'static str, &'static str)] = &[$( ($key, $doc), )*];

            pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
                match key {
                    $( $key => {
                        self.$field = <$ty as ConfigValue>::parse_value(value)
                            .map_err(|e| ConfigError(format!("invalid value `{value}` for `{key}`: {e}")))?;
                    } )*
                    _ => return Err(ConfigError(format!("unknown configuration key `{key}`"))),
                }
                Ok(())
            }

            pub fn get(&self, key: &str) -> Option<String> {
                match key {
                    $( $key => Some(self.$field.render()), )*
                    _ => None,
                }
            }

            /// Every setting as `(key, rendered value)`.
            pub fn entries(&self) -> Vec<(&'static str, String)> {
                vec![$( ($key, self.$field.render()), )*]
            }
        }
    };
}

run_config! {
    train: Option<PathBuf> = None, "paths.train", "CoNLL training corpus";
    test: Option<PathBuf> = None, "paths.test", "CoNLL test corpus";
    embedding_corpus: Vec<PathBuf> = Vec::new(), "paths.embedding_corpus", "plain-text corpora for embeddings, comma-separated, concatenated in order";
    lexicon: Option<PathBuf> = None, "paths.lexicon", "tab-separated term/group lexicon";
    cache_dir: PathBuf = PathBuf::from(".activecrf-cache"), "paths.cache_dir", "artifact cache (ACTIVECRF_CACHE_DIR overrides)";

    letters: String = "ABC".to_string(), "features.letters", "enabled feature groups";
    window: usize = 2, "features.window", "context window for window-based groups";

    dim: usize = 100, "vectors.dim", "word embedding dimension";
    dim_lex: usize = 40, "vectors.dim_lex", "lexical vector dimension";
    sg_window: usize = 5, "vectors.window", "skip-gram window";
    negatives: usize = 5, "vectors.negatives", "negative samples per context";
    epochs: usize = 5, "vectors.epochs", "skip-gram epochs";
    min_count: usize = 2, "vectors.min_count", "minimum token frequency";
    learning_rate: f64 = 0.025, "vectors.learning_rate", "initial skip-gram learning rate";
    subsample: Option<f64> = None, "vectors.subsample", "frequent-token subsampling threshold";
    threads: usize = 1, "vectors.threads", "skip-gram worker threads (1 is reproducible)";
    vectors_seed: u64 = 1, "vectors.seed", "skip-gram and lexical vector seed";
    ngrams: String = "uni,bi,tri,tetra,skip".to_string(), "vectors.ngrams", "character n-gram families";

    k_d: usize = 500, "unsup.k.D", "clusters for group D (word)";
    k_g: usize = 100, "unsup.k.G", "clusters for group G (word)";
    k_h: usize = 500, "unsup.k.H", "clusters for group H (lexical)";
    k_j: usize = 500, "unsup.k.J", "clusters for group J (left bi-gram)";
    k_k: usize = 500, "unsup.k.K", "clusters for group K (right bi-gram)";
    k_l: usize = 100, "unsup.k.L", "clusters for group L (sentence)";
    k_m: usize = 500, "unsup.k.M", "clusters for group M (sentence)";
    kmeans_seed: u64 = 1, "unsup.seed", "k-means seed";
    kmeans_max_iters: usize = 100, "unsup.max_iters", "k-means iteration cap";

    sigma2: f64 = 10.0, "crf.sigma2", "Gaussian prior variance";
    crf_max_iters: usize = 300, "crf.max_iters", "L-BFGS iteration cap";
    crf_tolerance: f64 = 1e-6, "crf.tolerance", "relative objective change to stop at";
    crf_memory: usize = 10, "crf.memory", "L-BFGS history size";

    strategy: Strategy = Strategy::Lc, "al.strategy", "query strategy: rs, lc, idiv, idd, dki";
    init_fraction: f64 = 0.005, "al.init_fraction", "initial labeled fraction, in (0, 0.01)";
    batch_size: Option<usize> = None, "al.batch_size", "sequences per batch (none: initial set size)";
    al_seed: u64 = 1, "al.seed", "initial split and random selection seed";
    beta: f64 = 1.0, "al.beta", "IDD density exponent";
    lambda: f64 = 0.5, "al.lambda", "DKI domain-knowledge weight";
    target_f1: Option<f64> = None, "al.target_f1", "F1 to reach (none: run supervised first)";

    ttest_seed: u64 = 1, "ttest.seed", "seed of the five halvings";
    ttest_letters: String = "ABC".to_string(), "ttest.baseline", "feature groups of the comparison system";

    synth_seed: u64 = 1, "synth.seed", "generator seed";
    synth_train: usize = 2000, "synth.train_sentences", "training sentences";
    synth_test: usize = 1000, "synth.test_sentences", "test sentences";
    synth_concepts: usize = 300, "synth.concept_types", "concept vocabulary size";
    synth_distractors: usize = 300, "synth.distractor_types", "distractor vocabulary size";
    synth_fillers: usize = 60, "synth.filler_types", "filler vocabulary size";
    synth_easy: f64 = 0.5, "synth.easy_fraction", "share of sentences without a concept slot";
    synth_zipf: f64 = 1.0, "synth.zipf", "Zipf exponent of concept and distractor frequencies";
    synth_lexicon: f64 = 0.4, "synth.lexicon_coverage", "share of concept terms in the lexicon";
    synth_unlabeled: usize = 12, "synth.unlabeled_per_type", "unlabeled sentences per concept or distractor term";
    synth_labels: usize = 1, "synth.label_types", "number of concept types";
}

impl RunConfig {
    /// Parses config text on top of the defaults.
    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {}: expected `key = value`", i + 1)))?;
            self.set(k.trim(), v.trim())
                .map_err(|e| ConfigError(format!("line {}: {}", i + 1, e.0)))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        RunConfig::parse(&text)
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<(), ConfigError> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("override `{kv}` is not `key=value`")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Cluster counts keyed by unsupervised letter.
    pub fn k_overrides(&self) -> std::collections::BTreeMap<char, usize> {
        [
            ('D', self.k_d),
            ('G', self.k_g),
            ('H', self.k_h),
            ('J', self.k_j),
            ('K', self.k_k),
            ('L', self.k_l),
            ('M', self.k_m),
        ]
        .into_iter()
        .collect()
    }

    /// Cache directory after applying the `ACTIVECRF_CACHE_DIR` override.
    pub fn effective_cache_dir(&self) -> PathBuf {
        match std::env::var_os(super::CACHE_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => self.cache_dir.clone(),
        }
    }
}
