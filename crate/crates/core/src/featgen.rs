//! Hand-crafted feature groups and per-token feature assembly.
//!
//! * A: lowercased identity over a context window, orthographic shape flags,
//!   prefixes/suffixes and character 2/3-grams.
//! * B: POS tags over the window plus the left POS bi-gram.
//! * C: semantic group of the longest lexicon match covering each token.
//!
//! Unsupervised groups (D..M) come from [`crate::unsup`] and are merged in
//! by [`Featurizer`].

use std::collections::{BTreeSet, HashMap};
use std::io::BufRead;

use thiserror::Error;

use crate::corpus::{preprocess, Sentence};
use crate::unsup::{emit_unsup_features, UnsupError, UnsupFeatureConfig, UnsupResources, UNSUP_LETTERS};

pub const ALL_LETTERS: &str = "ABCDGHJKLM";

#[derive(Debug, Error)]
pub enum FeatgenError {
    #[error("unknown feature group letter `{0}`")]
    UnknownLetter(char),
    #[error("feature group C is enabled but no lexicon is loaded")]
    MissingLexicon,
    #[error("unsupervised groups {0} are enabled but no embeddings/codebooks are loaded")]
    MissingUnsup(String),
    #[error("lexicon line {line}: expected `term<TAB>group`")]
    MalformedLexicon { line: usize },
    #[error(transparent)]
    Unsup(#[from] UnsupError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Per-token feature strings, sorted and deduplicated. The CRF adds an
/// implicit bias feature to every token.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FeatureVector {
    pub tokens: Vec<Vec<String>>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    fn from_sets(sets: Vec<BTreeSet<String>>) -> FeatureVector {
        FeatureVector {
            tokens: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureGroupConfig {
    /// Enabled group letters, a subset of `ABCDGHJKLM`.
    pub letters: BTreeSet<char>,
    pub window: usize,
    pub affix_lengths: Vec<usize>,
    pub pattern_inventory: String,
}

impl Default for FeatureGroupConfig {
    fn default() -> Self {
        FeatureGroupConfig {
            letters: "ABC".chars().collect(),
            window: 2,
            affix_lengths: vec![1, 2, 3, 4],
            pattern_inventory: "default".to_string(),
        }
    }
}

impl FeatureGroupConfig {
    pub fn with_letters(letters: &str) -> Result<FeatureGroupConfig, FeatgenError> {
        Ok(FeatureGroupConfig {
            letters: parse_letters(letters)?,
            ..FeatureGroupConfig::default()
        })
    }

    pub fn has(&self, letter: char) -> bool {
        self.letters.contains(&letter)
    }

    pub fn letter_string(&self) -> String {
        self.letters.iter().collect()
    }
}

pub fn parse_letters(letters: &str) -> Result<BTreeSet<char>, FeatgenError> {
    letters
        .chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| {
            let c = c.to_ascii_uppercase();
            if ALL_LETTERS.contains(c) {
                Ok(c)
            } else {
                Err(FeatgenError::UnknownLetter(c))
            }
        })
        .collect()
}

/// Normalized multi-token terms mapped to a semantic group tag.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: HashMap<Vec<String>, String>,
    max_len: usize,
}

impl Lexicon {
    pub fn new() -> Lexicon {
        Lexicon::default()
    }

    /// Adds `term` (space-separated tokens, normalized on insert).
    pub fn insert(&mut self, term: &str, group: &str) {
        let toks: Vec<String> = term.split(' ').filter(|t| !t.is_empty()).map(preprocess).collect();
        if toks.is_empty() {
            return;
        }
        self.max_len = self.max_len.max(toks.len());
        self.entries.insert(toks, group.to_string());
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, toks: &[String]) -> Option<&str> {
        self.entries.get(toks).map(String::as_str)
    }
}

/// Reads `term<TAB>group` lines. Blank lines and `#` comments are skipped.
pub fn read_lexicon<R: BufRead>(reader: R) -> Result<Lexicon, FeatgenError> {
    let mut lex = Lexicon::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (term, group) = line
            .split_once('\t')
            .filter(|(t, g)| !t.trim().is_empty() && !g.trim().is_empty() && !g.contains('\t'))
            .ok_or(FeatgenError::MalformedLexicon { line: i + 1 })?;
        lex.insert(term.trim(), group.trim());
    }
    Ok(lex)
}

/// Semantic annotation of one token: the matched group and match length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SemanticTag {
    pub group: Option<String>,
    pub span_len: usize,
}

/// Greedy left-to-right longest match over normalized tokens.
pub fn semantic_spans(sentence: &Sentence, lexicon: &Lexicon) -> Vec<SemanticTag> {
    let norm: Vec<String> = sentence.tokens.iter().map(|t| t.normalized.clone()).collect();
    let n = norm.len();
    let mut out = vec![SemanticTag { group: None, span_len: 0 }; n];
    let mut i = 0;
    while i < n {
        let longest = (1..=lexicon.max_len().min(n - i))
            .rev()
            .find_map(|len| lexicon.get(&norm[i..i + len]).map(|g| (len, g)));
        match longest {
            Some((len, group)) => {
                for tag in &mut out[i..i + len] {
                    *tag = SemanticTag { group: Some(group.to_string()), span_len: len };
                }
                i += len;
            }
            None => i += 1,
        }
    }
    out
}

fn offsets(window: usize) -> impl Iterator<Item = isize> {
    -(window as isize)..=window as isize
}

fn neighbour(t: usize, o: isize, n: usize) -> Option<usize> {
    let j = t as isize + o;
    (j >= 0 && j < n as isize).then_some(j as usize)
}

fn shape(surface: &str) -> String {
    surface
        .chars()
        .map(|c| {
            if c.is_uppercase() {
                'X'
            } else if c.is_alphabetic() {
                'x'
            } else if c.is_numeric() {
                '0'
            } else {
                c
            }
        })
        .collect()
}

fn orthographic(surface: &str, feats: &mut BTreeSet<String>) {
    let chars: Vec<char> = surface.chars().collect();
    let letters = chars.iter().filter(|c| c.is_alphabetic()).count();
    let digits = chars.iter().filter(|c| c.is_numeric()).count();
    if chars.first().is_some_and(|c| c.is_uppercase()) {
        feats.insert("A:initcap".into());
    }
    if letters > 0 && chars.iter().filter(|c| c.is_alphabetic()).all(|c| c.is_uppercase()) {
        feats.insert("A:allcaps".into());
    }
    if digits > 0 {
        feats.insert("A:hasdigit".into());
    }
    if letters > 0 && digits > 0 {
        feats.insert("A:alnum".into());
    }
    if !chars.is_empty() && chars.iter().all(|c| !c.is_alphanumeric()) {
        feats.insert("A:punct".into());
    }
    feats.insert(format!("A:shape={}", shape(surface)));
}

/// Group A: identity, orthography, affixes and character n-grams.
pub fn emit_group_a(sentence: &Sentence, cfg: &FeatureGroupConfig) -> Vec<BTreeSet<String>> {
    let n = sentence.len();
    let lower: Vec<String> = sentence.tokens.iter().map(|t| t.surface.to_lowercase()).collect();
    (0..n)
        .map(|t| {
            let mut f = BTreeSet::new();
            for o in offsets(cfg.window) {
                if let Some(j) = neighbour(t, o, n) {
                    f.insert(format!("A:w@{o}={}", lower[j]));
                }
            }
            orthographic(&sentence.tokens[t].surface, &mut f);
            let chars: Vec<char> = lower[t].chars().collect();
            for &len in &cfg.affix_lengths {
                if len >= 1 && chars.len() >= len {
                    f.insert(format!("A:pre{len}={}", chars[..len].iter().collect::<String>()));
                    f.insert(format!("A:suf{len}={}", chars[chars.len() - len..].iter().collect::<String>()));
                }
            }
            for size in [2, 3] {
                for w in chars.windows(size) {
                    f.insert(format!("A:c{size}={}", w.iter().collect::<String>()));
                }
            }
            f
        })
        .collect()
}

/// Group B: POS features. `None` when any token lacks a POS tag.
pub fn emit_group_b(sentence: &Sentence, cfg: &FeatureGroupConfig) -> Option<Vec<BTreeSet<String>>> {
    let tags: Vec<&str> = sentence
        .tokens
        .iter()
        .map(|t| t.pos.as_deref())
        .collect::<Option<Vec<_>>>()?;
    let n = tags.len();
    Some(
        (0..n)
            .map(|t| {
                let mut f = BTreeSet::new();
                for o in offsets(cfg.window) {
                    if let Some(j) = neighbour(t, o, n) {
                        f.insert(format!("B:pos@{o}={}", tags[j]));
                    }
                }
                if t > 0 {
                    f.insert(format!("B:posbi={}_{}", tags[t - 1], tags[t]));
                }
                f
            })
            .collect(),
    )
}

/// Group C: semantic group of the covering lexicon match, `NONE` if uncovered.
pub fn emit_group_c(sentence: &Sentence, lexicon: &Lexicon, cfg: &FeatureGroupConfig) -> Vec<BTreeSet<String>> {
    let spans = semantic_spans(sentence, lexicon);
    let n = spans.len();
    (0..n)
        .map(|t| {
            offsets(cfg.window)
                .filter_map(|o| {
                    neighbour(t, o, n).map(|j| {
                        format!("C:sem@{o}={}", spans[j].group.as_deref().unwrap_or("NONE"))
                    })
                })
                .collect()
        })
        .collect()
}

/// Assembles the enabled groups for whole sentences.
#[derive(Clone, Debug)]
pub struct Featurizer {
    pub cfg: FeatureGroupConfig,
    pub lexicon: Option<Lexicon>,
    pub unsup: Option<(UnsupResources, UnsupFeatureConfig)>,
}

impl Featurizer {
    pub fn new(
        cfg: FeatureGroupConfig,
        lexicon: Option<Lexicon>,
        unsup: Option<(UnsupResources, UnsupFeatureConfig)>,
    ) -> Result<Featurizer, FeatgenError> {
        if cfg.has('C') && lexicon.is_none() {
            return Err(FeatgenError::MissingLexicon);
        }
        let wanted: String = cfg.letters.iter().filter(|c| UNSUP_LETTERS.contains(*c)).collect();
        if !wanted.is_empty() {
            match &unsup {
                None => return Err(FeatgenError::MissingUnsup(wanted)),
                Some((_, ucfg)) => {
                    let have: String = ucfg.groups.keys().collect();
                    if have != wanted {
                        return Err(FeatgenError::MissingUnsup(wanted));
                    }
                }
            }
        }
        Ok(Featurizer { cfg, lexicon, unsup })
    }

    /// Union of all enabled groups per token, deduplicated and sorted.
    pub fn featurize(&self, sentence: &Sentence) -> Result<FeatureVector, FeatgenError> {
        let mut sets: Vec<BTreeSet<String>> = vec![BTreeSet::new(); sentence.len()];
        let mut merge = |part: Vec<BTreeSet<String>>| {
            for (s, p) in sets.iter_mut().zip(part) {
                s.extend(p);
            }
        };
        if self.cfg.has('A') {
            merge(emit_group_a(sentence, &self.cfg));
        }
        if self.cfg.has('B') {
            if let Some(b) = emit_group_b(sentence, &self.cfg) {
                merge(b);
            }
        }
        if self.cfg.has('C') {
            let lex = self.lexicon.as_ref().ok_or(FeatgenError::MissingLexicon)?;
            merge(emit_group_c(sentence, lex, &self.cfg));
        }
        if let Some((res, ucfg)) = &self.unsup {
            let u = emit_unsup_features(sentence, res, ucfg, self.cfg.window)?;
            merge(u.into_iter().map(|v| v.into_iter().collect()).collect());
        }
        Ok(FeatureVector::from_sets(sets))
    }

    pub fn featurize_all(&self, sentences: &[Sentence]) -> Result<Vec<FeatureVector>, FeatgenError> {
        sentences.iter().map(|s| self.featurize(s)).collect()
    }

    /// Warnings to record in a run manifest (currently: B without POS).
    pub fn warnings(&self, sentences: &[Sentence]) -> Vec<String> {
        let missing = sentences.iter().filter(|s| !s.has_pos()).count();
        if self.cfg.has('B') && missing > 0 {
            vec![format!(
                "feature group B disabled for {missing} sentence(s) without a POS column"
            )]
        } else {
            Vec::new()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{BioTag, Token};

    fn sentence(words: &[&str]) -> Sentence {
        Sentence {
            tokens: words.iter().map(|w| Token::new(w, None, BioTag::Outside)).collect(),
            doc_id: String::new(),
            seq_id: 0,
        }
    }

    fn tagged(words: &[(&str, &str)]) -> Sentence {
        Sentence {
            tokens: words.iter().map(|(w, p)| Token::new(w, Some(p), BioTag::Outside)).collect(),
            doc_id: String::new(),
            seq_id: 0,
        }
    }

    fn lexicon(entries: &[(&str, &str)]) -> Lexicon {
        let mut l = Lexicon::new();
        for (t, g) in entries {
            l.insert(t, g);
        }
        l
    }

    fn has(set: &BTreeSet<String>, f: &str) -> bool {
        set.contains(f)
    }

    #[test]
    fn group_a_templates() {
        let cfg = FeatureGroupConfig { window: 0, ..Default::default() };
        let a = emit_group_a(&sentence(&["Warfarin"]), &cfg);
        for f in ["A:shape=Xxxxxxxx", "A:pre3=war", "A:suf3=rin", "A:initcap", "A:w@0=warfarin"] {
            assert!(has(&a[0], f), "missing {f}");
        }
        let b = emit_group_a(&sentence(&["81mg"]), &cfg);
        assert!(has(&b[0], "A:hasdigit"));
        assert!(has(&b[0], "A:shape=00xx"));
        assert!(has(&b[0], "A:alnum"));
    }

    #[test]
    fn group_a_window() {
        let cfg = FeatureGroupConfig { window: 1, ..Default::default() };
        let a = emit_group_a(&sentence(&["a", "b"]), &cfg);
        assert!(has(&a[1], "A:w@-1=a"));
        assert!(has(&a[0], "A:w@1=b"));
        assert!(!a[0].iter().any(|f| f.starts_with("A:w@-1")));
    }

    #[test]
    fn group_b_pos() {
        let cfg = FeatureGroupConfig { window: 0, ..Default::default() };
        let b = emit_group_b(&tagged(&[("dog", "NN")]), &cfg).unwrap();
        assert_eq!(b[0].iter().collect::<Vec<_>>(), ["B:pos@0=NN"]);
        let b = emit_group_b(&tagged(&[("the", "DT"), ("dog", "NN")]), &cfg).unwrap();
        assert!(has(&b[1], "B:posbi=DT_NN"));
        assert!(emit_group_b(&sentence(&["x"]), &cfg).is_none());
    }

    #[test]
    fn missing_pos_disables_b_with_warning() {
        let cfg = FeatureGroupConfig::with_letters("AB").unwrap();
        let fz = Featurizer::new(cfg.clone(), None, None).unwrap();
        let s = sentence(&["x", "y"]);
        let fv = fz.featurize(&s).unwrap();
        assert!(fv.tokens.iter().flatten().all(|f| !f.starts_with("B:")));
        assert_eq!(fz.warnings(std::slice::from_ref(&s)).len(), 1);
    }

    #[test]
    fn longest_match_semantics() {
        let lex = lexicon(&[("atrial fibrillation", "DISO"), ("fibrillation", "FIND")]);
        let spans = semantic_spans(&sentence(&["has", "atrial", "fibrillation"]), &lex);
        assert_eq!(spans[0], SemanticTag { group: None, span_len: 0 });
        assert_eq!(spans[1], SemanticTag { group: Some("DISO".into()), span_len: 2 });
        assert_eq!(spans[2], SemanticTag { group: Some("DISO".into()), span_len: 2 });
        let empty = semantic_spans(&sentence(&["has", "atrial"]), &Lexicon::new());
        assert!(empty.iter().all(|s| s.group.is_none() && s.span_len == 0));
    }

    #[test]
    fn lexicon_matching_is_case_insensitive() {
        let lex = lexicon(&[("Atrial Fibrillation", "DISO")]);
        let spans = semantic_spans(&sentence(&["ATRIAL", "fibrillation"]), &lex);
        assert_eq!(spans[0].span_len, 2);
    }

    #[test]
    fn group_c_strings() {
        let lex = lexicon(&[("atrial fibrillation", "DISO")]);
        let cfg = FeatureGroupConfig { window: 1, ..Default::default() };
        let c = emit_group_c(&sentence(&["has", "atrial", "fibrillation"]), &lex, &cfg);
        assert!(has(&c[1], "C:sem@0=DISO"));
        assert!(has(&c[0], "C:sem@0=NONE"));
        assert!(has(&c[0], "C:sem@1=DISO"));
        assert!(has(&c[2], "C:sem@-1=DISO"));
    }

    #[test]
    fn assemble_is_additive() {
        let lex = lexicon(&[("pain", "DISO")]);
        let s = tagged(&[("Chest", "NN"), ("pain", "NN")]);
        let only_a = Featurizer::new(FeatureGroupConfig::with_letters("A").unwrap(), None, None).unwrap();
        let abc = Featurizer::new(FeatureGroupConfig::with_letters("ABC").unwrap(), Some(lex), None).unwrap();
        let fa = only_a.featurize(&s).unwrap();
        let fabc = abc.featurize(&s).unwrap();
        let cfg = FeatureGroupConfig::with_letters("A").unwrap();
        let direct: Vec<Vec<String>> = emit_group_a(&s, &cfg).into_iter().map(|x| x.into_iter().collect()).collect();
        assert_eq!(fa.tokens, direct);
        for (a, b) in fa.tokens.iter().zip(&fabc.tokens) {
            assert!(a.iter().all(|f| b.contains(f)));
            assert!(b.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn config_errors() {
        assert!(matches!(FeatureGroupConfig::with_letters("AZ"), Err(FeatgenError::UnknownLetter('Z'))));
        let cfg = FeatureGroupConfig::with_letters("AC").unwrap();
        assert!(matches!(Featurizer::new(cfg, None, None), Err(FeatgenError::MissingLexicon)));
        let cfg = FeatureGroupConfig::with_letters("AD").unwrap();
        assert!(matches!(Featurizer::new(cfg, None, None), Err(FeatgenError::MissingUnsup(_))));
    }

    #[test]
    fn reads_lexicon_file() {
        let lex = read_lexicon("atrial fibrillation\tDISO\n# comment\n\naspirin\tCHEM\n".as_bytes()).unwrap();
        assert_eq!(lex.len(), 2);
        assert_eq!(lex.max_len(), 2);
        assert!(read_lexicon("no tab here\n".as_bytes()).is_err());
    }
}
