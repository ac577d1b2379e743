//! BIO-labeled sequence data: ingestion, normalization and annotation-unit counting.
//!
//! Input is CoNLL-style TSV, one token per line with columns
//! `surface [POS] BIO-tag`, a blank line between sentences and
//! `# doc <id>` comment lines opening documents.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::ops::{Add, AddAssign};

use thiserror::Error;

pub const NUM_PLACEHOLDER: &str = "<num>";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("empty input")]
    EmptyInput,
    #[error("line {line}: expected 2 or 3 tab-separated columns, found {found}")]
    Malformed { line: usize, found: usize },
    #[error("line {line}: invalid BIO label `{label}`")]
    InvalidLabel { line: usize, label: String },
    #[error("line {line}: illegal BIO transition `{prev}` -> `{label}`")]
    IllegalTransition {
        line: usize,
        prev: String,
        label: String,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// A single BIO tag.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BioTag {
    Outside,
    Begin(String),
    Inside(String),
}

impl BioTag {
    pub fn parse(s: &str) -> Option<BioTag> {
        if s == "O" {
            return Some(BioTag::Outside);
        }
        let (prefix, ty) = s.split_once('-')?;
        if ty.is_empty() {
            return None;
        }
        match prefix {
            "B" => Some(BioTag::Begin(ty.to_string())),
            "I" => Some(BioTag::Inside(ty.to_string())),
            _ => None,
        }
    }

    pub fn concept_type(&self) -> Option<&str> {
        match self {
            BioTag::Outside => None,
            BioTag::Begin(t) | BioTag::Inside(t) => Some(t),
        }
    }

    /// Whether `self` may directly follow `prev` inside a sentence.
    pub fn may_follow(&self, prev: Option<&BioTag>) -> bool {
        match self {
            BioTag::Inside(ty) => matches!(prev, Some(BioTag::Begin(p)) | Some(BioTag::Inside(p)) if p == ty),
            _ => true,
        }
    }
}

impl fmt::Display for BioTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BioTag::Outside => f.write_str("O"),
            BioTag::Begin(t) => write!(f, "B-{t}"),
            BioTag::Inside(t) => write!(f, "I-{t}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub normalized: String,
    pub pos: Option<String>,
    pub gold: BioTag,
}

impl Token {
    pub fn new(surface: &str, pos: Option<&str>, gold: BioTag) -> Token {
        Token {
            surface: surface.to_string(),
            normalized: preprocess(surface),
            pos: pos.map(str::to_string),
            gold,
        }
    }

    /// Key used to look the token up in embedding and lexical tables.
    /// Punctuation-only tokens normalize to the empty string, so they fall
    /// back to their lowercased surface.
    pub fn vector_key(&self) -> String {
        if self.normalized.is_empty() {
            self.surface.to_lowercase()
        } else {
            self.normalized.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    pub doc_id: String,
    pub seq_id: usize,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn labels(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.gold.to_string()).collect()
    }

    pub fn has_pos(&self) -> bool {
        self.tokens.iter().all(|t| t.pos.is_some())
    }
}

/// A labeled concept occurrence, token indices inclusive.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConceptSpan {
    pub concept_type: String,
    pub start: usize,
    pub end: usize,
}

impl ConceptSpan {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Annotation units: sequences, tokens and concepts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct UnitCounts {
    pub sequences: usize,
    pub tokens: usize,
    pub concepts: usize,
}

impl Add for UnitCounts {
    type Output = UnitCounts;
    fn add(self, o: UnitCounts) -> UnitCounts {
        UnitCounts {
            sequences: self.sequences + o.sequences,
            tokens: self.tokens + o.tokens,
            concepts: self.concepts + o.concepts,
        }
    }
}

impl AddAssign for UnitCounts {
    fn add_assign(&mut self, o: UnitCounts) {
        *self = *self + o;
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    pub sentences: Vec<Sentence>,
    pub label_alphabet: BTreeSet<String>,
    pub totals: UnitCounts,
}

impl Corpus {
    /// Builds a corpus from sentences, renumbering `seq_id` densely.
    pub fn from_sentences(mut sentences: Vec<Sentence>) -> Corpus {
        for (i, s) in sentences.iter_mut().enumerate() {
            s.seq_id = i;
        }
        let label_alphabet = sentences
            .iter()
            .flat_map(|s| s.tokens.iter().map(|t| t.gold.to_string()))
            .collect();
        let totals = count_units(sentences.iter());
        Corpus {
            sentences,
            label_alphabet,
            totals,
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// A new corpus made of the given sentences (by seq_id), renumbered.
    pub fn subset(&self, ids: &[usize]) -> Corpus {
        Corpus::from_sentences(ids.iter().map(|&i| self.sentences[i].clone()).collect())
    }
}

/// Lowercases, replaces maximal digit runs with `<num>`, and maps
/// punctuation-only tokens to the empty string.
pub fn preprocess(surface: &str) -> String {
    if !surface.is_empty() && surface.chars().all(|c| !c.is_alphanumeric()) {
        return String::new();
    }
    let mut out = String::with_capacity(surface.len());
    let mut in_digits = false;
    for c in surface.chars() {
        if c.is_ascii_digit() {
            if !in_digits {
                out.push_str(NUM_PLACEHOLDER);
                in_digits = true;
            }
        } else {
            in_digits = false;
            out.extend(c.to_lowercase());
        }
    }
    out
}

pub fn read_conll<R: BufRead>(reader: R) -> Result<Corpus, CorpusError> {
    let mut sentences = Vec::new();
    let mut current: Vec<Token> = Vec::new();
    let mut doc_id = String::new();
    let mut sentence_doc = String::new();

    let flush = |current: &mut Vec<Token>, sentences: &mut Vec<Sentence>, doc: &str| {
        if !current.is_empty() {
            sentences.push(Sentence {
                tokens: std::mem::take(current),
                doc_id: doc.to_string(),
                seq_id: 0,
            });
        }
    };

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            flush(&mut current, &mut sentences, &sentence_doc);
            continue;
        }
        if let Some(rest) = line.strip_prefix("# doc") {
            flush(&mut current, &mut sentences, &sentence_doc);
            doc_id = rest.trim().to_string();
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let (surface, pos, tag) = match cols.as_slice() {
            [s, t] => (*s, None, *t),
            [s, p, t] => (*s, Some(*p), *t),
            _ => {
                return Err(CorpusError::Malformed {
                    line: lineno,
                    found: cols.len(),
                })
            }
        };
        let gold = BioTag::parse(tag).ok_or_else(|| CorpusError::InvalidLabel {
            line: lineno,
            label: tag.to_string(),
        })?;
        let prev = current.last().map(|t| &t.gold);
        if !gold.may_follow(prev) {
            return Err(CorpusError::IllegalTransition {
                line: lineno,
                prev: prev.map_or_else(|| "<start>".to_string(), ToString::to_string),
                label: tag.to_string(),
            });
        }
        if current.is_empty() {
            sentence_doc = doc_id.clone();
        }
        current.push(Token::new(surface, pos, gold));
    }
    flush(&mut current, &mut sentences, &sentence_doc);

    if sentences.is_empty() {
        return Err(CorpusError::EmptyInput);
    }
    Ok(Corpus::from_sentences(sentences))
}

pub fn write_conll<W: Write>(corpus: &Corpus, mut w: W) -> std::io::Result<()> {
    let mut doc: Option<&str> = None;
    for s in &corpus.sentences {
        if doc != Some(s.doc_id.as_str()) {
            if !s.doc_id.is_empty() || doc.is_some() {
                writeln!(w, "# doc {}", s.doc_id)?;
            }
            doc = Some(&s.doc_id);
        }
        for t in &s.tokens {
            match &t.pos {
                Some(p) => writeln!(w, "{}\t{}\t{}", t.surface, p, t.gold)?,
                None => writeln!(w, "{}\t{}", t.surface, t.gold)?,
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Maximal B..I runs of a valid BIO sequence.
pub fn extract_concepts(sentence: &Sentence) -> Vec<ConceptSpan> {
    let tags: Vec<&BioTag> = sentence.tokens.iter().map(|t| &t.gold).collect();
    spans_from_tags(&tags)
}

/// Span decoding that also tolerates ill-formed sequences (as decoders may
/// produce): an `I-x` that cannot continue the open span starts a new one.
pub fn spans_from_tags<T: std::borrow::Borrow<BioTag>>(tags: &[T]) -> Vec<ConceptSpan> {
    let mut spans: Vec<ConceptSpan> = Vec::new();
    let mut open: Option<ConceptSpan> = None;
    for (i, tag) in tags.iter().enumerate() {
        match tag.borrow() {
            BioTag::Outside => {
                spans.extend(open.take());
            }
            BioTag::Begin(ty) => {
                spans.extend(open.take());
                open = Some(ConceptSpan {
                    concept_type: ty.clone(),
                    start: i,
                    end: i,
                });
            }
            BioTag::Inside(ty) => match open.as_mut() {
                Some(span) if span.concept_type == *ty => span.end = i,
                _ => {
                    spans.extend(open.take());
                    open = Some(ConceptSpan {
                        concept_type: ty.clone(),
                        start: i,
                        end: i,
                    });
                }
            },
        }
    }
    spans.extend(open);
    spans
}

/// Decodes label strings; unparseable strings count as `O`.
pub fn spans_from_labels<S: AsRef<str>>(labels: &[S]) -> Vec<ConceptSpan> {
    let tags: Vec<BioTag> = labels
        .iter()
        .map(|l| BioTag::parse(l.as_ref()).unwrap_or(BioTag::Outside))
        .collect();
    spans_from_tags(&tags)
}

pub fn count_units<'a, I>(sentences: I) -> UnitCounts
where
    I: IntoIterator<Item = &'a Sentence>,
{
    sentences
        .into_iter()
        .map(|s| UnitCounts {
            sequences: 1,
            tokens: s.len(),
            concepts: extract_concepts(s).len(),
        })
        .fold(UnitCounts::default(), Add::add)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(s: &str) -> Result<Corpus, CorpusError> {
        read_conll(s.as_bytes())
    }

    fn sentence(labels: &[&str]) -> Sentence {
        Sentence {
            tokens: labels
                .iter()
                .enumerate()
                .map(|(i, l)| Token::new(&format!("w{i}"), None, BioTag::parse(l).unwrap()))
                .collect(),
            doc_id: String::new(),
            seq_id: 0,
        }
    }

    #[test]
    fn reads_a_two_token_concept() {
        let c = read("pain\tNN\tB-problem\nkillers\tNN\tI-problem\n").unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(
            c.totals,
            UnitCounts {
                sequences: 1,
                tokens: 2,
                concepts: 1
            }
        );
        assert_eq!(c.sentences[0].tokens[0].pos.as_deref(), Some("NN"));
    }

    #[test]
    fn empty_stream_is_an_error() {
        assert!(matches!(read(""), Err(CorpusError::EmptyInput)));
        assert!(matches!(read("\n\n# doc 1\n"), Err(CorpusError::EmptyInput)));
    }

    #[test]
    fn inside_after_outside_is_rejected() {
        let err = read("x\tO\ny\tI-problem\n").unwrap_err();
        assert!(matches!(err, CorpusError::IllegalTransition { line: 2, .. }));
        let err = read("x\tB-test\ny\tI-problem\n").unwrap_err();
        assert!(matches!(err, CorpusError::IllegalTransition { .. }));
        let err = read("y\tI-problem\n").unwrap_err();
        assert!(matches!(err, CorpusError::IllegalTransition { line: 1, .. }));
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(matches!(
            read("a\tb\tc\td\n"),
            Err(CorpusError::Malformed { line: 1, found: 4 })
        ));
        assert!(matches!(read("single\n"), Err(CorpusError::Malformed { .. })));
        assert!(matches!(read("a\tX-foo\n"), Err(CorpusError::InvalidLabel { .. })));
    }

    #[test]
    fn doc_comments_and_dense_ids() {
        let c = read("# doc d1\na\tO\n\nb\tO\n# doc d2\nc\tB-x\n").unwrap();
        let ids: Vec<_> = c.sentences.iter().map(|s| (s.seq_id, s.doc_id.as_str())).collect();
        assert_eq!(ids, vec![(0, "d1"), (1, "d1"), (2, "d2")]);
    }

    #[test]
    fn preprocess_rules() {
        assert_eq!(preprocess("Blood"), "blood");
        assert_eq!(preprocess("81mg"), "<num>mg");
        assert_eq!(preprocess(","), "");
        assert_eq!(preprocess("..."), "");
        assert_eq!(preprocess("1.5"), "<num>.<num>");
        assert_eq!(preprocess("B12-x"), "b<num>-x");
    }

    #[test]
    fn concept_extraction() {
        let s = sentence(&["B-p", "I-p", "O", "B-t"]);
        let spans = extract_concepts(&s);
        assert_eq!(
            spans,
            vec![
                ConceptSpan { concept_type: "p".into(), start: 0, end: 1 },
                ConceptSpan { concept_type: "t".into(), start: 3, end: 3 },
            ]
        );
        assert!(extract_concepts(&sentence(&["O", "O"])).is_empty());
        assert_eq!(extract_concepts(&sentence(&["B-p", "B-p"])).len(), 2);
    }

    #[test]
    fn counts_units_of_constructed_sentences() {
        let a = sentence(&["B-p", "I-p", "O", "B-t"]);
        let b = sentence(&["B-p", "B-p"]);
        assert_eq!(
            count_units([&a, &b]),
            UnitCounts { sequences: 2, tokens: 6, concepts: 4 }
        );
        assert_eq!(count_units(std::iter::empty()), UnitCounts::default());
    }

    #[test]
    fn lenient_decoding_of_predictions() {
        let spans = spans_from_labels(&["O", "I-p", "I-p", "I-t"]);
        assert_eq!(spans.len(), 2);
        assert_eq!((spans[0].start, spans[0].end), (1, 2));
        assert_eq!((spans[1].start, spans[1].end), (3, 3));
    }

    #[test]
    fn write_then_read_is_identity() {
        let text = "# doc a\nPain\tNN\tB-problem\n,\t,\tO\n\n# doc b\nx\tO\n\n";
        let c = read(text).unwrap();
        let mut out = Vec::new();
        write_conll(&c, &mut out).unwrap();
        assert_eq!(String::from_utf8(out.clone()).unwrap(), text);
        assert_eq!(read_conll(out.as_slice()).unwrap(), c);
    }
}
