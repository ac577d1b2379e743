use std::collections::{BTreeMap, HashMap};

use super::{assign_cluster, compose_span_vector, Codebook, SpaceTag, UnsupError, PAD_TOKEN};
use crate::corpus::Sentence;
use crate::math;
use crate::vectors::{EmbeddingTable, LexicalTable};

/// Where a group's cluster id is attached.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Apply {
    /// The token's own id at every offset of the context window.
    Window,
    /// The bi-gram ending at the token, `(t-1, t)`.
    LeftBigram,
    /// The bi-gram starting at the token, `(t, t+1)`.
    RightBigram,
    /// The sentence id, attached to every token.
    WholeSentence,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GroupSpec {
    pub space: SpaceTag,
    pub k: usize,
    pub apply: Apply,
}

impl GroupSpec {
    pub fn codebook_id(&self) -> (SpaceTag, usize) {
        (self.space, self.k)
    }
}

/// Enabled unsupervised groups, keyed by letter.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnsupFeatureConfig {
    pub groups: BTreeMap<char, GroupSpec>,
}

pub const UNSUP_LETTERS: [char; 7] = ['D', 'G', 'H', 'J', 'K', 'L', 'M'];

impl UnsupFeatureConfig {
    /// Default letter inventory: D/G word clusters (500/100), H lexical (500),
    /// J/K left/right bi-gram (500), L/M sentence (100/500).
    pub fn default_spec(letter: char) -> Option<GroupSpec> {
        let (space, k, apply) = match letter {
            'D' => (SpaceTag::Word, 500, Apply::Window),
            'G' => (SpaceTag::Word, 100, Apply::Window),
            'H' => (SpaceTag::Lexical, 500, Apply::Window),
            'J' => (SpaceTag::Bigram, 500, Apply::LeftBigram),
            'K' => (SpaceTag::Bigram, 500, Apply::RightBigram),
            'L' => (SpaceTag::Sentence, 100, Apply::WholeSentence),
            'M' => (SpaceTag::Sentence, 500, Apply::WholeSentence),
            _ => return None,
        };
        Some(GroupSpec { space, k, apply })
    }

    /// The unsupervised letters found in `letters`, with default specs and
    /// `k` overridden from `k_overrides` where present.
    pub fn for_letters(letters: &str, k_overrides: &BTreeMap<char, usize>) -> UnsupFeatureConfig {
        let groups = letters
            .chars()
            .filter_map(|c| {
                let mut spec = Self::default_spec(c)?;
                if let Some(&k) = k_overrides.get(&c) {
                    spec.k = k;
                }
                Some((c, spec))
            })
            .collect();
        UnsupFeatureConfig { groups }
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Distinct codebooks the enabled groups need.
    pub fn required_codebooks(&self) -> Vec<(SpaceTag, usize)> {
        let mut ids: Vec<_> = self.groups.values().map(GroupSpec::codebook_id).collect();
        ids.sort();
        ids.dedup();
        ids
    }
}

/// Tables and codebooks backing unsupervised feature emission.
#[derive(Clone, Debug)]
pub struct UnsupResources {
    pub embeddings: EmbeddingTable,
    pub lexical: LexicalTable,
    pub codebooks: HashMap<(SpaceTag, usize), Codebook>,
}

impl UnsupResources {
    fn codebook(&self, letter: char, spec: &GroupSpec) -> Result<&Codebook, UnsupError> {
        self.codebooks
            .get(&spec.codebook_id())
            .ok_or(UnsupError::MissingCodebook(letter))
    }

    /// Unit word vector of a token key, if in vocabulary.
    pub fn word_vector(&self, key: &str) -> Option<Vec<f64>> {
        if key == PAD_TOKEN {
            return None;
        }
        self.embeddings.get(key).map(math::normalized)
    }
}

fn ids_for_tokens(
    keys: &[String],
    space: SpaceTag,
    cb: &Codebook,
    res: &UnsupResources,
) -> Result<Vec<Option<usize>>, UnsupError> {
    keys.iter()
        .map(|k| {
            let v = match space {
                SpaceTag::Word => res.word_vector(k),
                SpaceTag::Lexical => Some(res.lexical.vector(k).0),
                SpaceTag::Bigram => Some(compose_span_vector(&[k.as_str()], &res.embeddings, &res.lexical).combined.0),
                SpaceTag::Sentence => Some(compose_span_vector(&[k.as_str()], &res.embeddings, &res.lexical).combined.0),
            };
            v.map(|v| assign_cluster(&v, cb)).transpose()
        })
        .collect()
}

fn bigram_id(a: &str, b: &str, cb: &Codebook, res: &UnsupResources) -> Result<usize, UnsupError> {
    let v = compose_span_vector(&[a, b], &res.embeddings, &res.lexical);
    assign_cluster(&v.combined.0, cb)
}

/// Per-token cluster-id feature strings for every enabled group.
///
/// Window groups emit `X@o=c<id>` on token `t` for the token at `t+o`
/// (out-of-vocabulary and out-of-sentence neighbours emit nothing);
/// bi-gram groups emit `X=c<id>`, padding sentence edges with [`PAD_TOKEN`];
/// sentence groups emit the sentence's `X=c<id>` on every token.
pub fn emit_unsup_features(
    sentence: &Sentence,
    res: &UnsupResources,
    cfg: &UnsupFeatureConfig,
    window: usize,
) -> Result<Vec<Vec<String>>, UnsupError> {
    let n = sentence.len();
    let keys: Vec<String> = sentence.tokens.iter().map(|t| t.vector_key()).collect();
    let mut out = vec![Vec::new(); n];
    let mut sentence_vec: Option<Vec<f64>> = None;

    for (&letter, spec) in &cfg.groups {
        let cb = res.codebook(letter, spec)?;
        match spec.apply {
            Apply::Window => {
                let ids = ids_for_tokens(&keys, spec.space, cb, res)?;
                for (t, feats) in out.iter_mut().enumerate() {
                    for o in -(window as isize)..=window as isize {
                        let j = t as isize + o;
                        if j < 0 || j >= n as isize {
                            continue;
                        }
                        if let Some(id) = ids[j as usize] {
                            feats.push(format!("{letter}@{o}=c{id}"));
                        }
                    }
                }
            }
            Apply::LeftBigram | Apply::RightBigram => {
                for t in 0..n {
                    let (a, b) = if spec.apply == Apply::LeftBigram {
                        (if t == 0 { PAD_TOKEN } else { keys[t - 1].as_str() }, keys[t].as_str())
                    } else {
                        (keys[t].as_str(), keys.get(t + 1).map_or(PAD_TOKEN, String::as_str))
                    };
                    let id = bigram_id(a, b, cb, res)?;
                    out[t].push(format!("{letter}=c{id}"));
                }
            }
            Apply::WholeSentence => {
                let v = sentence_vec.get_or_insert_with(|| {
                    compose_span_vector(&keys, &res.embeddings, &res.lexical).combined.0
                });
                let id = assign_cluster(v, cb)?;
                for feats in out.iter_mut() {
                    feats.push(format!("{letter}=c{id}"));
                }
            }
        }
    }
    Ok(out)
}
