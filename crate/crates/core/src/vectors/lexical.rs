//! Training-free "lexical" token vectors built from character n-grams.
//!
//! Every n-gram key is assigned a fixed pseudo-random unit vector derived
//! from a hash of `(key, seed)`; a token's vector is the normalized sum of
//! the vectors of its n-gram multiset. No token is ever out of vocabulary.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{DenseVector, VectorError};
use crate::math;

const BOS: char = '^';
const EOS: char = '$';

/// Which n-gram families contribute to a lexical vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NgramConfig {
    pub uni: bool,
    pub bi: bool,
    pub tri: bool,
    pub tetra: bool,
    pub skip: bool,
}

impl Default for NgramConfig {
    fn default() -> Self {
        NgramConfig {
            uni: true,
            bi: true,
            tri: true,
            tetra: true,
            skip: true,
        }
    }
}

impl NgramConfig {
    pub fn describe(&self) -> String {
        let mut parts = Vec::new();
        for (on, name) in [
            (self.uni, "uni"),
            (self.bi, "bi"),
            (self.tri, "tri"),
            (self.tetra, "tetra"),
            (self.skip, "skip"),
        ] {
            if on {
                parts.push(name);
            }
        }
        parts.join(",")
    }

    pub fn parse(s: &str) -> Result<NgramConfig, VectorError> {
        let mut cfg = NgramConfig {
            uni: false,
            bi: false,
            tri: false,
            tetra: false,
            skip: false,
        };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "uni" => cfg.uni = true,
                "bi" => cfg.bi = true,
                "tri" => cfg.tri = true,
                "tetra" => cfg.tetra = true,
                "skip" => cfg.skip = true,
                other => {
                    return Err(VectorError::MalformedLexical(format!(
                        "unknown n-gram family `{other}`"
                    )))
                }
            }
        }
        Ok(cfg)
    }
}

/// Character n-grams of one token, grouped by family. Multisets: repeats are kept.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CharNgrams {
    pub uni: Vec<String>,
    pub bi: Vec<String>,
    pub tri: Vec<String>,
    pub tetra: Vec<String>,
    pub skip: Vec<String>,
}

impl CharNgrams {
    /// Family-namespaced keys, so that e.g. a literal `a_b` tri-gram never
    /// collides with the skip-gram `a_b`.
    pub fn keys(&self) -> impl Iterator<Item = String> + '_ {
        self.uni
            .iter()
            .map(|g| format!("1:{g}"))
            .chain(self.bi.iter().map(|g| format!("2:{g}")))
            .chain(self.tri.iter().map(|g| format!("3:{g}")))
            .chain(self.tetra.iter().map(|g| format!("4:{g}")))
            .chain(self.skip.iter().map(|g| format!("s:{g}")))
    }

    pub fn len(&self) -> usize {
        self.uni.len() + self.bi.len() + self.tri.len() + self.tetra.len() + self.skip.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn windows(chars: &[char], n: usize) -> Vec<String> {
    if chars.len() < n {
        return Vec::new();
    }
    chars.windows(n).map(|w| w.iter().collect()).collect()
}

/// Uni-grams over the bare token; 2/3/4-grams and `x_z` skip-grams over the
/// token padded with `^`/`$`. Skip-grams whose ends are both boundary
/// markers (`^_$`) say nothing about the token and are dropped.
pub fn char_ngrams(token: &str, cfg: &NgramConfig) -> CharNgrams {
    let bare: Vec<char> = token.chars().collect();
    let mut padded = Vec::with_capacity(bare.len() + 2);
    padded.push(BOS);
    padded.extend_from_slice(&bare);
    padded.push(EOS);

    let mut out = CharNgrams::default();
    if cfg.uni {
        out.uni = bare.iter().map(|c| c.to_string()).collect();
    }
    if cfg.bi {
        out.bi = windows(&padded, 2);
    }
    if cfg.tri {
        out.tri = windows(&padded, 3);
    }
    if cfg.tetra {
        out.tetra = windows(&padded, 4);
    }
    if cfg.skip && padded.len() >= 3 {
        out.skip = padded
            .windows(3)
            .filter(|w| !(w[0] == BOS && w[2] == EOS))
            .map(|w| format!("{}_{}", w[0], w[2]))
            .collect();
    }
    out
}

/// Parameters from which every lexical vector is regenerated on demand.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LexicalTable {
    pub dim_lex: usize,
    pub seed: u64,
    pub config: NgramConfig,
}

impl LexicalTable {
    pub fn new(dim_lex: usize, seed: u64, config: NgramConfig) -> Result<LexicalTable, VectorError> {
        if dim_lex < 2 {
            return Err(VectorError::DimTooSmall(dim_lex));
        }
        Ok(LexicalTable {
            dim_lex,
            seed,
            config,
        })
    }

    /// The fixed unit vector assigned to one n-gram key.
    pub fn ngram_vector(&self, key: &str) -> Vec<f64> {
        let h = math::fnv1a64(key.as_bytes()) ^ self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        let mut rng = ChaCha8Rng::seed_from_u64(h);
        let mut v: Vec<f64> = (0..self.dim_lex)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        math::normalize_in_place(&mut v);
        v
    }

    pub fn vector(&self, token: &str) -> DenseVector {
        lexical_vector(token, self)
    }

    /// One-line description: `lexical seed=<u64> dim_lex=<n> ngrams=<families>`.
    pub fn to_line(&self) -> String {
        format!(
            "lexical seed={} dim_lex={} ngrams={}",
            self.seed,
            self.dim_lex,
            self.config.describe()
        )
    }

    pub fn from_line(line: &str) -> Result<LexicalTable, VectorError> {
        let bad = |m: &str| VectorError::MalformedLexical(m.to_string());
        let mut parts = line.split_whitespace();
        if parts.next() != Some("lexical") {
            return Err(bad("missing `lexical` header"));
        }
        let (mut seed, mut dim, mut cfg) = (None, None, None);
        for p in parts {
            let (k, v) = p.split_once('=').ok_or_else(|| bad(p))?;
            match k {
                "seed" => seed = Some(v.parse().map_err(|_| bad(p))?),
                "dim_lex" => dim = Some(v.parse().map_err(|_| bad(p))?),
                "ngrams" => cfg = Some(NgramConfig::parse(v)?),
                _ => return Err(bad(p)),
            }
        }
        LexicalTable::new(
            dim.ok_or_else(|| bad("missing dim_lex"))?,
            seed.ok_or_else(|| bad("missing seed"))?,
            cfg.ok_or_else(|| bad("missing ngrams"))?,
        )
    }
}

/// Normalized sum of the n-gram vectors of `token`.
pub fn lexical_vector(token: &str, table: &LexicalTable) -> DenseVector {
    let mut acc = vec![0.0; table.dim_lex];
    for key in char_ngrams(token, &table.config).keys() {
        for (a, x) in acc.iter_mut().zip(table.ngram_vector(&key)) {
            *a += x;
        }
    }
    math::normalize_in_place(&mut acc);
    DenseVector(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(v: &[String]) -> Vec<&str> {
        let mut out: Vec<&str> = v.iter().map(String::as_str).collect();
        out.sort_unstable();
        out
    }

    #[test]
    fn ngrams_of_at() {
        let g = char_ngrams("at", &NgramConfig::default());
        assert_eq!(sorted(&g.uni), ["a", "t"]);
        assert_eq!(sorted(&g.bi), ["^a", "at", "t$"]);
        assert_eq!(sorted(&g.skip), ["^_t", "a_$"]);
        assert_eq!(sorted(&g.tri), ["^at", "at$"]);
        assert_eq!(sorted(&g.tetra), ["^at$"]);
    }

    #[test]
    fn ngrams_of_single_char() {
        let g = char_ngrams("a", &NgramConfig::default());
        assert_eq!(sorted(&g.uni), ["a"]);
        assert_eq!(sorted(&g.bi), ["^a", "a$"]);
        assert_eq!(sorted(&g.tri), ["^a$"]);
        assert!(g.tetra.is_empty());
        assert!(g.skip.is_empty());
    }

    #[test]
    fn ngrams_keep_repeats() {
        let g = char_ngrams("aaa", &NgramConfig::default());
        assert_eq!(g.uni.iter().filter(|u| *u == "a").count(), 3);
    }

    #[test]
    fn lexical_vectors_are_unit_and_deterministic() {
        let t = LexicalTable::new(40, 7, NgramConfig::default()).unwrap();
        let a = lexical_vector("kidney", &t);
        assert!((a.norm() - 1.0).abs() < 1e-9);
        assert_eq!(a, lexical_vector("kidney", &t));
        let other_seed = LexicalTable::new(40, 8, NgramConfig::default()).unwrap();
        assert_ne!(a, lexical_vector("kidney", &other_seed));
    }

    #[test]
    fn shared_ngrams_mean_closer_vectors() {
        let t = LexicalTable::new(40, 7, NgramConfig::default()).unwrap();
        let k = t.vector("kidney");
        assert!(k.cosine(&t.vector("kidneys")) > k.cosine(&t.vector("warfarin")));
    }

    #[test]
    fn anagrams_differ() {
        let t = LexicalTable::new(40, 3, NgramConfig::default()).unwrap();
        assert_ne!(t.vector("ab"), t.vector("ba"));
    }

    #[test]
    fn table_line_round_trip() {
        let t = LexicalTable::new(
            16,
            99,
            NgramConfig {
                skip: false,
                ..NgramConfig::default()
            },
        )
        .unwrap();
        assert_eq!(LexicalTable::from_line(&t.to_line()).unwrap(), t);
        assert!(LexicalTable::from_line("lexical seed=1").is_err());
    }
}
