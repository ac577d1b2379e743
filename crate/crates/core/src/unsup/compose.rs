use crate::math;
use crate::vectors::{DenseVector, EmbeddingTable, LexicalTable};

/// Stand-in for the missing neighbour of a boundary bi-gram. Its word
/// vector is zero; its lexical vector is that of the literal string.
pub const PAD_TOKEN: &str = "<pad>";

/// Representation of a bi-gram or sentence.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceVector {
    /// Normalized sum of lexical vectors (`dim_lex`).
    pub lex_part: DenseVector,
    /// Normalized sum of in-vocabulary word embeddings (`dim`), zero when none.
    pub word_part: DenseVector,
    /// `normalize(concat(lex_part, word_part))`.
    pub combined: DenseVector,
}

/// Composes a span of (already normalized) token keys into a [`SequenceVector`].
/// Summation is order-free, so the result does not depend on token order.
pub fn compose_span_vector<S: AsRef<str>>(
    span: &[S],
    emb: &EmbeddingTable,
    lex: &LexicalTable,
) -> SequenceVector {
    let mut lex_acc = vec![0.0; lex.dim_lex];
    let mut word_acc = vec![0.0; emb.dim()];
    for tok in span {
        let tok = tok.as_ref();
        for (a, x) in lex_acc.iter_mut().zip(lex.vector(tok).0) {
            *a += x;
        }
        if tok == PAD_TOKEN {
            continue;
        }
        if let Some(w) = emb.get(tok) {
            for (a, x) in word_acc.iter_mut().zip(w) {
                *a += x;
            }
        }
    }
    math::normalize_in_place(&mut lex_acc);
    math::normalize_in_place(&mut word_acc);
    let mut combined = Vec::with_capacity(lex_acc.len() + word_acc.len());
    combined.extend_from_slice(&lex_acc);
    combined.extend_from_slice(&word_acc);
    math::normalize_in_place(&mut combined);
    SequenceVector {
        lex_part: DenseVector(lex_acc),
        word_part: DenseVector(word_acc),
        combined: DenseVector(combined),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vectors::NgramConfig;
    use proptest::prelude::*;

    fn tables() -> (EmbeddingTable, LexicalTable) {
        let emb = EmbeddingTable::from_rows(
            vec![
                ("kidney".into(), vec![3.0, 4.0, 0.0]),
                ("stone".into(), vec![0.0, 1.0, 1.0]),
                ("failure".into(), vec![-1.0, 0.5, 2.0]),
            ],
            3,
        )
        .unwrap();
        (emb, LexicalTable::new(8, 5, NgramConfig::default()).unwrap())
    }

    #[test]
    fn single_token_span() {
        let (emb, lex) = tables();
        let v = compose_span_vector(&["kidney"], &emb, &lex);
        assert_eq!(v.lex_part, lex.vector("kidney"));
        let w = v.word_part.as_slice();
        assert!((w[0] - 0.6).abs() < 1e-12 && (w[1] - 0.8).abs() < 1e-12);
        assert!((v.combined.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn oov_span_has_zero_word_part() {
        let (emb, lex) = tables();
        let v = compose_span_vector(&["zzz", "yyy"], &emb, &lex);
        assert!(v.word_part.is_zero());
        let mut expected = v.lex_part.0.clone();
        expected.extend(std::iter::repeat_n(0.0, 3));
        math::normalize_in_place(&mut expected);
        assert_eq!(v.combined.0, expected);
    }

    #[test]
    fn pad_has_no_word_vector() {
        let (emb, lex) = tables();
        let v = compose_span_vector(&[PAD_TOKEN], &emb, &lex);
        assert!(v.word_part.is_zero());
        let expected = lex.vector(PAD_TOKEN);
        assert!(v.lex_part.0.iter().zip(&expected.0).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    proptest! {
        #[test]
        fn combined_is_unit_and_order_free(
            toks in proptest::collection::vec(
                prop_oneof![Just("kidney".to_string()), Just("stone".to_string()), Just("failure".to_string()), "[a-z]{1,6}"], 1..6)
        ) {
            let (emb, lex) = tables();
            let v = compose_span_vector(&toks, &emb, &lex);
            prop_assert!((v.combined.norm() - 1.0).abs() < 1e-9);
            prop_assert!((v.lex_part.norm() - 1.0).abs() < 1e-9);
            let wn = v.word_part.norm();
            prop_assert!(wn == 0.0 || (wn - 1.0).abs() < 1e-9);
            let mut rev = toks.clone();
            rev.reverse();
            let r = compose_span_vector(&rev, &emb, &lex);
            for (a, b) in r.combined.0.iter().zip(&v.combined.0) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
