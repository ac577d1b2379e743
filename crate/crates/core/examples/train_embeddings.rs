//! Trains skip-gram vectors on synthetic unlabeled text and shows that
//! concept terms end up nearest to other concept terms.

use activecrf::cli::synth::{generate, SynthParams};
use activecrf::corpus::preprocess;
use activecrf::vectors::{train_skipgram_with_report, LexicalTable, NgramConfig, SkipGramConfig};
use std::collections::HashSet;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = generate(&SynthParams {
        concept_types: 60,
        distractor_types: 60,
        train_sentences: 300,
        test_sentences: 10,
        ..SynthParams::default()
    })?;
    let stream: Vec<Vec<String>> = data
        .unlabeled
        .iter()
        .map(|s| s.iter().map(|t| preprocess(t)).filter(|t| !t.is_empty()).collect())
        .collect();
    let cfg = SkipGramConfig {
        dim: 50,
        epochs: 10,
        ..SkipGramConfig::default()
    };
    let (emb, report) = train_skipgram_with_report(&stream, &cfg)?;
    println!("{} words, dim {}", emb.len(), emb.dim());
    for (i, l) in report.epoch_losses.iter().enumerate() {
        println!("epoch {}: loss {l:.4}", i + 1);
    }

    let concepts: HashSet<&str> = data
        .train
        .sentences
        .iter()
        .flat_map(|s| s.tokens.iter())
        .filter(|t| t.gold.concept_type().is_some())
        .map(|t| t.surface.as_str())
        .collect();
    let query = emb.vocab().iter().find(|w| concepts.contains(w.as_str())).expect("a concept in vocabulary");
    let q = emb.vector(query).unwrap();
    let mut near: Vec<(f64, &String)> = emb
        .vocab()
        .iter()
        .filter(|w| *w != query)
        .map(|w| (q.cosine(&emb.vector(w).unwrap()), w))
        .collect();
    near.sort_by(|a, b| b.0.total_cmp(&a.0));
    println!("nearest to concept `{query}`:");
    for (sim, w) in near.iter().take(8) {
        let kind = if concepts.contains(w.as_str()) { "concept" } else { "" };
        println!("  {w:<12} {sim:.3} {kind}");
    }

    let lex = LexicalTable::new(40, 1, NgramConfig::default())?;
    let (a, b) = ("fever", "fevers");
    println!("lexical cosine({a}, {b}) = {:.3}", lex.vector(a).cosine(&lex.vector(b)));
    Ok(())
}
