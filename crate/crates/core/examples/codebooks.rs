//! Clusters word vectors with k-means and measures how well the clusters
//! separate concept terms from distractors.

use std::collections::{BTreeMap, HashSet};

use activecrf::cli::synth::{generate, SynthParams};
use activecrf::math::normalized;
use activecrf::unsup::{assign_cluster, kmeans_with_trace, SpaceTag};
use activecrf::vectors::{train_skipgram, SkipGramConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = generate(&SynthParams {
        concept_types: 80,
        distractor_types: 80,
        train_sentences: 400,
        test_sentences: 10,
        ..SynthParams::default()
    })?;
    let emb = train_skipgram(&data.unlabeled, &SkipGramConfig { dim: 50, ..SkipGramConfig::default() })?;
    let points: Vec<Vec<f64>> = (0..emb.len()).map(|i| normalized(emb.row(i))).collect();
    let (cb, trace) = kmeans_with_trace(&points, 20, 1, 100, SpaceTag::Word)?;
    println!("k = {}, {} Lloyd steps, converged: {}", cb.k(), trace.objectives.len(), trace.converged);
    println!(
        "objective {:.3} -> {:.3}",
        trace.objectives.first().unwrap(),
        trace.objectives.last().unwrap()
    );

    let concepts: HashSet<&str> = data
        .train
        .sentences
        .iter()
        .flat_map(|s| s.tokens.iter())
        .filter(|t| t.gold.concept_type().is_some())
        .map(|t| t.surface.as_str())
        .collect();
    let mut clusters: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (w, p) in emb.vocab().iter().zip(&points) {
        let c = clusters.entry(assign_cluster(p, &cb)?).or_default();
        if concepts.contains(w.as_str()) {
            c.0 += 1;
        } else {
            c.1 += 1;
        }
    }
    let pure: usize = clusters.values().map(|&(a, b)| a.max(b)).sum();
    println!("cluster purity (concept vs other seen in training): {:.3}", pure as f64 / emb.len() as f64);
    for (id, (c, o)) in clusters.iter().filter(|(_, v)| v.0 > 0) {
        println!("  cluster {id:>2}: {c:>3} concept, {o:>3} other");
    }
    Ok(())
}
