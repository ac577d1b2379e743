//! Compares query strategies by the share of the pool each needs to label
//! before matching the model trained on everything.

use activecrf::alloop::{supervised, ActiveLearner, AlConfig, StrategyResources};
use activecrf::cli::synth::{generate, SynthParams};
use activecrf::crf::CrfConfig;
use activecrf::featgen::{FeatureGroupConfig, Featurizer, Lexicon};
use activecrf::strategies::{sentence_vector, Strategy};
use activecrf::vectors::{train_skipgram, LexicalTable, NgramConfig, SkipGramConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = generate(&SynthParams {
        train_sentences: 800,
        test_sentences: 400,
        ..SynthParams::default()
    })?;
    let mut lexicon = Lexicon::new();
    for (term, group) in &data.lexicon {
        lexicon.insert(term, group);
    }
    let fz = Featurizer::new(FeatureGroupConfig::with_letters("ABC")?, Some(lexicon.clone()), None)?;
    let train_f = fz.featurize_all(&data.train.sentences)?;
    let test_f = fz.featurize_all(&data.test.sentences)?;
    let (_, full) = supervised(&train_f, &data.train, &test_f, &data.test, &CrfConfig::default())?;
    println!("target F1 (all {} sentences labeled): {:.4}", data.train.len(), full.f1);

    let emb = train_skipgram(&data.unlabeled, &SkipGramConfig { dim: 50, ..SkipGramConfig::default() })?;
    let lex = LexicalTable::new(40, 1, NgramConfig::default())?;
    let vectors: Vec<_> = data.train.sentences.iter().map(|s| sentence_vector(s, &emb, &lex)).collect();

    for strategy in Strategy::ALL {
        let resources = StrategyResources {
            sentence_vectors: Some(vectors.clone()),
            lexicon: Some(lexicon.clone()),
        };
        let cfg = AlConfig {
            strategy,
            init_fraction: 0.009,
            ..AlConfig::default()
        };
        let mut learner =
            ActiveLearner::from_features(data.train.clone(), train_f.clone(), &data.test, test_f.clone(), resources, cfg)?;
        let (state, rates) = learner.run(full.f1)?;
        println!(
            "{:<5} SAR={:>6.2}% TAR={:>6.2}% CAR={:>6.2}% after {} iterations{}",
            strategy.name(),
            rates.sar,
            rates.tar,
            rates.car,
            state.iteration,
            if rates.reached { "" } else { " (target not reached)" }
        );
    }
    Ok(())
}
