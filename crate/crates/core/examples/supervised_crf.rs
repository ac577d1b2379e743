//! Trains a CRF on hand-crafted features, scores the test set and saves
//! the model.

use activecrf::alloop::supervised;
use activecrf::cli::synth::{generate, SynthParams};
use activecrf::crf::{read_model, write_model, CrfConfig};
use activecrf::featgen::{FeatureGroupConfig, Featurizer, Lexicon};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = generate(&SynthParams {
        train_sentences: 600,
        test_sentences: 300,
        ..SynthParams::default()
    })?;
    let mut lexicon = Lexicon::new();
    for (term, group) in &data.lexicon {
        lexicon.insert(term, group);
    }
    for letters in ["A", "AB", "ABC"] {
        let fz = Featurizer::new(FeatureGroupConfig::with_letters(letters)?, Some(lexicon.clone()), None)?;
        let train_f = fz.featurize_all(&data.train.sentences)?;
        let test_f = fz.featurize_all(&data.test.sentences)?;
        let (model, prf) = supervised(&train_f, &data.train, &test_f, &data.test, &CrfConfig::default())?;
        println!(
            "{letters:<4} features={:<6} P={:.4} R={:.4} F1={:.4}",
            model.num_features(),
            prf.precision,
            prf.recall,
            prf.f1
        );
        if letters == "ABC" {
            let path = std::env::temp_dir().join("activecrf-model.txt");
            write_model(&model, std::io::BufWriter::new(std::fs::File::create(&path)?))?;
            let back = read_model(std::io::BufReader::new(std::fs::File::open(&path)?))?;
            assert_eq!(back.weights(), model.weights());
            println!("model saved to {} and read back", path.display());
            let s = &data.test.sentences[0];
            let words: Vec<&str> = s.tokens.iter().map(|t| t.surface.as_str()).collect();
            println!("{:?}\n{:?}", words, model.predict(&test_f[0]));
        }
    }
    Ok(())
}
