//! Generates a small synthetic data set and prints what it contains.
//!
//! ```text
//! cargo run --example synth_corpus -- [OUT_DIR]
//! ```

use activecrf::cli::synth::{generate, write_synth, SynthParams};
use activecrf::corpus::extract_concepts;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("activecrf-synth"));
    let params = SynthParams {
        train_sentences: 400,
        test_sentences: 200,
        ..SynthParams::default()
    };
    let data = generate(&params)?;
    write_synth(&data, &out)?;

    let t = data.train.totals;
    println!("train: {} sentences, {} tokens, {} concepts", t.sequences, t.tokens, t.concepts);
    println!("test:  {} sentences", data.test.len());
    println!("unlabeled: {} sentences, lexicon: {} terms", data.unlabeled.len(), data.lexicon.len());
    for s in data.train.sentences.iter().filter(|s| !extract_concepts(s).is_empty()).take(3) {
        let line: Vec<String> = s.tokens.iter().map(|t| format!("{}/{}", t.surface, t.gold)).collect();
        println!("  {}", line.join(" "));
    }
    println!("files written to {}", out.display());
    Ok(())
}
