use activecrf::cli::synth::{generate, SynthParams};
use activecrf::vectors::{train_skipgram_with_report, SkipGramConfig};

#[test]
fn skipgram_loss_falls_every_epoch_on_synthetic_text() {
    let data = generate(&SynthParams {
        train_sentences: 500,
        test_sentences: 10,
        ..SynthParams::default()
    })
    .unwrap();
    for seed in 1..=3 {
        let cfg = SkipGramConfig {
            dim: 50,
            epochs: 6,
            seed,
            ..SkipGramConfig::default()
        };
        let (_, report) = train_skipgram_with_report(&data.unlabeled, &cfg).unwrap();
        for w in report.epoch_losses.windows(2) {
            assert!(w[1] < w[0], "seed {seed}: {:?}", report.epoch_losses);
        }
    }
}
