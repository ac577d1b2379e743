//! 5×2 cross-validated paired t-test between two feature sets.

use activecrf::alloop::supervised;
use activecrf::cli::synth::{generate, SynthParams};
use activecrf::crf::CrfConfig;
use activecrf::eval::{five_by_two_ttest, make_5x2_splits};
use activecrf::featgen::{FeatureGroupConfig, Featurizer, Lexicon};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = generate(&SynthParams {
        train_sentences: 600,
        test_sentences: 10,
        ..SynthParams::default()
    })?;
    let mut lexicon = Lexicon::new();
    for (term, group) in &data.lexicon {
        lexicon.insert(term, group);
    }
    let corpus = &data.train;
    let splits = make_5x2_splits(corpus.len(), 7)?;
    let mut f1 = [[[0.0; 2]; 5]; 2];
    for (sys, letters) in ["ABC", "A"].into_iter().enumerate() {
        let fz = Featurizer::new(FeatureGroupConfig::with_letters(letters)?, Some(lexicon.clone()), None)?;
        let feats = fz.featurize_all(&corpus.sentences)?;
        let pick = |ids: &[usize]| ids.iter().map(|&i| feats[i].clone()).collect::<Vec<_>>();
        for (i, (a, b)) in splits.iter().enumerate() {
            for (j, (fit, held)) in [(a, b), (b, a)].into_iter().enumerate() {
                let (_, prf) = supervised(
                    &pick(fit),
                    &corpus.subset(fit),
                    &pick(held),
                    &corpus.subset(held),
                    &CrfConfig::default(),
                )?;
                f1[sys][i][j] = prf.f1;
            }
        }
        println!("{letters:<4} fold F1: {:?}", f1[sys].map(|r| r.map(|x| (x * 1e4).round() / 1e4)));
    }
    let t = five_by_two_ttest(&f1[0], &f1[1]);
    println!(
        "t = {:.4} with {} df, significant at 0.05: {}",
        t.t_statistic, t.degrees_of_freedom, t.significant_at_05
    );
    Ok(())
}
