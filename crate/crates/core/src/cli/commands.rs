use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use super::pipeline::ensure_dir;
use super::synth::{self, SynthParams};
use super::{file_hash, report, CliError, Manifest, Pipeline, RunConfig, MANIFEST_FILE};
use crate::alloop::{self, write_history_csv, ActiveLearner, AlConfig, StrategyResources};
use crate::corpus::{extract_concepts, spans_from_labels, Corpus};
use crate::crf::{write_model, CrfConfig};
use crate::eval::{five_by_two_ttest, make_5x2_splits, phrase_prf_by_type, Prf};
use crate::featgen::FeatureVector;
use crate::strategies::{Strategy, StrategyParams};
use crate::vectors::write_embeddings;

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn crf_config(cfg: &RunConfig) -> CrfConfig {
    CrfConfig {
        sigma2: cfg.sigma2,
        max_iters: cfg.crf_max_iters,
        tolerance: cfg.crf_tolerance,
        memory: cfg.crf_memory,
    }
}

fn finish(p: &Pipeline, out_dir: &Path) -> Result<PathBuf, CliError> {
    let path = out_dir.join(MANIFEST_FILE);
    p.manifest.write(&path)?;
    Ok(path)
}

/// Featurizes both corpora with `letters`, recording featurizer warnings.
fn features(
    p: &mut Pipeline,
    letters: &str,
    corpora: &[&Corpus],
) -> Result<Vec<Vec<FeatureVector>>, CliError> {
    let fz = p.featurizer(letters)?;
    let mut out = Vec::new();
    for c in corpora {
        for w in fz.warnings(&c.sentences) {
            p.warn(w);
        }
        out.push(p.timed("features", |_| fz.featurize_all(&c.sentences))?);
    }
    Ok(out)
}

pub fn cmd_synth(cfg: &RunConfig, out_dir: &Path) -> Result<String, CliError> {
    let params = SynthParams::from_config(cfg);
    params.validate().map_err(CliError::config)?;
    let data = synth::generate(&params).map_err(CliError::config)?;
    synth::write_synth(&data, out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let abs = out_dir.canonicalize().map_err(|e| CliError::io(out_dir, e))?;

    let mut conf = cfg.clone();
    conf.train = Some(abs.join(synth::TRAIN_FILE));
    conf.test = Some(abs.join(synth::TEST_FILE));
    conf.embedding_corpus = vec![abs.join(synth::UNLABELED_FILE)];
    conf.lexicon = Some(abs.join(synth::LEXICON_FILE));
    write_file(&out_dir.join("synth.conf"), &conf.to_text())?;

    let mut p = Pipeline::new(cfg.clone(), "synth");
    for (role, name) in [
        ("train", synth::TRAIN_FILE),
        ("test", synth::TEST_FILE),
        ("embedding_corpus.0", synth::UNLABELED_FILE),
        ("lexicon", synth::LEXICON_FILE),
    ] {
        p.manifest.artifacts.insert(role.into(), file_hash(&out_dir.join(name))?);
    }
    finish(&p, out_dir)?;
    Ok(format!(
        "wrote {} train, {} test, {} unlabeled sentences and {} lexicon terms to {}",
        data.train.len(),
        data.test.len(),
        data.unlabeled.len(),
        data.lexicon.len(),
        out_dir.display()
    ))
}

pub fn cmd_train_embeddings(cfg: &RunConfig, out_dir: &Path) -> Result<String, CliError> {
    ensure_dir(out_dir)?;
    let mut p = Pipeline::new(cfg.clone(), "train-embeddings");
    let (emb, outcome) = p.embeddings()?;
    let lex = p.lexical_table()?;
    let path = out_dir.join("embeddings.txt");
    write_embeddings(&emb, create(&path)?).map_err(|e| CliError::io(&path, e))?;
    write_file(&out_dir.join("lexical.txt"), &(lex.to_line() + "\n"))?;
    finish(&p, out_dir)?;
    Ok(format!("{} vectors of dimension {} ({outcome:?})", emb.len(), emb.dim()))
}

pub fn cmd_build_codebooks(cfg: &RunConfig, out_dir: &Path) -> Result<String, CliError> {
    let mut p = Pipeline::new(cfg.clone(), "build-codebooks");
    let needed = p.unsup_config(&cfg.letters).required_codebooks();
    if needed.is_empty() {
        return Ok(format!("feature groups {} need no codebooks", cfg.letters));
    }
    let dir = out_dir.join("codebooks");
    ensure_dir(&dir)?;
    let mut summary = Vec::new();
    for (space, k) in needed {
        let (cb, outcome) = p.codebook(space, k)?;
        let path = dir.join(format!("{space}-k{k}.txt"));
        crate::unsup::write_codebook(&cb, create(&path)?).map_err(|e| CliError::io(&path, e))?;
        summary.push(format!("{space} k={k} ({outcome:?})"));
    }
    finish(&p, out_dir)?;
    Ok(summary.join("\n"))
}

pub fn cmd_supervised(cfg: &RunConfig, out_dir: &Path) -> Result<String, CliError> {
    ensure_dir(out_dir)?;
    let mut p = Pipeline::new(cfg.clone(), "supervised");
    let train = p.corpus("train")?;
    let test = p.corpus("test")?;
    let feats = features(&mut p, &cfg.letters, &[&train, &test])?;
    let crf = crf_config(cfg);
    let (model, prf) = p.timed("train", |_| alloop::supervised(&feats[0], &train, &feats[1], &test, &crf))?;

    let path = out_dir.join("model.txt");
    write_model(&model, create(&path)?)?;
    write_file(&out_dir.join("metrics.csv"), &metrics_csv(&prf))?;
    let gold: Vec<_> = test.sentences.iter().map(extract_concepts).collect();
    let pred: Vec<_> = feats[1].iter().map(|f| spans_from_labels(&model.predict(f))).collect();
    let mut per_type = String::from("type,precision,recall,f1,tp,fp,fn\n");
    for (t, r) in phrase_prf_by_type(&gold, &pred)? {
        let _ = writeln!(per_type, "{t},{:.6},{:.6},{:.6},{},{},{}", r.precision, r.recall, r.f1, r.tp, r.fp, r.fn_);
    }
    write_file(&out_dir.join("per_type.csv"), &per_type)?;

    p.manifest.supervised = Some(prf);
    p.manifest.target_f1 = Some(prf.f1);
    finish(&p, out_dir)?;
    Ok(format!(
        "{}: P={:.4} R={:.4} F1={:.4}",
        cfg.letters, prf.precision, prf.recall, prf.f1
    ))
}

fn metrics_csv(prf: &Prf) -> String {
    format!(
        "precision,recall,f1,tp,fp,fn\n{:.6},{:.6},{:.6},{},{},{}\n",
        prf.precision, prf.recall, prf.f1, prf.tp, prf.fp, prf.fn_
    )
}

/// Runs one active-learning experiment and writes its outputs.
fn al_experiment(cfg: &RunConfig, out_dir: &Path) -> Result<Manifest, CliError> {
    ensure_dir(out_dir)?;
    let mut p = Pipeline::new(cfg.clone(), "al");
    p.manifest.strategy = Some(cfg.strategy.name().to_string());
    let train = p.corpus("train")?;
    let test = p.corpus("test")?;
    let mut feats = features(&mut p, &cfg.letters, &[&train, &test])?;
    let test_features = feats.pop().expect("two corpora");
    let train_features = feats.pop().expect("two corpora");
    let crf = crf_config(cfg);

    let target = match cfg.target_f1 {
        Some(t) => t,
        None => {
            let (_, prf) = p.timed("supervised", |_| {
                alloop::supervised(&train_features, &train, &test_features, &test, &crf)
            })?;
            p.manifest.supervised = Some(prf);
            prf.f1
        }
    };
    p.manifest.target_f1 = Some(target);

    let mut resources = StrategyResources::default();
    if cfg.strategy.needs_similarity() {
        resources.sentence_vectors = Some(p.timed("similarity", |p| p.sentence_vectors(&train))?);
    }
    if cfg.strategy == Strategy::Dki {
        resources.lexicon = Some(
            p.lexicon()?
                .ok_or_else(|| CliError::config("strategy dki needs `paths.lexicon`"))?,
        );
    }
    let al_cfg = AlConfig {
        strategy: cfg.strategy,
        init_fraction: cfg.init_fraction,
        batch_size: cfg.batch_size,
        seed: cfg.al_seed,
        params: StrategyParams {
            beta: cfg.beta,
            lambda: cfg.lambda,
        },
        crf: crf.into(),
    };
    let mut learner = ActiveLearner::from_features(train, train_features, &test, test_features, resources, al_cfg)?;
    let (state, rates) = p.timed("al", |_| learner.run(target))?;

    let mut csv = Vec::new();
    write_history_csv(&state.history, &mut csv).expect("writing to memory");
    let csv = String::from_utf8(csv).expect("ascii csv");
    write_file(&out_dir.join("history.csv"), &csv)?;
    p.manifest.history = state.history;
    p.manifest.history_csv = Some(csv);
    p.manifest.rates = Some(rates);
    if !p.manifest.rates.as_ref().is_some_and(|r| r.reached) {
        p.warn(format!("target F1 {target:.6} not reached; rates reported as 100"));
    }
    finish(&p, out_dir)?;
    Ok(p.manifest)
}

fn rates_summary(m: &Manifest) -> String {
    let r = m.rates.as_ref().expect("al manifests carry rates");
    format!(
        "{} {}: target F1 {:.4} {} at SAR={:.2} TAR={:.2} CAR={:.2} ({} iterations)",
        m.letters,
        m.strategy.as_deref().unwrap_or("?"),
        r.target_f1,
        if r.reached { "reached" } else { "not reached" },
        r.sar,
        r.tar,
        r.car,
        m.history.len().saturating_sub(1)
    )
}

pub fn cmd_al(cfg: &RunConfig, out_dir: &Path) -> Result<String, CliError> {
    al_experiment(cfg, out_dir).map(|m| rates_summary(&m))
}

/// Path of every recorded input role under `cfg`.
fn input_path(cfg: &RunConfig, role: &str) -> Option<PathBuf> {
    match role {
        "train" => cfg.train.clone(),
        "test" => cfg.test.clone(),
        "lexicon" => cfg.lexicon.clone(),
        _ => {
            let i: usize = role.strip_prefix("embedding_corpus.")?.parse().ok()?;
            cfg.embedding_corpus.get(i).cloned()
        }
    }
}

/// Re-runs the experiment recorded in `manifest_path` and checks that the
/// history comes out byte-identical.
pub fn cmd_replay(manifest_path: &Path, out_dir: &Path) -> Result<String, CliError> {
    let recorded = Manifest::read(manifest_path)?;
    if recorded.command != "al" {
        return Err(CliError::config(format!(
            "{} records `{}`, not an active-learning run",
            manifest_path.display(),
            recorded.command
        )));
    }
    let mut cfg = RunConfig::parse(&recorded.config)?;
    cfg.target_f1 = recorded.target_f1;
    for (role, hash) in &recorded.inputs {
        let path = input_path(&cfg, role)
            .ok_or_else(|| CliError::data(format!("recorded input `{role}` has no path in the recorded config")))?;
        if &file_hash(&path)? != hash {
            return Err(CliError::data(format!("input {} changed since the recorded run", path.display())));
        }
    }
    let fresh = al_experiment(&cfg, out_dir)?;
    match (&recorded.history_csv, &fresh.history_csv) {
        (Some(a), Some(b)) if a == b => Ok(format!("replay identical: {}", rates_summary(&fresh))),
        (Some(a), Some(b)) => {
            let line = a.lines().zip(b.lines()).position(|(x, y)| x != y).unwrap_or(a.lines().count().min(b.lines().count()));
            Err(CliError::data(format!("replay diverged at history line {}", line + 1)))
        }
        _ => Err(CliError::data("recorded manifest has no history")),
    }
}

pub fn cmd_report(manifest_paths: &[PathBuf], out_dir: &Path) -> Result<String, CliError> {
    ensure_dir(out_dir)?;
    let manifests: Vec<(String, Manifest)> = manifest_paths
        .iter()
        .map(|p| Manifest::read(p).map(|m| (p.display().to_string(), m)))
        .collect::<Result<_, _>>()?;
    report::check_same_test(&manifests)?;
    write_file(&out_dir.join("supervised.csv"), &report::supervised_table(&manifests))?;
    write_file(&out_dir.join("rates.csv"), &report::rates_table(&manifests))?;
    write_file(&out_dir.join("f1_vs_car.svg"), &report::f1_vs_car_svg(&manifests))?;
    write_file(&out_dir.join("learning_curves.svg"), &report::learning_curves_svg(&manifests))?;
    Ok(format!("reported {} manifests into {}", manifests.len(), out_dir.display()))
}

pub fn cmd_ttest(cfg: &RunConfig, out_dir: &Path) -> Result<String, CliError> {
    ensure_dir(out_dir)?;
    let mut p = Pipeline::new(cfg.clone(), "ttest");
    let train = p.corpus("train")?;
    let dataset = cfg
        .train
        .as_ref()
        .and_then(|t| t.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let splits = make_5x2_splits(train.len(), cfg.ttest_seed)?;
    let crf = crf_config(cfg);
    let systems = [cfg.letters.clone(), cfg.ttest_letters.clone()];

    let mut metrics = String::from("system,dataset,split,precision,recall,f1\n");
    let mut f1 = [[[0.0; 2]; 5]; 2];
    for (sys, letters) in systems.iter().enumerate() {
        let feats = features(&mut p, letters, &[&train])?.pop().expect("one corpus");
        for (i, (a, b)) in splits.iter().enumerate() {
            for (j, (fit, held)) in [(a, b), (b, a)].into_iter().enumerate() {
                let pick = |ids: &[usize]| ids.iter().map(|&k| feats[k].clone()).collect::<Vec<_>>();
                let (fit_c, held_c) = (train.subset(fit), train.subset(held));
                let (_, prf) = p.timed("train", |_| alloop::supervised(&pick(fit), &fit_c, &pick(held), &held_c, &crf))?;
                f1[sys][i][j] = prf.f1;
                let _ = writeln!(
                    metrics,
                    "{letters},{dataset},{}.{},{:.6},{:.6},{:.6}",
                    i + 1,
                    j + 1,
                    prf.precision,
                    prf.recall,
                    prf.f1
                );
            }
        }
    }
    let t = five_by_two_ttest(&f1[0], &f1[1]);
    write_file(&out_dir.join("metrics.csv"), &metrics)?;
    let sig = format!(
        "system_a,system_b,t,significant\n{},{},{:.6},{}\n",
        systems[0], systems[1], t.t_statistic, t.significant_at_05
    );
    write_file(&out_dir.join("significance.csv"), &sig)?;
    finish(&p, out_dir)?;
    Ok(format!(
        "{} vs {}: t = {:.4} ({})",
        systems[0],
        systems[1],
        t.t_statistic,
        if t.significant_at_05 { "significant at 0.05" } else { "not significant at 0.05" }
    ))
}
