use std::path::Path;
use std::process::{Command, Output};

use activecrf::cli::{Manifest, CACHE_ENV, MANIFEST_FILE};

fn run(args: &[&str], cache: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_activecrf"))
        .args(args)
        .env(CACHE_ENV, cache)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn small_data(root: &Path) -> String {
    let data = root.join("data");
    let o = run(
        &[
            "synth",
            "--set",
            "synth.train_sentences=300",
            "--set",
            "synth.test_sentences=100",
            "--set",
            "synth.concept_types=40",
            "--set",
            "synth.distractor_types=40",
            "--out-dir",
            data.to_str().unwrap(),
        ],
        &root.join("cache"),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    data.join("synth.conf").to_str().unwrap().to_string()
}

#[test]
fn exit_codes_distinguish_config_and_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let o = run(&["al", "--set", "al.strategy=bogus", "--out-dir", out], &cache);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["supervised", "--set", "no.such.key=1", "--out-dir", out], &cache);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["supervised", "--out-dir", out], &cache);
    assert_eq!(o.status.code(), Some(1), "missing paths.train is a config error");
    let o = run(&["al", "--set", "al.init_fraction=0.5", "--set", "paths.train=/x", "--out-dir", out], &cache);
    assert_ne!(o.status.code(), Some(0));

    let o = run(
        &["supervised", "--set", "paths.train=/definitely/missing", "--set", "paths.test=/definitely/missing", "--out-dir", out],
        &cache,
    );
    assert_eq!(o.status.code(), Some(2));

    let bad = dir.path().join("bad.conll");
    std::fs::write(&bad, "word\tO\nother\tQ-weird\n").unwrap();
    let bad = bad.to_str().unwrap();
    let o = run(
        &["supervised", "--set", &format!("paths.train={bad}"), "--set", &format!("paths.test={bad}"), "--out-dir", out],
        &cache,
    );
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));

    let o = run(&["report", "--out-dir", out, "/definitely/missing/manifest.json"], &cache);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_errors_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "features.window = two\n").unwrap();
    let o = run(
        &["supervised", "-c", conf.to_str().unwrap(), "--out-dir", dir.path().join("o").to_str().unwrap()],
        &dir.path().join("cache"),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}

#[test]
fn dki_without_lexicon_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let conf = small_data(dir.path());
    let o = run(
        &[
            "al",
            "-c",
            &conf,
            "--set",
            "al.strategy=dki",
            "--set",
            "paths.lexicon=none",
            "--set",
            "features.letters=AB",
            "--out-dir",
            dir.path().join("o").to_str().unwrap(),
        ],
        &dir.path().join("cache"),
    );
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn artifacts_are_cached_and_rebuilt_when_corrupt() {
    let dir = tempfile::tempdir().unwrap();
    let conf = small_data(dir.path());
    let cache = dir.path().join("cache");
    let args = |out: &str| {
        vec![
            "build-codebooks".to_string(),
            "-c".into(),
            conf.clone(),
            "--set".into(),
            "features.letters=ABCDG".into(),
            "--set".into(),
            "vectors.dim=16".into(),
            "--set".into(),
            "unsup.k.D=8".into(),
            "--set".into(),
            "unsup.k.G=4".into(),
            "--out-dir".into(),
            dir.path().join(out).to_str().unwrap().to_string(),
        ]
    };
    let call = |out: &str| {
        let a = args(out);
        run(&a.iter().map(String::as_str).collect::<Vec<_>>(), &cache)
    };

    let first = call("o1");
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(stdout(&first).matches("Built").count(), 2, "{}", stdout(&first));
    let second = call("o2");
    assert_eq!(stdout(&second).matches("Hit").count(), 2, "{}", stdout(&second));
    assert_eq!(
        std::fs::read(dir.path().join("o1/codebooks/word-k8.txt")).unwrap(),
        std::fs::read(dir.path().join("o2/codebooks/word-k8.txt")).unwrap()
    );

    let m = Manifest::read(&dir.path().join("o2").join(MANIFEST_FILE)).unwrap();
    let key = &m.artifacts["codebook.word.8"];
    let entry = cache.join("codebooks").join(format!("{key}.txt"));
    assert!(entry.exists(), "cache honours {CACHE_ENV}");
    std::fs::write(&entry, "not a codebook").unwrap();
    let third = call("o3");
    assert_eq!(third.status.code(), Some(0));
    assert!(stdout(&third).contains("Rebuilt"), "{}", stdout(&third));
    let m3 = Manifest::read(&dir.path().join("o3").join(MANIFEST_FILE)).unwrap();
    assert!(m3.warnings.iter().any(|w| w.contains("corrupt")));
    assert_eq!(
        std::fs::read(dir.path().join("o1/codebooks/word-k8.txt")).unwrap(),
        std::fs::read(dir.path().join("o3/codebooks/word-k8.txt")).unwrap()
    );
}

#[test]
fn changed_parameters_miss_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let conf = small_data(dir.path());
    let cache = dir.path().join("cache");
    let emb = |dim: &str, out: &str| {
        run(
            &["train-embeddings", "-c", &conf, "--set", &format!("vectors.dim={dim}"), "--out-dir", dir.path().join(out).to_str().unwrap()],
            &cache,
        )
    };
    assert!(stdout(&emb("12", "a")).contains("Built"));
    assert!(stdout(&emb("12", "b")).contains("Hit"));
    assert!(stdout(&emb("13", "c")).contains("Built"));
}

#[test]
fn full_workflow_with_replay_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let conf = small_data(dir.path());
    let cache = dir.path().join("cache");
    let p = |s: &str| dir.path().join(s).to_str().unwrap().to_string();

    let sup = run(&["supervised", "-c", &conf, "--out-dir", &p("sup")], &cache);
    assert_eq!(sup.status.code(), Some(0), "{}", String::from_utf8_lossy(&sup.stderr));
    for f in ["model.txt", "metrics.csv", "per_type.csv", MANIFEST_FILE] {
        assert!(dir.path().join("sup").join(f).exists(), "{f}");
    }
    let al = run(&["al", "-c", &conf, "--set", "al.init_fraction=0.009", "--out-dir", &p("al")], &cache);
    assert_eq!(al.status.code(), Some(0), "{}", String::from_utf8_lossy(&al.stderr));
    let history = std::fs::read_to_string(dir.path().join("al/history.csv")).unwrap();
    assert!(history.starts_with("iteration,seq_used,tok_used,concept_used,sar,tar,car,precision,recall,f1\n"));

    let replay = run(&["al", "--replay", &p("al/manifest.json"), "--out-dir", &p("replay")], &cache);
    assert_eq!(replay.status.code(), Some(0), "{}", String::from_utf8_lossy(&replay.stderr));
    assert!(stdout(&replay).contains("identical"));

    let mut m = Manifest::read(&dir.path().join("al").join(MANIFEST_FILE)).unwrap();
    m.history_csv = Some(m.history_csv.unwrap().replace(",0.", ",9."));
    m.write(&dir.path().join("tampered.json")).unwrap();
    let o = run(&["al", "--replay", &p("tampered.json"), "--out-dir", &p("replay2")], &cache);
    assert_eq!(o.status.code(), Some(2));

    let rep = run(&["report", "--out-dir", &p("report"), &p("sup/manifest.json"), &p("al/manifest.json")], &cache);
    assert_eq!(rep.status.code(), Some(0), "{}", String::from_utf8_lossy(&rep.stderr));
    for f in ["supervised.csv", "rates.csv", "f1_vs_car.svg", "learning_curves.svg"] {
        assert!(dir.path().join("report").join(f).exists(), "{f}");
    }
    let rates = std::fs::read_to_string(dir.path().join("report/rates.csv")).unwrap();
    assert!(rates.starts_with("letters,lc_sar,lc_tar,lc_car\nABC,"), "{rates}");

    let tt = run(&["ttest", "-c", &conf, "--set", "ttest.baseline=A", "--out-dir", &p("tt")], &cache);
    assert_eq!(tt.status.code(), Some(0), "{}", String::from_utf8_lossy(&tt.stderr));
    let metrics = std::fs::read_to_string(dir.path().join("tt/metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 2 * 10);
    let sig = std::fs::read_to_string(dir.path().join("tt/significance.csv")).unwrap();
    assert!(sig.starts_with("system_a,system_b,t,significant\nABC,A,"));
}
