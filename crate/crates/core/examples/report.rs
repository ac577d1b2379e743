//! Drives the experiment commands end to end in a scratch directory:
//! synthetic data, supervised baselines, two active-learning runs, a replay
//! and the summary tables and plots.

use activecrf::cli::{cmd_al, cmd_replay, cmd_report, cmd_supervised, cmd_synth, RunConfig, MANIFEST_FILE};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("activecrf-report"));
    let cfg = RunConfig {
        synth_train: 600,
        synth_test: 300,
        cache_dir: root.join("cache"),
        ..RunConfig::default()
    };
    println!("{}", cmd_synth(&cfg, &root.join("data"))?);

    let mut cfg = RunConfig::from_file(&root.join("data/synth.conf"))?;
    cfg.dim = 50;
    cfg.k_d = 40;
    cfg.k_g = 10;
    cfg.k_h = 40;
    let mut manifests = Vec::new();
    for letters in ["ABC", "ABCDGH"] {
        let mut c = cfg.clone();
        c.letters = letters.into();
        let out = root.join(format!("supervised-{letters}"));
        println!("{}", cmd_supervised(&c, &out)?);
        manifests.push(out.join(MANIFEST_FILE));
    }
    for strategy in ["lc", "rs"] {
        let mut c = cfg.clone();
        c.strategy = strategy.parse()?;
        c.init_fraction = 0.009;
        let out = root.join(format!("al-{strategy}"));
        println!("{}", cmd_al(&c, &out)?);
        manifests.push(out.join(MANIFEST_FILE));
    }
    println!("{}", cmd_replay(&root.join("al-lc").join(MANIFEST_FILE), &root.join("replay"))?);
    println!("{}", cmd_report(&manifests, &root.join("report"))?);
    println!("{}", std::fs::read_to_string(root.join("report/rates.csv"))?);
    Ok(())
}
