//! Experiment orchestration behind the `activecrf` binary.
//!
//! Each subcommand reads a [`RunConfig`], works through the artifact cache
//! and writes its results plus a JSON manifest under `--out-dir`.
//! Exit codes: 0 on success, 1 for configuration errors, 2 for data errors.

mod cache;
mod commands;
mod config;
mod manifest;
mod pipeline;
mod report;
pub mod svg;
pub mod synth;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use cache::{cache_key, file_hash, Cache, CacheOutcome};
pub use commands::{
    cmd_al, cmd_build_codebooks, cmd_replay, cmd_report, cmd_supervised, cmd_synth, cmd_train_embeddings, cmd_ttest,
};
pub use config::{ConfigError, ConfigValue, RunConfig};
pub use manifest::{Manifest, MANIFEST_FILE};
pub use pipeline::Pipeline;

/// Environment variable that overrides `paths.cache_dir`.
pub const CACHE_ENV: &str = "ACTIVECRF_CACHE_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> CliError {
        CliError::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> CliError {
        CliError::Data(msg.into())
    }

    pub fn io(path: &Path, e: std::io::Error) -> CliError {
        CliError::Data(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        use crate::alloop::AlError;
        use crate::featgen::FeatgenError;
        use crate::unsup::UnsupError;
        use crate::vectors::VectorError;
        let config = matches!(
            &e,
            crate::Error::Vectors(VectorError::DimTooSmall { .. })
                | crate::Error::Unsup(UnsupError::ZeroK | UnsupError::MissingCodebook(_))
                | crate::Error::Featgen(
                    FeatgenError::UnknownLetter(_) | FeatgenError::MissingLexicon | FeatgenError::MissingUnsup(_)
                )
                | crate::Error::Al(
                    AlError::InitFraction(_) | AlError::ZeroBatch | AlError::MissingResource { .. }
                )
        );
        if config {
            CliError::Config(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

macro_rules! via_crate_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                crate::Error::from(e).into()
            }
        }
    )*};
}

via_crate_error!(
    crate::corpus::CorpusError,
    crate::vectors::VectorError,
    crate::unsup::UnsupError,
    crate::featgen::FeatgenError,
    crate::crf::CrfError,
    crate::eval::EvalError,
    crate::alloop::AlError
);

#[derive(Debug, Parser)]
#[command(name = "activecrf", version, about = "Active learning for CRF concept extraction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Configuration file of `key = value` lines.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Override one setting, e.g. `--set al.strategy=rs`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Directory for every output of the command.
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

impl Common {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        for kv in &self.overrides {
            cfg.apply_override(kv)?;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic train/test/unlabeled/lexicon data set.
    Synth(Common),
    /// Train (or fetch cached) skip-gram embeddings.
    TrainEmbeddings(Common),
    /// Build (or fetch cached) k-means codebooks for the enabled groups.
    BuildCodebooks(Common),
    /// Train on the full training set and score the test set.
    Supervised(Common),
    /// Run active learning until the supervised F1 is reached.
    Al {
        #[command(flatten)]
        common: Common,
        /// Re-run the experiment recorded in this manifest.
        #[arg(long)]
        replay: Option<PathBuf>,
    },
    /// Tabulate and plot a set of manifests.
    Report {
        #[command(flatten)]
        common: Common,
        /// Manifests written by `supervised` or `al`.
        #[arg(required = true)]
        manifests: Vec<PathBuf>,
    },
    /// 5×2 cross-validated paired t-test of two feature sets.
    Ttest(Common),
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Synth(c) => c.resolve().and_then(|cfg| cmd_synth(&cfg, &c.out_dir)),
        Command::TrainEmbeddings(c) => c.resolve().and_then(|cfg| cmd_train_embeddings(&cfg, &c.out_dir)),
        Command::BuildCodebooks(c) => c.resolve().and_then(|cfg| cmd_build_codebooks(&cfg, &c.out_dir)),
        Command::Supervised(c) => c.resolve().and_then(|cfg| cmd_supervised(&cfg, &c.out_dir)),
        Command::Al { common, replay: None } => common.resolve().and_then(|cfg| cmd_al(&cfg, &common.out_dir)),
        Command::Al {
            common,
            replay: Some(m),
        } => cmd_replay(m, &common.out_dir),
        Command::Report { common, manifests } => cmd_report(manifests, &common.out_dir),
        Command::Ttest(c) => c.resolve().and_then(|cfg| cmd_ttest(&cfg, &c.out_dir)),
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
