//! `rallycast` command-line entry point.
//!
//! Exit codes: 0 success, 1 runtime or numeric failure (including failed
//! validation), 2 configuration or usage error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

const VERSION: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    " (",
    env!("RALLYCAST_BUILD_TARGET"),
    ", ",
    env!("RALLYCAST_BUILD_PROFILE"),
    ")"
);

#[derive(Parser)]
#[command(name = "rallycast", version = VERSION, about = "Badminton stroke forecasting: synthesize, train, predict, score, analyze")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

/// Settings shared by every subcommand. Each flag overrides the key of the
/// same name (with `_`) from `--config`.
#[derive(Args)]
struct Common {
    /// Flat `key = value` run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Worker threads for per-rally sampling
    #[arg(long, global = true)]
    jobs: Option<String>,
    #[arg(long, global = true)]
    data: Option<String>,
    /// Shot-type vocabulary CSV (`type_id,name,is_serve`)
    #[arg(long, global = true)]
    vocab: Option<String>,
    #[arg(long, global = true)]
    out: Option<String>,
    #[arg(long, visible_alias = "n", global = true)]
    n_rallies: Option<String>,
    #[arg(long, global = true)]
    mean_length: Option<String>,
    #[arg(long, global = true)]
    rallies_per_match: Option<String>,
    #[arg(long, global = true)]
    n_players: Option<String>,
    #[arg(long, global = true)]
    embed_dim: Option<String>,
    #[arg(long, global = true)]
    n_heads: Option<String>,
    #[arg(long, global = true)]
    n_layers: Option<String>,
    #[arg(long, global = true)]
    ffn_dim: Option<String>,
    #[arg(long, global = true)]
    dropout: Option<String>,
    /// `baseline` or `modified`
    #[arg(long, global = true)]
    embedding_mode: Option<String>,
    #[arg(long, global = true)]
    epochs: Option<String>,
    #[arg(long, global = true)]
    batch_size: Option<String>,
    #[arg(long, global = true)]
    learning_rate: Option<String>,
    #[arg(long, global = true)]
    beta1: Option<String>,
    #[arg(long, global = true)]
    beta2: Option<String>,
    #[arg(long, global = true)]
    adam_eps: Option<String>,
    #[arg(long, global = true)]
    clip_norm: Option<String>,
    #[arg(long, global = true)]
    eval_every: Option<String>,
    #[arg(long, global = true)]
    eval_samples: Option<String>,
    #[arg(long, global = true)]
    max_rally_length: Option<String>,
    #[arg(long, global = true)]
    max_match_total_rounds: Option<String>,
    #[arg(long, global = true)]
    min_rally_length: Option<String>,
    #[arg(long, global = true)]
    train_fraction: Option<String>,
    #[arg(long, global = true)]
    split_by_match: Option<String>,
    #[arg(long, global = true)]
    strict_serve: Option<String>,
    #[arg(long, global = true)]
    court_width: Option<String>,
    #[arg(long, global = true)]
    court_length: Option<String>,
    #[arg(long, global = true)]
    norm_mean_x: Option<String>,
    #[arg(long, global = true)]
    norm_mean_y: Option<String>,
    #[arg(long, global = true)]
    norm_std_x: Option<String>,
    #[arg(long, global = true)]
    norm_std_y: Option<String>,
    #[arg(long, global = true)]
    samples: Option<String>,
    /// Strokes to generate per rally in open-ended prediction
    #[arg(long, global = true)]
    horizon: Option<String>,
}

impl Common {
    fn overrides(&self) -> Vec<(&'static str, &String)> {
        let all = [
            ("seed", &self.seed),
            ("jobs", &self.jobs),
            ("data", &self.data),
            ("vocab", &self.vocab),
            ("out", &self.out),
            ("n_rallies", &self.n_rallies),
            ("mean_length", &self.mean_length),
            ("rallies_per_match", &self.rallies_per_match),
            ("n_players", &self.n_players),
            ("embed_dim", &self.embed_dim),
            ("n_heads", &self.n_heads),
            ("n_layers", &self.n_layers),
            ("ffn_dim", &self.ffn_dim),
            ("dropout", &self.dropout),
            ("embedding_mode", &self.embedding_mode),
            ("epochs", &self.epochs),
            ("batch_size", &self.batch_size),
            ("learning_rate", &self.learning_rate),
            ("beta1", &self.beta1),
            ("beta2", &self.beta2),
            ("adam_eps", &self.adam_eps),
            ("clip_norm", &self.clip_norm),
            ("eval_every", &self.eval_every),
            ("eval_samples", &self.eval_samples),
            ("max_rally_length", &self.max_rally_length),
            ("max_match_total_rounds", &self.max_match_total_rounds),
            ("min_rally_length", &self.min_rally_length),
            ("train_fraction", &self.train_fraction),
            ("split_by_match", &self.split_by_match),
            ("strict_serve", &self.strict_serve),
            ("court_width", &self.court_width),
            ("court_length", &self.court_length),
            ("norm_mean_x", &self.norm_mean_x),
            ("norm_mean_y", &self.norm_mean_y),
            ("norm_std_x", &self.norm_std_x),
            ("norm_std_y", &self.norm_std_y),
            ("samples", &self.samples),
            ("horizon", &self.horizon),
        ];
        all.into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k, v)))
            .collect()
    }

    fn resolve(&self) -> rallycast::Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.load_file(path)?;
        }
        for (k, v) in self.overrides() {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic rally dataset (plus players sidecar) to --out
    Synth,
    /// Check a dataset against the rally rules
    Validate,
    /// Filter, split and train; writes model.ckpt and train_report.csv into --out
    Train,
    /// Generate sample sets for every rally of --data
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Extend every rally by --horizon strokes instead of its true length
        #[arg(long)]
        open_ended: bool,
    },
    /// Score a six-sample prediction file against the ground truth in --data
    Score {
        #[arg(long)]
        predictions: PathBuf,
    },
    /// Write analysis tables into the --out directory
    Analyze {
        /// shots, shot-by-round, shot-by-player, shot-by-landing-zone,
        /// shot-by-location-zone, vote, zones, trend or probs
        #[arg(long)]
        kind: String,
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Train both embedding modes on --data and write a round-trend table for each
    Compare,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = cli.common.resolve().and_then(|cfg| {
        if let Some(n) = cfg.jobs {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| {
                    rallycast::Error::Config(format!("cannot start {n} worker threads: {e}"))
                })?;
        }
        commands::run(cli.command, &cfg)
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
