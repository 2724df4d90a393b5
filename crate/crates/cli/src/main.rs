use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use xdr_mobility::pipeline::{run_all, run_stage, PipelineConfig, PipelineError, Stage};

/// Traffic and mobility behavior modeling over mobile-network event records.
#[derive(Debug, Parser)]
#[command(name = "xdrmob", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// `key = value` config file; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    xdr: Option<PathBuf>,
    #[arg(long, global = true)]
    catalog: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    province: Option<String>,
    /// hour or slot
    #[arg(long = "time-mode", global = true)]
    time_mode: Option<String>,
    #[arg(long, global = true)]
    alpha: Option<String>,
    /// all or unique
    #[arg(long = "rt-mode", global = true)]
    rt_mode: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    threads: Option<String>,
    #[arg(long, global = true)]
    bins: Option<String>,
    #[arg(long, global = true)]
    repeats: Option<String>,
    /// Any other config key, as `key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse, partition by province, filter and impute.
    Ingest,
    /// Per-user features and population tables.
    Features,
    /// Traffic and mobility profiles, feature importance.
    Profile,
    /// Tertile thresholds, step behaviors and the train/test split.
    Encode,
    /// Fit the transition model on the training users.
    Train,
    /// Conditional prediction in both directions.
    Infer,
    /// Match traffic halves to mobility halves.
    Match,
    /// Discrimination and the final reports.
    Eval,
    /// Write a synthetic population with ground truth.
    Synth,
    /// Every stage from ingest to eval.
    All,
}

fn resolve(cli: &Cli) -> Result<PipelineConfig, PipelineError> {
    let mut config = PipelineConfig::default();
    if let Some(path) = &cli.config {
        config.apply_file(path)?;
    }
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| PipelineError::Config(format!("--set expects key=value, got {kv:?}")))?;
        config.set(k.trim(), v)?;
    }
    let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
    let flags = [
        ("xdr", path(&cli.xdr)),
        ("catalog", path(&cli.catalog)),
        ("out", path(&cli.out)),
        ("province", cli.province.clone()),
        ("time_mode", cli.time_mode.clone()),
        ("alpha", cli.alpha.clone()),
        ("rt_mode", cli.rt_mode.clone()),
        ("seed", cli.seed.clone()),
        ("threads", cli.threads.clone()),
        ("bins", cli.bins.clone()),
        ("repeats", cli.repeats.clone()),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            config.set(key, &v)?;
        }
    }
    Ok(config)
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    let config = resolve(cli)?;
    if config.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build_global()
            .map_err(|e| PipelineError::Internal(format!("thread pool: {e}")))?;
    }
    let stage = match cli.command {
        Command::Ingest => Stage::Ingest,
        Command::Features => Stage::Features,
        Command::Profile => Stage::Profile,
        Command::Encode => Stage::Encode,
        Command::Train => Stage::Train,
        Command::Infer => Stage::Infer,
        Command::Match => Stage::Match,
        Command::Eval => Stage::Eval,
        Command::Synth => Stage::Synth,
        Command::All => return run_all(&config),
    };
    run_stage(stage, &config)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
