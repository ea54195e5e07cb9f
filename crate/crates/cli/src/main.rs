//! `icw`: simulate shared worlds, train the toy policy, evaluate it and
//! sweep group sizes.

mod commands;
mod config;
mod plot;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{RunConfig, Seeds};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Degenerate(String),
    #[error("{0}")]
    Partial(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Io(_) | CliError::Degenerate(_) => 2,
            CliError::Partial(_) => 3,
        }
    }
}

impl From<icworld::Error> for CliError {
    fn from(e: icworld::Error) -> Self {
        let root = match &e {
            icworld::Error::AtStep { source, .. } => source.as_ref(),
            other => other,
        };
        match root {
            icworld::Error::Io { .. } | icworld::Error::Format { .. } => CliError::Io(e.to_string()),
            r if r.is_degenerate() => CliError::Degenerate(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "icw", version, about = "Shared-world consistency rewards and GRPO finetuning on synthetic worlds")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's output_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Replaces every seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Continue training from the checkpoint in the output directory.
    #[arg(long, global = true)]
    resume: bool,
    /// Worker threads; ICW_THREADS takes precedence.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate worlds and render their observations.
    Simulate,
    /// Train the policy; writes checkpoints, a JSON-lines log and a reward curve.
    Train,
    /// Evaluate a checkpoint on the held-out worlds.
    Eval {
        /// Defaults to `<out>/train/policy.bin`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train every (group size, seed) pair and plot the reward curves.
    SweepGroupsize {
        #[arg(long, value_delimiter = ',', default_value = "4,16")]
        groups: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        seeds: Vec<u64>,
    },
    /// Score saved observations with the combined reward.
    Score {
        /// Observation files written by `simulate` (at least two).
        #[arg(required = true, num_args = 2..)]
        views: Vec<PathBuf>,
    },
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    match std::env::var("ICW_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| CliError::Config(format!("ICW_THREADS={v} is not a thread count"))),
        Err(_) => Ok(flag),
    }
}

fn load_config(cli: &Cli, need_seeds: bool) -> Result<RunConfig, CliError> {
    let mut cfg = match (&cli.config, cli.seed) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(seed)) => RunConfig::with_seeds(Seeds::all(seed)),
        (None, None) if !need_seeds => RunConfig::with_seeds(Seeds::all(0)),
        (None, None) => return Err(CliError::Config("pass --config or --seed; runs are never seeded from the clock".into())),
    };
    if let Some(seed) = cli.seed {
        cfg.seeds = Seeds::all(seed);
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = thread_count(cli.threads)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let need_seeds = !matches!(cli.command, Command::Score { .. });
    let cfg = load_config(&cli, need_seeds)?;
    let out = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("icw-out"));
    match &cli.command {
        Command::Simulate => commands::simulate(&cfg, &out),
        Command::Train => commands::train(&cfg, &out, cli.resume),
        Command::Eval { checkpoint } => commands::eval(&cfg, &out, checkpoint.as_deref()),
        Command::SweepGroupsize { groups, seeds } => commands::sweep_groupsize(&cfg, &out, groups, seeds),
        Command::Score { views } => commands::score(&cfg, views),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("icw: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
