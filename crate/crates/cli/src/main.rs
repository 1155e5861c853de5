use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use xferqa_cli::config::load_config;
use xferqa_cli::{commands, configure_threads, CliResult, ExperimentConfig, Overrides, Strategy};

/// Transfer learning experiments for answer selection and triggering.
#[derive(Parser)]
#[command(name = "xferqa", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON) or a manifest from a previous run.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> CliResult<ExperimentConfig> {
        let overrides = Overrides {
            seed: self.seed,
            strategy: self.strategy,
            lambda: self.lambda,
            out: self.out.clone(),
        };
        load_config(&self.config, &overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate inputs and print corpus statistics.
    IngestCheck(Common),
    /// Train the configured strategy and write all artifacts.
    Train(Common),
    /// Grid-search the mixing weight of joint training.
    SearchLambda(Common),
    /// Cluster the target dev set and dump the source filter decisions.
    ClusterAudit(Common),
    /// Score a checkpoint on the target dev and test splits.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Tabulate results from run directories.
    Report {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
    /// Write a synthetic source/target pair with embeddings and a config.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Share of source train questions replaced by off-distribution noise.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
    },
}

fn dispatch(command: Command) -> CliResult<String> {
    configure_threads()?;
    match command {
        Command::IngestCheck(c) => commands::ingest_check(&c.load()?),
        Command::Train(c) => commands::train(&c.load()?),
        Command::SearchLambda(c) => commands::search_lambda(&c.load()?),
        Command::ClusterAudit(c) => commands::cluster_audit(&c.load()?),
        Command::Evaluate { common, checkpoint } => {
            commands::evaluate(&common.load()?, checkpoint.as_deref())
        }
        Command::Report { out, dirs } => commands::report(&dirs, out.as_deref()),
        Command::Synth { out, seed, noise } => commands::synth(&out, seed, noise),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
