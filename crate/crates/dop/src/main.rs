use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dop::cli::{cmd_eval, cmd_parse, cmd_stats, cmd_sweep, cmd_train, CliError};
use dop::config::RunConfig;

/// Tree-fragment grammar toolkit: train, parse, evaluate, sweep, inspect.
#[derive(Parser)]
#[command(name = "dop", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Path to a `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a single config key (repeatable), e.g. --set k=100.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Extract fragments from a treebank and estimate a probability model.
    Train(Common),
    /// Parse sentences (token lines or tree yields) with a trained model.
    Parse(Common),
    /// Score parses against a gold treebank with bracket precision/recall.
    Eval {
        /// Gold treebank file.
        gold: PathBuf,
        /// Test file: parser output records or a bracketed treebank.
        test: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Filter a fragment table along one dimension and score each value.
    Sweep(Common),
    /// Report fragment-table statistics.
    Stats(Common),
}

impl Common {
    fn load(&self) -> Result<RunConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        config.apply_overrides(&self.set)?;
        Ok(config)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(common) => cmd_train(&common.load()?),
        Command::Parse(common) => cmd_parse(&common.load()?),
        Command::Eval { gold, test, common } => cmd_eval(&gold, &test, &common.load()?),
        Command::Sweep(common) => cmd_sweep(&common.load()?),
        Command::Stats(common) => cmd_stats(&common.load()?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
