//! `absurd`: generate absurd-world prompt batches, run them against model
//! backends, and score and analyze the journal.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use absurd_world::generator::Mode;
use commands::{BackendChoice, Classify, Failure, EXIT_USAGE};
use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "absurd", version, about = "Absurd-world benchmark toolchain")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `master_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Log progress to stderr (RUST_LOG takes precedence).
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    ZeroShot,
    FewShot,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::ZeroShot => Mode::ZeroShot,
            ModeArg::FewShot => Mode::FewShot,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List built-in worlds and their rulesets.
    Worlds,
    /// Write one zero-shot batch per ruleset.
    Generate,
    /// Evaluate a batch against every configured model.
    Run {
        #[arg(long, value_enum, default_value = "zero-shot")]
        mode: ModeArg,
        /// live, mock:rule-follower, mock:prior-biased, fixture or fixture:DIR
        #[arg(long, default_value = "live")]
        backend: BackendChoice,
    },
    /// Pick few-shot pools from the zero-shot journal and assemble few-shot batches.
    SelectFewshot,
    /// Score the journal per model, ruleset and mode.
    Score,
    /// Score, average by category, test and write the full report.
    Analyze,
    /// Write the report without printing the summary.
    Report {
        /// Build the report from the shipped per-model tables.
        #[arg(long)]
        fixtures: bool,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).usage()?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    cfg.validate().usage()?;

    match cli.command {
        Command::Worlds => commands::cmd_worlds(&cfg),
        Command::Generate => commands::cmd_generate(&cfg),
        Command::Run { mode, backend } => commands::cmd_run(&cfg, mode.into(), &backend),
        Command::SelectFewshot => commands::cmd_select_fewshot(&cfg),
        Command::Score => commands::cmd_score(&cfg),
        Command::Analyze => commands::cmd_analyze(&cfg),
        Command::Report { fixtures } => commands::cmd_report(&cfg, fixtures),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let default_level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(default_level))
        .init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.exit_code)
        }
    }
}
