//! Command-line driver: argument parsing, run configs and the commands.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use commands::{RunArgs, SynthArgs};

/// Exit code 1: bad invocation or config. Exit code 2: data or model problem.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (Failure::Usage(e) | Failure::Data(e)) = self;
        write!(f, "{e:#}")
    }
}

impl std::error::Error for Failure {}

impl From<graphboost::Error> for Failure {
    fn from(e: graphboost::Error) -> Self {
        Failure::Data(e.into())
    }
}

#[derive(Debug, Parser)]
#[command(name = "graphboost", version, about = "Boosted graph classifiers for tabular cohorts")]
pub struct Cli {
    /// Debug-level logging.
    #[arg(long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunFlags {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
}

impl From<RunFlags> for RunArgs {
    fn from(f: RunFlags) -> Self {
        RunArgs {
            config: f.config,
            data: f.data,
            model: f.model,
            out: f.out,
            seed: f.seed,
            workers: f.workers,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit an ensemble and score its test split.
    Train(RunFlags),
    /// Predict labels and class scores for a CSV.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a labeled CSV.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "label")]
        label: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grid search over the lists in a config.
    Sweep(RunFlags),
    /// Write a synthetic train/test CSV pair.
    Synth {
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        m: usize,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 0.8)]
        rho: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Train(f) => commands::train(&f.into()).map(drop),
        Command::Sweep(f) => commands::sweep(&f.into()).map(drop),
        Command::Predict { model, data, out } => commands::predict(&model, &data, &out).map(drop),
        Command::Evaluate {
            model,
            data,
            label,
            out,
        } => commands::evaluate(&model, &data, &label, out.as_deref()).map(drop),
        Command::Synth {
            n,
            m,
            k,
            rho,
            seed,
            test_fraction,
            out,
        } => commands::synth(&SynthArgs {
            n,
            m,
            k,
            rho,
            seed,
            test_fraction,
            out,
        })
        .map(drop),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = if cli.verbose { "debug" } else { "info" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
