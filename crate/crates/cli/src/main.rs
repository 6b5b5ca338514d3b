//! `stochopt`: runs the solvers on synthetic problems and road networks and
//! writes CSV traces and JSON summaries.

mod bench;
mod config;
mod online;
mod output;
mod smd;
mod traffic;
mod zo;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ConfigFile;
use output::Output;

#[derive(Debug, Parser)]
#[command(
    name = "stochopt",
    version,
    about = "Stochastic mirror descent experiment harness"
)]
struct Cli {
    /// Output directory (default: $STOCHOPT_OUT, else ./stochopt-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON file with parameters; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Stochastic mirror descent on a synthetic problem.
    Smd(smd::SmdArgs),
    /// Gradient-free mirror descent on a reference problem.
    Zo(zo::ZoArgs),
    /// Online exp-weights against a loss stream.
    Online {
        #[command(subcommand)]
        game: online::OnlineCommand,
    },
    /// Traffic equilibria on a network file or bundled instance.
    Traffic {
        #[command(subcommand)]
        task: traffic::TrafficCommand,
    },
    /// Runs the acceptance criteria and prints a pass/fail table.
    Bench(bench::BenchArgs),
}

/// How a command ended, mapped to the process exit status.
#[derive(Debug)]
pub enum Failure {
    /// Parameters rejected before any run started (status 2).
    InvalidConfig(String),
    /// A requested check did not hold (status 1).
    CheckFailed(String),
    /// A run aborted or output could not be written (status 3).
    Aborted(String),
}

impl Failure {
    fn status(&self) -> u8 {
        match self {
            Failure::CheckFailed(_) => 1,
            Failure::InvalidConfig(_) => 2,
            Failure::Aborted(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::InvalidConfig(m) => write!(f, "invalid-config: {m}"),
            Failure::CheckFailed(m) => write!(f, "check-failed: {m}"),
            Failure::Aborted(m) => write!(f, "aborted: {m}"),
        }
    }
}

impl From<stochopt::Error> for Failure {
    fn from(e: stochopt::Error) -> Self {
        use stochopt::Error as E;
        match e {
            E::Config(_) | E::Input(_) | E::Network { .. } => Failure::InvalidConfig(e.to_string()),
            _ => Failure::Aborted(e.to_string()),
        }
    }
}

pub type CmdResult = Result<(), Failure>;

fn run(cli: Cli) -> CmdResult {
    let mut file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let out = Output::new(cli.out.or(file.out.take()));
    match cli.command {
        Command::Smd(args) => smd::run(args.merged(file.smd.take())?, &out),
        Command::Zo(args) => zo::run(args.merged(file.zo.take())?, &out),
        Command::Online { game } => online::run(game, &mut file, &out),
        Command::Traffic { task } => traffic::run(task, &mut file, &out),
        Command::Bench(args) => bench::run(args.merged(file.bench.take()), &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.status())
        }
    }
}
