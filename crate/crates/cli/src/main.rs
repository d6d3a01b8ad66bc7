//! `lapreg`: rating prediction with graph-Laplacian-regularized kernels.
//!
//! Exit status: 0 success, 1 invalid configuration or input, 2 I/O failure,
//! 3 numeric failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, CommandFactory, FromArgMatches, Parser, Subcommand};

mod config;
mod run;

use config::{RunConfig, FIELDS, OUT_ENV};

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Io(String),
    Numeric(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid configuration or input: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<lapreg::Error> for CliError {
    fn from(e: lapreg::Error) -> Self {
        use lapreg::Error as E;
        match e {
            E::Io { .. } => CliError::Io(e.to_string()),
            E::Numeric { .. } => CliError::Numeric(e.to_string()),
            E::Argument(_) | E::Validation(_) | E::Parse { .. } => CliError::Validation(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "lapreg", version, about = "Graph-Laplacian-regularized rating prediction")]
struct Cli {
    /// TOML file with any of the config fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base parameter profile: movielens or twomoons.
    #[arg(long, global = true)]
    profile: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Predict with the first configured method and score the test entries.
    Predict,
    /// Run every configured method and write MAE and speedup tables.
    Bench,
    /// Sweep GBa bandwidths on the two-moons task against Prop.
    SweepKb,
    /// Write a two-moons point cloud as CSV.
    GenTwomoons,
    /// Split a full MovieLens ratings file into u1..u5 and ua/ub pairs.
    MakeSplits {
        /// Ratings file; defaults to `<data_dir>/u.data`.
        #[arg(long)]
        ratings: Option<PathBuf>,
    },
}

const SUBCOMMANDS: &[&str] = &["predict", "bench", "sweep-kb", "gen-twomoons", "make-splits"];

fn command() -> clap::Command {
    let mut cmd = Cli::command();
    for &name in SUBCOMMANDS {
        cmd = cmd.mut_subcommand(name, |mut sub| {
            for &(field, _, help) in FIELDS {
                sub = sub.arg(Arg::new(field).long(field).value_name("VALUE").help(help));
            }
            sub
        });
    }
    cmd
}

fn main() -> ExitCode {
    let matches = match command().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let cli = Cli::from_arg_matches(&matches).expect("matches come from the same command");
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let flags: Vec<(&str, String)> = FIELDS
        .iter()
        .filter_map(|&(f, _, _)| sub.get_one::<String>(f).map(|v| (f, v.clone())))
        .collect();
    let default_profile = match cli.command {
        Command::SweepKb | Command::GenTwomoons => "twomoons",
        _ => "movielens",
    };
    let result = RunConfig::resolve(
        default_profile,
        cli.profile.as_deref(),
        cli.config.as_deref(),
        std::env::var(OUT_ENV).ok(),
        &flags,
    )
    .and_then(|config| match cli.command {
        Command::Predict => run::predict(&config),
        Command::Bench => run::bench(&config),
        Command::SweepKb => run::sweep_kb(&config),
        Command::GenTwomoons => run::gen_twomoons(&config),
        Command::MakeSplits { ratings } => run::make_splits(&config, ratings),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lapreg {name}: {e}");
            ExitCode::from(e.code())
        }
    }
}
