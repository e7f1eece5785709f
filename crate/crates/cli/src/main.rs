use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};

mod cmd;
mod config;
mod data;
mod error;

use config::{Profile, RunConfig};
use error::CliError;

/// Attribute-grounded stylized captioning pipeline.
///
/// Exit status: 0 on success, 2 on invalid input or configuration, 3 when
/// the only failures are decodes that could not meet their constraints,
/// 1 on any other error.
#[derive(Debug, Parser)]
#[command(name = "stylecap", version)]
struct Cli {
    /// TOML run configuration layered over the profile defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    profile: Option<Profile>,
    /// Root seed; overrides `seed` in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Config override, e.g. `--set train.iterations=500`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Insert attribute and/or ANP adjectives into captions.
    Augment(cmd::augment::AugmentArgs),
    /// Train the captioning model.
    Train(cmd::train::TrainArgs),
    /// Decode captions for every image.
    Generate(cmd::generate::GenerateArgs),
    /// Score decodes against references.
    Eval(cmd::eval::EvalArgs),
    /// Combine several eval runs into one table.
    Report(cmd::report::ReportArgs),
    /// Write a synthetic corpus with features and lexicons.
    FeaturesSynth(cmd::synth::SynthArgs),
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref(), cli.profile, &cli.overrides)?;
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    match &cli.command {
        Command::Augment(a) => cmd::augment::run(&cfg, &cli.out, a),
        Command::Train(a) => cmd::train::run(&cfg, &cli.out, a),
        Command::Generate(a) => cmd::generate::run(&cfg, &cli.out, a),
        Command::Eval(a) => cmd::eval::run(&cfg, &cli.out, a),
        Command::Report(a) => cmd::report::run(&cli.out, a),
        Command::FeaturesSynth(a) => cmd::synth::run(&cfg, &cli.out, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.exit_code())
        }
    }
}
