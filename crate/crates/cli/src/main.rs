//! `uda`: command-line access to posterior, risk, uncertainty and discrepancy
//! computations on finite UDA classes.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use uda_core::EntropyConfig;

use crate::report::Format;

#[derive(Parser, Debug)]
#[command(name = "uda", version, about = "Bayesian transfer-difficulty analysis for finite UDA classes")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Entropy base.
    #[arg(long = "log-base", global = true, value_enum, default_value_t = LogBase::Two)]
    pub log_base: LogBase,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LogBase {
    #[value(name = "2")]
    Two,
    #[value(name = "e")]
    E,
}

impl LogBase {
    pub fn config(self) -> EntropyConfig {
        match self {
            LogBase::Two => EntropyConfig::BITS,
            LogBase::E => EntropyConfig::NATS,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LogBase::Two => "2",
            LogBase::E => "e",
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimal infinite-sample risk, e* and PTLU of every observation of a class.
    Analyze(commands::AnalyzeArgs),
    /// Draw an instance and an (m, n)-sample.
    Sample(commands::SampleArgs),
    /// Posterior and aggregated prediction for a drawn or given sample.
    Posterior(commands::PosteriorArgs),
    /// Check the Fano and 1 − δ risk bounds over repeated draws.
    Bounds(commands::BoundsArgs),
    /// Discrepancy measures between an entry's source and target.
    Measures(commands::MeasuresArgs),
    /// Regression table of the worked examples.
    Examples(commands::ExamplesArgs),
    /// EPTLU → PTLU convergence over a sample-size schedule.
    Converge(commands::ConvergeArgs),
}

fn configure_threads() {
    if let Some(n) = std::env::var("UDA_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    configure_threads();
    let g = &cli.global;
    let result = match &cli.command {
        Command::Analyze(a) => commands::analyze(a, g),
        Command::Sample(a) => commands::sample(a, g),
        Command::Posterior(a) => commands::posterior(a, g),
        Command::Bounds(a) => commands::bounds(a, g),
        Command::Measures(a) => commands::measures(a, g),
        Command::Examples(a) => commands::examples(a, g),
        Command::Converge(a) => commands::converge(a, g),
    };
    let written = result.and_then(|report| commands::emit(&report, g));
    match written {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
