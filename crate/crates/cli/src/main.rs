//! `cfreq`: digit statistics, dimension estimates, inequality checks and
//! construction sampling for continued-fraction digit-frequency sets.
//!
//! Exit codes: 0 success, 1 I/O error, 2 usage or parse error, 3 infeasible
//! constraints, 4 resource budget exceeded, 5 solver did not converge,
//! 6 verification found counterexamples.

mod commands;
mod config;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cfreq_core::Error;
use clap::{Args, Parser, Subcommand};

use config::{parse_depths, parse_growth, Format, RunConfig, SampleMode};

#[derive(Debug, Parser)]
#[command(
    name = "cfreq",
    version,
    about = "Continued-fraction digit-frequency toolkit"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// JSON config; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Include wall-clock columns (output is then not reproducible).
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Digits, frequencies, convergents and interval lengths of a number.
    Analyze(AnalyzeArgs),
    /// Dimension estimate over a grid of alphabet bounds and depths.
    Dimension(DimensionArgs),
    /// Randomized and exhaustive inequality checks.
    Verify(VerifyArgs),
    /// Seed points, forced-digit words and their local-dimension profiles.
    Sample(SampleArgs),
}

#[derive(Debug, Args, Default)]
pub struct AnalyzeArgs {
    /// A rational such as 3/7 or 0.625 (digits of its fractional part), or a
    /// comma-separated digit list such as 1,2,1,2.
    pub input: Option<String>,
    /// Number of digits to use.
    #[arg(long)]
    pub depth: Option<usize>,
    /// Ranks at which to report convergents; all ranks when absent.
    #[arg(long, value_delimiter = ',')]
    pub ranks: Option<Vec<usize>>,
}

#[derive(Debug, Args, Default)]
pub struct DimensionArgs {
    /// Frequency vector JSON file.
    #[arg(long)]
    pub freq: Option<PathBuf>,
    /// Alphabet bounds N, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<u64>>,
    /// Cylinder depths k, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub k_list: Option<Vec<usize>>,
}

#[derive(Debug, Args, Default)]
pub struct VerifyArgs {
    /// Suite name, numeric alias (2.1 .. 2.7, 3.1) or `all`.
    #[arg(long)]
    pub suite: Option<String>,
    /// Random trials per randomized suite.
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct SampleArgs {
    #[arg(value_enum)]
    pub mode: Option<SampleMode>,
    /// Frequency vector JSON file.
    #[arg(long)]
    pub freq: Option<PathBuf>,
    /// Word length.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of words; seeds run from `--seed` upward.
    #[arg(long)]
    pub count: Option<u64>,
    /// Alphabet growth: linear, power:SCALE:EXP or log:SCALE.
    #[arg(long, value_parser = parse_growth)]
    pub growth: Option<cfreq_core::constructions::GrowthSequence>,
    /// Base of the forced digits.
    #[arg(long, conflicts_with = "ln_b")]
    pub b: Option<f64>,
    /// Natural log of the base of the forced digits.
    #[arg(long)]
    pub ln_b: Option<f64>,
    /// Seed word as a digit list.
    #[arg(long)]
    pub z: Option<String>,
    /// Profile depths: a comma list of values or ranges such as 4-100.
    #[arg(long, value_delimiter = ',', value_parser = parse_depths)]
    pub depths: Option<Vec<Vec<u64>>>,
    /// Where to write the frequency summary of seed points.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Usage(String),
    Core(Error),
    /// Number of counterexamples found.
    Verification(usize),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Core(e) => core_code(e),
            CliError::Verification(_) => 6,
        }
    }
}

pub fn core_code(e: &Error) -> u8 {
    match e {
        Error::Domain(_) | Error::Parse { .. } => 2,
        Error::Infeasible(_) => 3,
        Error::Resource { .. } => 4,
        Error::NonConvergence { .. } => 5,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(m) => write!(f, "I/O error: {m}"),
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Verification(n) => write!(f, "verification found {n} counterexample(s)"),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = &cli.common;
    let cfg = RunConfig::load(common.config.as_deref())?;
    if let Some(jobs) = config::pick(common.jobs, cfg.jobs) {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let ctx = commands::Context::new(common, &cfg);
    match cli.command {
        Command::Analyze(a) => commands::analyze(&ctx, a),
        Command::Dimension(a) => commands::dimension(&ctx, a),
        Command::Verify(a) => commands::verify(&ctx, a),
        Command::Sample(a) => commands::sample(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cfreq: {e}");
            ExitCode::from(e.code())
        }
    }
}
