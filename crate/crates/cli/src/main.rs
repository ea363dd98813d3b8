//! `repremia` -- batch front end for the reinsurance-design solver.
//!
//! Subcommands read a JSON scenario file, run the requested computation, and
//! write deterministic CSV/JSON tables into the output directory. Exit
//! codes: 0 success, 2 configuration error, 3 success with solver warnings,
//! 4 numerical failure. Set `REPREMIA_LOG=info` (or `debug`) for progress
//! logging on stderr.

mod cmds;
mod format;
mod scenario;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Failures split by exit code: bad configuration (2) vs a computation that
/// could not produce a result (4).
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "{m}"),
            CliError::Numerical(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Sort core-library errors into exit-code buckets: parameter and domain
/// violations are the caller's configuration problem, everything else is a
/// numerical failure of the run itself.
pub fn classify(what: &str, e: repremia_core::Error) -> CliError {
    use repremia_core::Error as E;
    match e {
        E::InvalidParams(_) | E::Domain(_) | E::Unsupported(_) => {
            CliError::Config(format!("{what}: {e}"))
        }
        _ => CliError::Numerical(format!("{what}: {e}")),
    }
}

/// Whether a command finished cleanly or carries solver warnings (exit 3).
pub enum Outcome {
    Clean,
    Warnings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutFormat {
    Csv,
    Json,
}

impl OutFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            OutFormat::Csv => "csv",
            OutFormat::Json => "json",
        }
    }
}

#[derive(Debug, Args)]
pub struct CommonOpts {
    /// Scenario file (JSON, schema 1)
    #[arg(long)]
    pub scenario: PathBuf,
    /// Output directory, created if missing (default: scenario's output.dir, else ".")
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for the randomized verification checks
    #[arg(long)]
    pub seed: Option<u64>,
    /// Cap on worker threads (default: one per core)
    #[arg(long)]
    pub threads: Option<usize>,
    /// Fixed premium sensitivity; overrides the scenario's delta
    #[arg(long, conflicts_with = "delta_grid")]
    pub delta: Option<f64>,
    /// Delta grid as start:end:step; overrides the scenario's delta_grid
    #[arg(long, value_name = "START:END:STEP")]
    pub delta_grid: Option<String>,
    /// Table file format
    #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
    pub format: OutFormat,
}

#[derive(Parser)]
#[command(
    name = "repremia",
    version,
    about = "Optimal reinsurance design under a performance-based premium scheme"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Tabulate the realized premium over a grid of ceded-loss outcomes
    PremiumEval(CommonOpts),
    /// Solve the insurer's optimal-contract problem at fixed delta(s)
    Solve(CommonOpts),
    /// Leader-follower sweep over delta with optimum selection
    Bowley(CommonOpts),
    /// Emit the per-delta follower-response table without selecting an optimum
    Sweep(CommonOpts),
    /// Trace the leader's optimal delta as its risk level varies
    BetaCurve(CommonOpts),
    /// Run the self-check oracle suite against the scenario
    Verify(CommonOpts),
}

fn main() {
    env_logger::Builder::from_env(
        env_logger::Env::new()
            .filter_or("REPREMIA_LOG", "warn")
            .write_style("REPREMIA_LOG_STYLE"),
    )
    .format_timestamp(None)
    .init();
    let cli = Cli::parse();
    let (kind, opts) = match &cli.cmd {
        Cmd::PremiumEval(o) => (cmds::CmdKind::PremiumEval, o),
        Cmd::Solve(o) => (cmds::CmdKind::Solve, o),
        Cmd::Bowley(o) => (cmds::CmdKind::Bowley, o),
        Cmd::Sweep(o) => (cmds::CmdKind::Sweep, o),
        Cmd::BetaCurve(o) => (cmds::CmdKind::BetaCurve, o),
        Cmd::Verify(o) => (cmds::CmdKind::Verify, o),
    };
    let code = match cmds::run(kind, opts) {
        Ok(Outcome::Clean) => 0,
        Ok(Outcome::Warnings) => {
            eprintln!("completed with warnings (see the emitted files)");
            3
        }
        Err(CliError::Config(m)) => {
            eprintln!("config error: {m}");
            2
        }
        Err(CliError::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            4
        }
    };
    std::process::exit(code);
}
