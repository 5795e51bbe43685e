//! `persuade`: command-line front end.
//!
//! Exit codes: 0 pass/true, 1 fail/false (with a witness), 2 usage or parse
//! error, 3 numeric failure.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "persuade", version, about = "Bayesian persuasion with mean-measurable payoffs")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// grid size for LP-backed commands [default: 401, or the experiment kind's own]
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// comparison tolerance; commands with their own default say so
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// machine-readable JSON result
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// plot data
    #[arg(long, global = true)]
    pub csv: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimal signal for a payoff and prior on a grid, with dual prices.
    Solve {
        payoff: PathBuf,
        prior: PathBuf,
        /// lower bound G0 of the feasible interval (outside information)
        #[arg(long)]
        lower: Option<PathBuf>,
    },
    /// Is U ordinally less convex than V?
    CheckOlc { u: PathBuf, v: PathBuf },
    /// Does the payoff satisfy the crater property?
    CheckCrater { payoff: PathBuf },
    /// Is the payoff regular?
    CheckRegular { payoff: PathBuf },
    /// Weak set order between the argmax sets of U and V.
    Compare {
        u: PathBuf,
        v: PathBuf,
        prior: PathBuf,
        #[arg(long)]
        lower: Option<PathBuf>,
        /// sampled members per argmax
        #[arg(long, default_value_t = 8)]
        probe: usize,
    },
    /// Crater-violation counterexample for U, or with V the two-point
    /// counterexample for a pair that is not ordinally ordered.
    Counterexample { u: PathBuf, v: Option<PathBuf> },
    /// Closed-form solution for a binary state with prior mean MU.
    Binary {
        payoff: PathBuf,
        #[arg(long)]
        mu: f64,
    },
    /// Certify a candidate optimizer against the dual program (tol default 1e-6).
    Certify { payoff: PathBuf, prior: PathBuf, candidate: PathBuf },
    /// Seeded batch experiment.
    #[command(alias = "oracle")]
    Experiment {
        #[arg(long)]
        kind: persuade::harness::ExperimentKind,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 8)]
        probe: usize,
    },
}

/// Outcome of a command; `Fail` means the answer was "no".
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numeric(String),
}

impl Common {
    pub fn grid_size(&self) -> usize {
        self.grid.unwrap_or(401)
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if cli.common.grid.is_some_and(|n| n < 3) {
        eprintln!("usage: --grid must be at least 3");
        return ExitCode::from(2);
    }
    let c = &cli.common;
    let result = match &cli.command {
        Command::Solve { payoff, prior, lower } => commands::solve(c, payoff, prior, lower.as_deref()),
        Command::CheckOlc { u, v } => commands::check_olc(c, u, v),
        Command::CheckCrater { payoff } => commands::check_crater(c, payoff),
        Command::CheckRegular { payoff } => commands::check_regular(c, payoff),
        Command::Compare { u, v, prior, lower, probe } => commands::compare(c, u, v, prior, lower.as_deref(), *probe),
        Command::Counterexample { u, v } => commands::counterexample(c, u, v.as_deref()),
        Command::Binary { payoff, mu } => commands::binary(c, payoff, *mu),
        Command::Certify { payoff, prior, candidate } => commands::certify(c, payoff, prior, candidate),
        Command::Experiment { kind, count, probe } => commands::experiment(c, *kind, *count, *probe),
    };
    match result {
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(Verdict::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
