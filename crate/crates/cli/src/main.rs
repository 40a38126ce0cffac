//! `ippt`: simulate inhomogeneous Poisson experiments, calibrate test
//! thresholds and estimate power curves.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::Overrides;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "ippt", version, about = "Tests for inhomogeneous Poisson processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Overrides,
    /// Worker threads for the Monte Carlo loops (output does not depend on it)
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print I(θ₁), φₙ and u_max for the configured model
    Fisher,
    /// Simulate one experiment at θ₁ + uφₙ
    Simulate,
    /// Calibrate test thresholds
    Thresholds {
        /// Use the closed-form Bayes thresholds instead of Monte Carlo
        #[arg(long)]
        closed_form: bool,
    },
    /// Estimate power curves over the u-grid
    Power {
        /// Also write the limit power curves
        #[arg(long)]
        limit: bool,
    },
    /// Regenerate a reference table or figure data set
    Reproduce {
        #[arg(value_enum)]
        target: Target,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum Target {
    /// BT1 thresholds over six test sizes
    Table1,
    /// SFT and BT1 power with their limit curves
    Fig1,
    /// GLRT, Wald and SFT power with the limit curve
    Fig2,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = cli.flags.resolve()?;
    let body = || match cli.command {
        Command::Fisher => commands::fisher(&cfg, &mut std::io::stdout().lock()),
        Command::Simulate => commands::simulate(&cfg),
        Command::Thresholds { closed_form } => commands::thresholds(&cfg, closed_form),
        Command::Power { limit } => commands::power(&cfg, limit),
        Command::Reproduce { target: Target::Table1 } => commands::table1(&cfg),
        Command::Reproduce { target: Target::Fig1 } => commands::fig1(&cfg),
        Command::Reproduce { target: Target::Fig2 } => commands::fig2(&cfg),
    };
    match cli.jobs {
        Some(0) => Err(CliError::Config("--jobs must be at least 1".into())),
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CliError::Config(e.to_string()))?
            .install(body),
        None => body(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
