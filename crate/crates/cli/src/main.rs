//! `qlimits`: precision limits for two-parameter quantum estimation problems.

mod commands;
mod input;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qlimits_core::{Error, RotationsConfig};

use crate::commands::{CurveKind, MeasurementRun, Rank};
use crate::table::Format;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Solver(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NotSquare { .. }
            | Error::DimensionMismatch { .. }
            | Error::NonFinite { .. }
            | Error::NotHermitian { .. }
            | Error::NotPsd { .. }
            | Error::BadTrace { .. }
            | Error::DerivativeNotTraceless { .. }
            | Error::UnsupportedDerivative { .. }
            | Error::WeightNotPositiveDefinite { .. }
            | Error::Validation(_) => CliError::Validation(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Solver(_) => 1,
            CliError::Validation(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "qlimits",
    version,
    about = "Cramér-Rao and Lu-Wang bounds for two-parameter quantum estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Output {
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Debug, Args)]
struct Weight {
    /// W = diag(w, 2 - w).
    #[arg(long, default_value_t = 1.0)]
    weight: f64,
    /// Full weight matrix as JSON, e.g. "[[2, 0.5], [0.5, 1]]". Overrides --weight.
    #[arg(long)]
    weight_matrix: Option<String>,
}

#[derive(Debug, Args)]
struct Angles {
    /// Bloch radius in (0, 1].
    #[arg(long)]
    r: f64,
    /// Polar angle, radians or a pi literal such as pi/4.
    #[arg(long, value_parser = input::parse_angle, allow_hyphen_values = true)]
    theta: f64,
    #[arg(long, value_parser = input::parse_angle, allow_hyphen_values = true)]
    phi: f64,
}

impl Angles {
    fn config(&self) -> Result<RotationsConfig, CliError> {
        Ok(RotationsConfig::new(self.r, self.theta, self.phi)?)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// SLD, Nagaoka, Holevo and Lu-Wang bounds for a problem file.
    Bounds {
        problem: PathBuf,
        #[command(flatten)]
        weight: Weight,
        #[command(flatten)]
        output: Output,
    },
    /// Boundary points (v1, v2) of an MSE trade-off region.
    Curve {
        problem: PathBuf,
        #[arg(long, value_enum)]
        kind: CurveKind,
        #[arg(long, default_value_t = 101)]
        points: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Nagaoka and Lu-Wang bounds for random problems.
    RandomProblems {
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Evaluate instances one at a time.
        #[arg(long)]
        serial: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Figures of merit of random measurements on the qubit rotations model.
    RandomMeasurements {
        #[command(flatten)]
        angles: Angles,
        #[arg(long, default_value_t = 10_000)]
        count: usize,
        #[arg(long, value_enum, default_value = "1")]
        rank: Rank,
        /// Number of POVM outcomes.
        #[arg(long, default_value_t = 3)]
        outcomes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        serial: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Bounds for the qubit rotations model.
    Rotations {
        #[command(flatten)]
        angles: Angles,
        #[command(flatten)]
        weight: Weight,
        #[command(flatten)]
        output: Output,
    },
    /// Run the acceptance suite.
    Selftest {
        /// Run a single criterion.
        #[arg(long)]
        criterion: Option<usize>,
    },
}

fn report_failures(failed: usize, total: usize, what: &str) -> Result<(), CliError> {
    if failed == 0 {
        Ok(())
    } else {
        eprintln!("{failed} of {total} {what} failed");
        Err(CliError::Solver(format!("{failed} {what} failed")))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Bounds {
            problem,
            weight,
            output,
        } => {
            let p = input::load_problem(&problem)?;
            let w = input::weight(weight.weight, weight.weight_matrix.as_deref())?;
            commands::bounds(&p, &w)?.emit(output.format, output.out.as_deref())
        }
        Command::Curve {
            problem,
            kind,
            points,
            output,
        } => {
            let p = input::load_problem(&problem)?;
            commands::curve(&p, kind, points)?.emit(output.format, output.out.as_deref())
        }
        Command::RandomProblems {
            dim,
            count,
            seed,
            serial,
            output,
        } => {
            let (table, failed) = commands::random_problems(dim, count, seed, serial)?;
            table.emit(output.format, output.out.as_deref())?;
            report_failures(failed, count, "instances")
        }
        Command::RandomMeasurements {
            angles,
            count,
            rank,
            outcomes,
            seed,
            serial,
            output,
        } => {
            let run = MeasurementRun {
                cfg: angles.config()?,
                count,
                rank,
                outcomes,
                seed,
                serial,
            };
            let (table, failed) = commands::random_measurements(&run)?;
            table.emit(output.format, output.out.as_deref())?;
            report_failures(failed, count, "draws")
        }
        Command::Rotations {
            angles,
            weight,
            output,
        } => {
            let w = input::weight(weight.weight, weight.weight_matrix.as_deref())?;
            commands::rotations(&angles.config()?, &w)?.emit(output.format, output.out.as_deref())
        }
        Command::Selftest { criterion } => {
            let outcomes = commands::selftest(criterion)?;
            for o in &outcomes {
                println!("{o}");
            }
            let failed = outcomes.iter().filter(|o| !o.passed).count();
            println!(
                "selftest: {} passed, {failed} failed",
                outcomes.len() - failed
            );
            if failed == 0 {
                Ok(())
            } else {
                Err(CliError::Solver(format!("{failed} criteria failed")))
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
