//! `gcs`: constellation-shaping experiments from the command line.
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical breakdown,
//! 3 I/O error.

mod commands;
mod constellation_file;
mod csv_out;
mod spec;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "gcs",
    version,
    about = "Geometric constellation shaping: gradient-free autoencoder training and MI evaluation"
)]
struct Cli {
    /// Worker threads for sweep points and evaluation runs (default: all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one autoencoder per operating point and write its artifacts
    Train(commands::train::TrainArgs),
    /// Evaluate stored constellations (or built-in QAM) into an MI table
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Search the (q, r) hyperparameter grid at one operating point
    GridSearch(commands::grid_search::GridSearchArgs),
    /// Train and evaluate the requested series into one tidy CSV
    Compare(commands::compare::CompareArgs),
    /// Write a square-QAM reference constellation file
    ExportQam(commands::export_qam::ExportQamArgs),
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: cannot size worker pool: {e}");
            return 1;
        }
    }
    let result = match &cli.command {
        Command::Train(args) => commands::train::run(args),
        Command::Evaluate(args) => commands::evaluate::run(args),
        Command::GridSearch(args) => commands::grid_search::run(args),
        Command::Compare(args) => commands::compare::run(args),
        Command::ExportQam(args) => commands::export_qam::run(args),
    };
    match result {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err:#}");
            exit_code(&err)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<gcs_core::Error>() {
            return match core {
                gcs_core::Error::NumericalBreakdown(_)
                | gcs_core::Error::SearchFailed(_)
                | gcs_core::Error::DegenerateConstellation => 2,
                _ => 1,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 3;
        }
    }
    1
}
