//! Command-line surface for reproducible selection experiments: ensemble
//! generation, sampler runs, metric evaluation, certificate checks,
//! benchmark sweeps, and the image sampling demo.
//!
//! Exit codes: 0 success, 2 validation error, 3 resource guard,
//! 4 numerical failure.

use clap::{Parser, Subcommand};

mod commands;

#[derive(Parser)]
#[command(name = "kronsampler", version, about = "Sampling-set selection and least-squares reconstruction for Kronecker-structured linear models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate ensemble factor matrices as CSV files.
    Gen(commands::gen::GenArgs),
    /// Run a sampler over factor matrices and write the selection as JSON.
    Select(commands::select::SelectArgs),
    /// Evaluate frame potential and/or estimator MSE of a selection.
    Eval(commands::eval::EvalArgs),
    /// Check a near-optimality certificate against an oracle.
    Bound(commands::bound::BoundArgs),
    /// Sweep algorithms x budgets x trials and write benchmark CSVs.
    Bench(commands::bench::BenchArgs),
    /// Sample an image on a selected row/column grid and reconstruct it.
    Image(commands::image::ImageArgs),
}

fn main() {
    if let Err(message) = configure_threads() {
        eprintln!("error: {message}");
        std::process::exit(2);
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(args) => commands::gen::run(args),
        Command::Select(args) => commands::select::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Bound(args) => commands::bound::run(args),
        Command::Bench(args) => commands::bench::run(args),
        Command::Image(args) => commands::image::run(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}

/// Caps the worker pool at $KRONSAMPLER_THREADS when set.
fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("KRONSAMPLER_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| format!("KRONSAMPLER_THREADS must be a positive integer, got '{raw}'"))?;
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| format!("could not configure {threads} worker threads: {e}"))?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}
