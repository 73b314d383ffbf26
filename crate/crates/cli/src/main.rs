use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use locc_usd::linalg::DEFAULT_TOL_RANK;
use locc_usd::search::SearchConfig;
use locc_usd_cli::{run_path, write_atomic, CliError, Command, Options, Report};

/// Unambiguous discrimination of multipartite states by local operations.
#[derive(Debug, Parser)]
#[command(name = "locc-usd", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    #[command(flatten)]
    global: Global,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Decide, per state, whether it can be identified unambiguously by local measurements.
    Check { instance: PathBuf },
    /// Build the global and the local measurements and verify them on the ensemble.
    Povm { instance: PathBuf },
    /// Build and validate entanglement witnesses for the conclusive subspaces.
    Witness { instance: PathBuf },
    /// Run the local protocol by Monte Carlo and compare with the predicted rates.
    Simulate { instance: PathBuf },
    /// Reciprocal states of a basis of pure states and whether they are products.
    Reciprocal { instance: PathBuf },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Debug, Args)]
struct Global {
    /// Singular values below this fraction of the largest count as zero.
    #[arg(long, global = true, default_value_t = DEFAULT_TOL_RANK)]
    tol_rank: f64,
    /// A vector belongs to a subspace when its projection has weight ≥ 1 − tol.
    #[arg(long, global = true, default_value_t = SearchConfig::default().tol_product)]
    tol_product: f64,
    /// Overlaps below this count as zero.
    #[arg(long, global = true, default_value_t = SearchConfig::default().tol_detect)]
    tol_detect: f64,
    /// Random restarts of the product search.
    #[arg(long, global = true, default_value_t = SearchConfig::default().restarts)]
    restarts: usize,
    /// Iteration cap of each product search run.
    #[arg(long, global = true, default_value_t = SearchConfig::default().max_iters)]
    max_iters: usize,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Simulated rounds.
    #[arg(long, global = true, default_value_t = 100_000)]
    trials: u64,
    /// Random product states used to validate each witness.
    #[arg(long, global = true, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report here (atomically) instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

impl Global {
    fn options(&self) -> Options {
        Options {
            search: SearchConfig {
                restarts: self.restarts,
                max_iters: self.max_iters,
                tol_product: self.tol_product,
                tol_detect: self.tol_detect,
                seed: self.seed,
                ..SearchConfig::default()
            },
            tol_rank: self.tol_rank,
            trials: self.trials,
            samples: self.samples,
        }
    }
}

fn emit(report: &Report, g: &Global) -> Result<(), CliError> {
    let text = match g.format {
        Format::Json => report.to_json(),
        Format::Text => report.to_text(),
    };
    match &g.out {
        Some(path) => write_atomic(path, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, path) = match &cli.command {
        Sub::Check { instance } => (Command::Check, instance),
        Sub::Povm { instance } => (Command::Povm, instance),
        Sub::Witness { instance } => (Command::Witness, instance),
        Sub::Simulate { instance } => (Command::Simulate, instance),
        Sub::Reciprocal { instance } => (Command::Reciprocal, instance),
    };
    let outcome = run_path(command, path, &cli.global.options())
        .and_then(|report| emit(&report, &cli.global).map(|()| report.exit_code));
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("locc-usd {}: {e}", command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
