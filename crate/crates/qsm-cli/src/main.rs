use clap::{Parser, Subcommand};
use std::path::PathBuf;

use qsm_cli::commands::{self, AnalyzeFormat};
use qsm_cli::{CliError, Engine, ExportKind};

#[derive(Parser)]
#[command(
    name = "qsm",
    version,
    about = "Quantum stochastic modeling: epsilon-machines, iMPS canonical forms, q-simulators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a machine file (or zoo spec) against the model invariants.
    Validate {
        /// Machine file path or zoo shorthand like renewal{8}.
        machine: String,
        /// Tolerance for the probabilistic checks.
        #[arg(long, default_value_t = qsm::machine::DEFAULT_VALIDATION_TOL)]
        tol: f64,
    },
    /// Full analysis: stationary state, spectral gap, Schmidt spectrum, and
    /// classical/quantum Rényi complexities.
    Analyze {
        machine: String,
        /// Rényi orders, comma separated.
        #[arg(long, value_delimiter = ',')]
        alpha: Vec<f64>,
        /// Emit the report as JSON.
        #[arg(long, conflicts_with = "csv")]
        json: bool,
        /// Emit the report as CSV.
        #[arg(long)]
        csv: bool,
        /// Relative eigenvalue cutoff defining the memory rank.
        #[arg(long, default_value_t = qsm::canonical::DEFAULT_RANK_CUTOFF)]
        rank_cutoff: f64,
        /// Fixed-point residual tolerance.
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Cross-check word probabilities: classical vs MPS vs brute-force oracle.
    Compare {
        machine: String,
        /// Compare all words up to this length.
        #[arg(long)]
        max_len: usize,
    },
    /// Emit a sampled symbol stream.
    Sample {
        machine: String,
        #[arg(long, value_enum)]
        engine: Engine,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        seed: u64,
        /// Also report the total-variation distance of the sliding-window
        /// empirical distribution at this word length.
        #[arg(long)]
        tv_len: Option<usize>,
    },
    /// Sweep a process family, one CSV row per parameter value.
    Sweep {
        #[arg(long)]
        family: String,
        #[arg(long)]
        n_min: usize,
        #[arg(long)]
        n_max: usize,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Optional SVG line chart of the memory curves.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Export canonical-form or q-simulator matrices as CSV blocks.
    Export {
        machine: String,
        #[arg(long, value_enum)]
        what: ExportKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = qsm::canonical::DEFAULT_RANK_CUTOFF)]
        rank_cutoff: f64,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Truncate the bond dimension and report the distortion.
    Truncate {
        machine: String,
        /// Number of Schmidt values to keep (1 <= chi < rank).
        #[arg(long)]
        chi: usize,
        /// Report total-variation distortion for word lengths up to this.
        #[arg(long, default_value_t = 6)]
        report_len: usize,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate { machine, tol } => commands::cmd_validate(&machine, tol),
        Command::Analyze { machine, alpha, json, csv, rank_cutoff, tol } => {
            let alphas = if alpha.is_empty() { commands::DEFAULT_ALPHAS.to_vec() } else { alpha };
            for &a in &alphas {
                if a < 0.0 {
                    return Err(CliError::usage(format!("Rényi order must be nonnegative: {a}")));
                }
            }
            let format = if json {
                AnalyzeFormat::Json
            } else if csv {
                AnalyzeFormat::Csv
            } else {
                AnalyzeFormat::Human
            };
            commands::cmd_analyze(&machine, &alphas, format, rank_cutoff, tol)
        }
        Command::Compare { machine, max_len } => commands::cmd_compare(&machine, max_len),
        Command::Sample { machine, engine, steps, seed, tv_len } => {
            commands::cmd_sample(&machine, engine, steps, seed, tv_len)
        }
        Command::Sweep { family, n_min, n_max, out, svg } => {
            commands::cmd_sweep(&family, n_min, n_max, &out, svg.as_ref())
        }
        Command::Export { machine, what, out, rank_cutoff, tol } => {
            commands::cmd_export(&machine, what, &out, rank_cutoff, tol)
        }
        Command::Truncate { machine, chi, report_len } => {
            commands::cmd_truncate(&machine, chi, report_len)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {}", err.message());
        std::process::exit(err.exit_code());
    }
}
