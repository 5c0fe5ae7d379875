//! Command-line interface for the CT artifact reduction toolkit.
//!
//! Exit codes: 0 success, 2 validation errors, 3 I/O or corrupt-file
//! errors, 4 numeric failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tomoclean_core::pipeline::{
    cmd_bench, cmd_evaluate, cmd_gridsearch, cmd_infer, cmd_phantom, cmd_simulate, cmd_train,
    ExperimentConfig, TrainMode,
};

#[derive(Parser)]
#[command(
    name = "tomoclean",
    about = "Simulate, degrade, and clean parallel-beam CT data with classical \
             baselines and a multi-stage learned pipeline",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the train and test foam phantoms.
    Phantom {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate clean dense scans and degraded sparse scans.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Directory produced by `phantom`.
        #[arg(long)]
        phantoms: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the multi-stage model or the post-processing baseline.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Directory produced by `simulate`.
        #[arg(long)]
        data: PathBuf,
        /// multistage | postprocess
        #[arg(long)]
        mode: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run inference and persist all stage artifacts plus previews.
    Infer {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Object name inside the data directory (train or test).
        #[arg(long, default_value = "test")]
        object: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a result volume against a reference volume.
    Evaluate {
        /// Path to the result volume (.raw).
        #[arg(long)]
        result: PathBuf,
        /// Path to the reference volume (.raw).
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a grid of classical-chain parameters by MSE.
    Gridsearch {
        #[arg(long)]
        config: PathBuf,
        /// JSON file with the candidate parameters and target domain.
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit the per-stage inference timing table.
    Bench {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "test")]
        object: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> tomoclean_core::Result<()> {
    match cli.command {
        Command::Phantom { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            cmd_phantom(&cfg, &out)
        }
        Command::Simulate {
            config,
            phantoms,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            cmd_simulate(&cfg, &phantoms, &out)
        }
        Command::Train {
            config,
            data,
            mode,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let mode: TrainMode = mode.parse()?;
            cmd_train(&cfg, &data, mode, &out)
        }
        Command::Infer {
            model,
            data,
            object,
            out,
        } => cmd_infer(&model, &data, &object, &out),
        Command::Evaluate {
            result,
            reference,
            out,
        } => cmd_evaluate(&result, &reference, &out),
        Command::Gridsearch {
            config,
            grid,
            data,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            cmd_gridsearch(&cfg, &grid, &data, &out)
        }
        Command::Bench {
            model,
            data,
            object,
            out,
        } => cmd_bench(&model, &data, &object, &out),
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
