//! Command-line entry point for smoothness-controlled dynamics modeling:
//! dataset generation, training, rollout, evaluation, and the verification
//! harnesses, all driven by strict JSON configs and a single seed.

mod bound_cmd;
mod error;
mod eval_cmd;
mod gen_data;
mod mesh_prep;
mod rollout_cmd;
mod sensitivity_cmd;
mod train_cmd;

mod io;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use error::CliError;

#[derive(Parser)]
#[command(
    name = "smoothdyn",
    version,
    about = "Smoothness-controlled dynamics on graphs and meshes",
    propagate_version = true
)]
struct Cli {
    /// Worker threads for parallel generation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset: grid-heat supervised pairs or mesh PDE
    /// trajectories.
    GenData {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on a generated dataset.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Roll a checkpoint forward from the opening frames of a trajectory.
    Rollout {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        init: PathBuf,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a prediction against truth and write metric files.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Comma-separated subset of nrmse, smape, re, mre, err_smooth.
        #[arg(long)]
        metrics: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep the exponential truncation order and record quotient-shift KL.
    Sensitivity {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify the approximation-error lower bound on the unit disk.
    Bound {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Manifold-check a mesh, rewire it, and write its operators.
    MeshPrep {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::GenData { config, out } => gen_data::run(config, out),
        Command::Train { config, data, out } => train_cmd::run(config, data, out),
        Command::Rollout { checkpoint, init, steps, out } => {
            rollout_cmd::run(checkpoint, init, *steps, out)
        }
        Command::Eval { pred, truth, metrics, out } => eval_cmd::run(pred, truth, metrics, out),
        Command::Sensitivity { config, out } => sensitivity_cmd::run(config, out),
        Command::Bound { config, out } => bound_cmd::run(config, out),
        Command::MeshPrep { input, out } => mesh_prep::run(input, out),
    }
}

fn main() {
    let cli = Cli::parse();
    let threads = cli.threads.unwrap_or_else(|| {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    });
    // Thread count only affects wall time: every parallel loop draws from
    // per-index seed streams.
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().ok();
    if let Err(e) = run(cli) {
        eprintln!("{}", e.to_json());
        std::process::exit(e.exit_code());
    }
}
