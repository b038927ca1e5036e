mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Generate, sample, learn and evaluate random sparse deep threshold networks.
#[derive(Debug, Parser)]
#[command(name = "sparsenet", version)]
pub struct Cli {
    /// Experiment config: `key = value` lines, `#` comments.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "SPARSENET_THREADS", default_value_t = 0)]
    pub threads: usize,
    /// Output path; `-` is stdout.
    #[arg(long, global = true, default_value = "-")]
    pub out: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a net (to --out) and optionally samples from it.
    Generate {
        /// Number of samples to draw.
        #[arg(long, default_value_t = 0)]
        samples: usize,
        #[arg(long)]
        samples_out: Option<PathBuf>,
        /// Include hidden layers in sample lines.
        #[arg(long)]
        hidden: bool,
    },
    /// Learn a net from samples; writes a JSON run report to --out.
    Learn {
        /// Ground-truth net to draw samples from and score against.
        #[arg(long, conflicts_with = "samples")]
        net: Option<PathBuf>,
        /// Sample file (one sample per line, observed layer last).
        #[arg(long)]
        samples: Option<PathBuf>,
        /// Where to write the learned net.
        #[arg(long)]
        net_out: Option<PathBuf>,
    },
    /// Compare a learned net with the truth; JSON metrics to --out.
    Evaluate {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        learned: PathBuf,
        /// Samples per net for the distance proxy.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        /// Denoising trials per net.
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// Sweep over n, d, rho and seeds from the config; CSV to --out.
    Bench,
    /// Random-graph property reports for one layer; JSON to --out.
    CheckProps {
        #[arg(long)]
        net: PathBuf,
        /// Layer index, 0 being the bottom.
        #[arg(long, default_value_t = 0)]
        layer: usize,
    },
    /// Gadgets, certificates and adversary disagreement for a 2-layer net.
    Separation {
        /// Net file; otherwise generated from the config.
        #[arg(long)]
        net: Option<PathBuf>,
        #[arg(long, default_value_t = 100_000)]
        train_samples: usize,
        #[arg(long, default_value_t = 100_000)]
        eval_samples: usize,
        #[arg(long, default_value_t = 20)]
        epochs: usize,
        /// Gadget outputs given an adversary.
        #[arg(long, default_value_t = 200)]
        max_outputs: usize,
        /// Gadgets and certificates listed in the report.
        #[arg(long, default_value_t = 20)]
        list: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
