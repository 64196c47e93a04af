use std::path::PathBuf;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "wow",
    version,
    about = "Optimal transport between laws of random measures"
)]
pub struct Cli {
    /// Master seed for all randomness; falls back to WOW_SEED, then to the
    /// seed of an input spec, then to 0.
    #[arg(long, global = true, env = "WOW_SEED")]
    pub seed: Option<u64>,

    /// Size of the worker pool; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Tolerance override for the checks of the command.
    #[arg(long, global = true)]
    pub tol: Option<f64>,

    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal transport between two measure files.
    Ot {
        mu: PathBuf,
        nu: PathBuf,
        /// Export the optimal plan as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Nested transport between two law files.
    Nested {
        m: PathBuf,
        n: PathBuf,
        /// Comma-separated times at which the geodesic identity is checked.
        #[arg(long, value_delimiter = ',')]
        geodesic_ts: Option<Vec<f64>>,
        /// Extract the strict Monge field from the optimal random coupling.
        #[arg(long)]
        extract_monge: bool,
        /// Export the outer coupling as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Sample a law of Gaussian-generated random measures and diagnose it.
    Lggrm {
        spec: PathBuf,
        #[arg(long, default_value_t = 16)]
        samples: usize,
        /// Monte Carlo draws per shell of the Berman estimate.
        #[arg(long, default_value_t = 1000)]
        berman_samples: usize,
        /// Decreasing radii of the atomlessness diagnostic.
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.01,0.001")]
        eps: Vec<f64>,
        /// Also write the sampled law to this file.
        #[arg(long)]
        law_out: Option<PathBuf>,
        /// Export the sampled atoms as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run a randomized property suite.
    Verify {
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 100)]
        cases: usize,
        /// Export per-invariant counts as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}
