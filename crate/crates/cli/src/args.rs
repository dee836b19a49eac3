use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "stablecf",
    version,
    about = "Inference in linear models of stable random variables"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Model file (JSON).
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,

    /// Output path; stdout when omitted. A directory for `synth`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true)]
    pub tol: Option<f64>,

    #[arg(long, global = true)]
    pub max_iter: Option<usize>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Machine-readable output. Each command has its own default.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Accepted for compatibility; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Weighting {
    #[default]
    ScalePower,
    PlainScale,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum ShiftRule {
    #[default]
    Consistent,
    Printed,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Method {
    #[default]
    Jacobi,
    Exact,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Push x-side parameters through A (and the noise, if any).
    Forward {
        #[arg(long, value_enum, default_value_t)]
        skew_weighting: Weighting,
    },
    /// Exact posterior marginals of a y-side model.
    Posterior,
    /// Iterative posterior marginals.
    Jacobi {
        /// Write the per-sweep residuals here as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        damping: f64,
        #[arg(long, value_enum, default_value_t)]
        shift_update: ShiftRule,
    },
    /// Exact marginals by message passing on a tree-shaped model.
    Tree {
        #[arg(long, default_value_t = 0)]
        root: usize,
    },
    /// Spectral convergence diagnostics.
    Check,
    /// Density of one stable law on a uniform grid.
    Pdf {
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, allow_hyphen_values = true)]
        beta: f64,
        #[arg(long, allow_hyphen_values = true)]
        gamma: f64,
        #[arg(long, allow_hyphen_values = true)]
        delta: f64,
        #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], allow_hyphen_values = true)]
        range: Vec<f64>,
        #[arg(long, default_value_t = 1024)]
        n: usize,
    },
    /// Characteristic-function oracles. With --model, slices a 2-variable
    /// x-side model; otherwise checks the sum of --p1 and --p2.
    Oracle {
        /// alpha,beta,gamma,delta
        #[arg(long, allow_hyphen_values = true)]
        p1: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        p2: Option<String>,
    },
    /// Generate a synthetic flow network into the --out directory.
    Synth {
        #[arg(long, default_value_t = 376)]
        n: usize,
        #[arg(long, default_value_t = 0.02)]
        rho: f64,
    },
    /// Infer hidden flow parameters from observed ones.
    FlowReport {
        #[arg(long)]
        flows: PathBuf,
        #[arg(long)]
        topology: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        method: Method,
    },
}
