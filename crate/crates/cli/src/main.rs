//! `gcs`: dataset preparation, training, evaluation and inference for
//! generalized cylindrical shells.
//!
//! Exit status is 0 on success, 1 for invalid input and 2 for runtime
//! failures. With `--json` the result goes to stdout as JSON; logs and error
//! messages always go to stderr.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gcs_core::GcsError;

pub const BUNDLE_ENV: &str = "GCS_BUNDLE_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "gcs",
    version,
    about = "Forward and inverse design of generalized cylindrical shells"
)]
pub struct Cli {
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,

    /// Seed for every random choice; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// JSON file with training settings.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Model bundle directory.
    #[arg(long, global = true, env = BUNDLE_ENV, default_value = "bundle")]
    pub bundle: PathBuf,

    /// Material density table (`MATERIAL = g/cm3` lines).
    #[arg(long, global = true, value_name = "FILE")]
    pub densities: Option<PathBuf>,

    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    pub sequential: bool,

    #[command(subcommand)]
    pub command: Command,
}

/// Overrides applied on top of the config file.
#[derive(Debug, Args, Clone, Default)]
pub struct TrainArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset from the analytic ground truth.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long, default_value_t = 160)]
        raw_points: usize,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
    },
    /// Read a manifest, report rejected records and store the accepted ones.
    Ingest {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Threshold used for the post-filter counts in the report.
        #[arg(long, default_value_t = gcs_core::dataset::MIN_MATERIAL_COUNT)]
        min_count: usize,
    },
    /// Drop materials with too few records.
    Filter {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = gcs_core::dataset::MIN_MATERIAL_COUNT)]
        min_count: usize,
    },
    /// Fit the curve basis on the training split.
    PcaFit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the forward network and store it in the bundle directory.
    TrainForward {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Train inverse networks against the stored forward network.
    TrainInverse {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, required = true, value_delimiter = ',', num_args = 1..)]
        alpha: Vec<f64>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Repeated train/test runs with confidence intervals.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        /// Also evaluate an inverse network trained at this α.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        no_knn: bool,
        /// Score against the measured curves instead of their reconstructions.
        #[arg(long)]
        raw: bool,
        #[arg(long, value_name = "FILE")]
        csv: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Printable fraction of generated designs for several α.
    SweepAlpha {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        alphas: Option<Vec<f64>>,
        #[arg(long, value_name = "FILE")]
        csv: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Predict the force-displacement response of a design.
    Predict {
        #[arg(long)]
        design: PathBuf,
    },
    /// Generate a design for a target curve.
    Invert {
        #[arg(long)]
        curve: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
    },
    /// Export a design as binary STL.
    Mesh {
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        stl: PathBuf,
        #[arg(long, default_value_t = gcs_core::geometry::MESH_Z_SLICES)]
        z_slices: usize,
        #[arg(long, default_value_t = gcs_core::geometry::MESH_PHI_SAMPLES)]
        phi_samples: usize,
    },
    /// Check the fabrication constraints of a design.
    Printability {
        #[arg(long)]
        design: PathBuf,
    },
    /// Search for a shell that absorbs an impact below a force limit.
    OptimizeImpact {
        /// Impact requirement as JSON; the egg-drop case when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        /// Include every evaluated candidate in the output.
        #[arg(long)]
        candidates: bool,
    },
    /// Find a shell whose response mimics a measured material curve.
    Emulate {
        #[arg(long)]
        curve: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Allowed browser origin; `*` allows any. Repeatable.
        #[arg(long = "cors-origin")]
        cors_origins: Vec<String>,
    },
}

/// Failure with its exit status.
#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<GcsError> for Failure {
    fn from(e: GcsError) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
