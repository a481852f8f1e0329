//! Command-line front end for the `gdr-ae` experiments.
//!
//! Every subcommand validates its flags before doing any work and writes its
//! outputs through temporary files, so a failed run leaves no partial CSV or
//! model behind.

mod commands;
mod plot;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use commands::run;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] gdr_ae::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) | CliError::Io { .. } => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "gdr-ae",
    version,
    about = "Train and evaluate m-hot autoencoder links over AWGN"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write it with its per-epoch loss (loss.csv).
    Train(TrainArgs),
    /// Monte Carlo block error rate of a trained model (bler.csv).
    Bler(BlerArgs),
    /// Capacity over an Eb/N0 grid (capacity.csv); no randomness involved.
    Capacity(CapacityArgs),
    /// Train one model per trained Eb/N0 and compare loss curves.
    SnrStudy(SnrStudyArgs),
    /// Print the trainable parameter count of each layer group.
    Params(ParamsArgs),
    /// Normal and log-normal moments of the receiver's linear stage (moments.csv).
    SnrMoments(MomentsArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CodecArgs {
    /// Vector size M.
    #[arg(short = 'M', long = "vector-size", default_value_t = 8)]
    pub vector_size: usize,
    /// Order m: number of active positions, 1 <= m <= floor(M/2).
    #[arg(short = 'm', long = "order", default_value_t = 1)]
    pub order: usize,
    /// Channel uses n per message.
    #[arg(short = 'n', long = "channel-uses", default_value_t = 7)]
    pub channel_uses: usize,
}

#[derive(Debug, Clone, Args)]
pub struct TrainingArgs {
    /// Training epochs.
    #[arg(long, default_value_t = 150)]
    pub epochs: usize,
    /// Mini-batch size.
    #[arg(long, default_value_t = 45)]
    pub batch_size: usize,
    /// Number of training messages.
    #[arg(long, default_value_t = 20_000)]
    pub train_samples: usize,
    /// Adam learning rate.
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    /// Seed for initialization, data, shuffling and noise.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Rescale each transmitted block to energy n after normalization.
    #[arg(long)]
    pub strict_power: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// First Eb/N0 grid point in dB.
    #[arg(long = "ebn0-min", default_value_t = -4.0, allow_negative_numbers = true)]
    pub min: f64,
    /// Last Eb/N0 grid point in dB (inclusive).
    #[arg(
        long = "ebn0-max",
        default_value_t = 8.0,
        allow_negative_numbers = true
    )]
    pub max: f64,
    /// Grid step in dB.
    #[arg(long = "ebn0-step", default_value_t = 1.0)]
    pub step: f64,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub codec: CodecArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
    /// Eb/N0 in dB at which training noise is drawn.
    #[arg(
        long = "trained-ebn0-db",
        default_value_t = 0.0,
        allow_negative_numbers = true
    )]
    pub trained_ebn0_db: f64,
    /// Model file to write [default: <out-dir>/model.txt].
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Directory for loss.csv and its plot script.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct BlerArgs {
    /// Trained model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Expected vector size; must match the model when given.
    #[arg(short = 'M', long = "vector-size")]
    pub vector_size: Option<usize>,
    /// Order m [default: the order the model was trained with].
    #[arg(short = 'm', long = "order")]
    pub order: Option<usize>,
    /// Expected channel uses; must match the model when given.
    #[arg(short = 'n', long = "channel-uses")]
    pub channel_uses: Option<usize>,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Blocks simulated per grid point (the full test set is 1000000).
    #[arg(long, default_value_t = 100_000)]
    pub blocks: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Use this noise variance at every point instead of the Eb/N0 one.
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Worker threads; output does not depend on this.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CapacityArgs {
    #[command(flatten)]
    pub codec: CodecArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SnrStudyArgs {
    #[command(flatten)]
    pub codec: CodecArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
    /// Trained Eb/N0 in dB; repeat for each study point.
    #[arg(
        long = "trained-ebn0-db",
        required = true,
        allow_negative_numbers = true
    )]
    pub trained_ebn0_db: Vec<f64>,
    /// Models trained concurrently; output does not depend on this.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ParamsArgs {
    #[arg(short = 'M', long = "vector-size", default_value_t = 8)]
    pub vector_size: usize,
    #[arg(short = 'n', long = "channel-uses", default_value_t = 7)]
    pub channel_uses: usize,
}

#[derive(Debug, Clone, Args)]
pub struct MomentsArgs {
    /// Take the receiver map from this model's first receiver layer.
    #[arg(
        long,
        conflicts_with = "identity_map",
        required_unless_present = "identity_map"
    )]
    pub model: Option<PathBuf>,
    /// Use the n×n identity as receiver map.
    #[arg(long)]
    pub identity_map: bool,
    /// Dimension n of the identity map.
    #[arg(short = 'n', long = "channel-uses", default_value_t = 7)]
    pub channel_uses: usize,
    /// Transmitted vector, comma separated; a single value is repeated n times.
    #[arg(
        long,
        value_delimiter = ',',
        required = true,
        allow_negative_numbers = true
    )]
    pub x: Vec<f64>,
    /// Per-dimension noise variance.
    #[arg(long)]
    pub sigma2: f64,
    /// Monte Carlo draws.
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}
