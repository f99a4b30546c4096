//! Command-line front end for `polygmdh`: feature extraction, training,
//! prediction, rule rendering and fixture synthesis.

pub mod commands;
pub mod error;
pub mod pipeline;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "polygmdh", version, about = "Self-organizing polynomial networks for binary classification")]
pub struct Cli {
    /// Base seed for every random choice.
    #[arg(long, global = true, env = "POLYGMDH_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[arg(long, global = true, default_value = "warn")]
    pub log_level: log::LevelFilter,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Band-power features from a raw multichannel signal CSV.
    Features(FeaturesArgs),
    /// Train a model on a labeled feature CSV.
    Train(TrainArgs),
    /// Score and classify every row of a feature CSV.
    Predict(PredictArgs),
    /// Print a polynomial model as explicit rules.
    Rules(RulesArgs),
    /// Write deterministic synthetic fixtures.
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WindowArg {
    Hann,
    Rectangular,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    /// Signal CSV: header of channel names, one column per channel.
    pub input: PathBuf,
    /// Sampling rate in Hz.
    #[arg(long)]
    pub rate: f64,
    /// Preset (`alzheimer4`, `risk6`) or `name:lo-hi,...`.
    #[arg(long, default_value = "alzheimer4")]
    pub bands: String,
    /// Segment length in seconds.
    #[arg(long, default_value_t = 2.0)]
    pub window: f64,
    /// Segment step in seconds; defaults to the window length.
    #[arg(long)]
    pub hop: Option<f64>,
    #[arg(long, value_enum, default_value = "hann")]
    pub window_fn: WindowArg,
    /// Subtract each segment's mean before the transform.
    #[arg(long)]
    pub remove_mean: bool,
    /// Output CSV (standard output when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Gmdh,
    Chain,
    Fnn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitterArg {
    Lsm,
    Proj,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    Exterior,
    Training,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labeled feature CSV.
    pub input: PathBuf,
    #[arg(long, default_value = "label")]
    pub label: String,
    #[arg(long, value_enum, default_value = "gmdh")]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value = "proj")]
    pub fitter: FitterArg,
    /// Survivors kept per layer.
    #[arg(long = "F", visible_alias = "width", default_value_t = 40)]
    pub width: usize,
    #[arg(long, default_value_t = 10)]
    pub max_layers: usize,
    /// Projection learning rate, in (1, 2].
    #[arg(long, default_value_t = 1.9)]
    pub chi: f64,
    /// Minimal decrement of the examining error.
    #[arg(long, default_value_t = 0.0015)]
    pub delta: f64,
    /// Noise-level goal; replaces the decrement rule when given.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub max_steps: usize,
    /// Share of rows used for fitting; the rest rank candidates.
    #[arg(long, default_value_t = 0.5)]
    pub split: f64,
    /// Keep principal components up to this share of variance.
    #[arg(long)]
    pub pca: Option<f64>,
    #[arg(long, value_enum, default_value = "exterior")]
    pub criterion: CriterionArg,
    /// Hidden units of the feed-forward network.
    #[arg(long, default_value_t = 2)]
    pub hidden: usize,
    #[arg(long, default_value_t = 100)]
    pub restarts: usize,
    #[arg(long, default_value_t = 500)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    /// Display names for classes 0 and 1, comma-separated.
    #[arg(long)]
    pub class_names: Option<String>,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Held-out labeled CSV for the Test row of the report.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Write the learning trace as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Feature CSV, with or without a label column.
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, default_value = "label")]
    pub label: String,
    /// Output CSV (standard output when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RulesArgs {
    pub model: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// Two-class multichannel recordings plus their band-power features.
    Eeg(SynthEegArgs),
    /// Labels from a random polynomial cascade, with the cascade itself.
    Poly(SynthPolyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseArg {
    None,
    Gaussian,
    Lognormal,
}

#[derive(Debug, Args)]
pub struct SynthEegArgs {
    #[arg(long, default_value_t = 19)]
    pub channels: usize,
    #[arg(long, default_value_t = 128.0)]
    pub rate: f64,
    /// Seconds per recording.
    #[arg(long, default_value_t = 8.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 10)]
    pub per_class: usize,
    #[arg(long, value_enum, default_value = "none")]
    pub noise: NoiseArg,
    #[arg(long, default_value_t = 0.0)]
    pub noise_scale: f64,
    /// Spread of per-recording amplitudes around the class profile.
    #[arg(long, default_value_t = 0.3)]
    pub overlap: f64,
    /// Segment length in seconds for the feature table.
    #[arg(long, default_value_t = 2.0)]
    pub window: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthPolyArgs {
    /// Layers in the generating cascade.
    #[arg(long, default_value_t = 1)]
    pub depth: usize,
    /// Feature count.
    #[arg(long, default_value_t = 5)]
    pub m: usize,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Rows in a held-out `test.csv`; 0 skips it.
    #[arg(long, default_value_t = 0)]
    pub test_n: usize,
    /// Standard deviation of noise added before thresholding.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Runs one parsed command; reports go to `out`, notes to `err`.
pub fn run(cli: &Cli, out: &mut dyn std::io::Write, err: &mut dyn std::io::Write) -> CliResult<()> {
    match &cli.command {
        Command::Features(a) => commands::features(a, out),
        Command::Train(a) => commands::train(a, cli.seed, out),
        Command::Predict(a) => commands::predict(a, out, err),
        Command::Rules(a) => commands::rules(a, out),
        Command::Synth(SynthCommand::Eeg(a)) => commands::synth_eeg(a, cli.seed, out),
        Command::Synth(SynthCommand::Poly(a)) => commands::synth_poly(a, cli.seed, out),
    }
}
