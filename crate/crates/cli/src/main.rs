mod args;
mod commands;
mod exit;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use args::{EncoderSpec, FrameRate, Resolution};

/// All-intra two-pass rate control: complexity analysis, bit estimation,
/// QP assignment and evaluation.
#[derive(Debug, Parser)]
#[command(name = "intrarc", version)]
struct Cli {
    /// Worker threads for analysis and training (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract per-frame DCT-energy features from a Y4M or raw YUV file.
    Analyze(AnalyzeArgs),
    /// Fit a random-forest bits estimator on a training CSV.
    Train(TrainArgs),
    /// Predict frame sizes at one QP from a features CSV.
    Predict(PredictArgs),
    /// Run the second pass against an encoder back end.
    Rc(RcArgs),
    /// Bjøntegaard-delta rate between two RD curves.
    Bdrate(BdrateArgs),
    /// Write a synthetic training CSV labelled by the simulated encoder.
    GenData(GenDataArgs),
    /// Write a synthetic scene-structured features CSV.
    GenFeatures(GenFeaturesArgs),
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Read the input as headerless planar YUV of this size.
    #[arg(long, value_name = "WIDTHxHEIGHT")]
    pub raw_geometry: Option<Resolution>,
    /// Bit depth of raw input.
    #[arg(long, default_value_t = 8)]
    pub bit_depth: u8,
    /// Chroma layout of raw input: 420 or 400.
    #[arg(long, default_value = "420")]
    pub chroma: String,
    /// Frame rate of raw input.
    #[arg(long, default_value = "30")]
    pub fps: FrameRate,
    #[arg(long, default_value_t = 32)]
    pub block_size: usize,
    #[arg(long, default_value_t = 16)]
    pub chroma_block_size: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    #[arg(long, default_value_t = 12)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 1)]
    pub min_samples_leaf: usize,
    #[arg(long, default_value_t = 2)]
    pub min_samples_split: usize,
    #[arg(long, default_value_t = 7)]
    pub max_features: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fraction of rows held out for scoring.
    #[arg(long)]
    pub holdout: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, default_value_t = 32)]
    pub qp: i32,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FirstPass {
    Model,
    Noise,
}

#[derive(Debug, Args)]
pub struct RcArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FirstPass::Model)]
    pub first_pass: FirstPass,
    /// Seed of the noise first pass.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Target bits per second.
    #[arg(long)]
    pub bitrate: f64,
    #[arg(long, default_value = "30")]
    pub fps: FrameRate,
    #[arg(long, value_name = "WIDTHxHEIGHT")]
    pub resolution: Resolution,
    /// `sim` or `log:<csv with frame_index,q,bits>`.
    #[arg(long, default_value = "sim")]
    pub encoder: EncoderSpec,
    /// Log-domain noise of the simulated encoder.
    #[arg(long, default_value_t = 0.0)]
    pub sim_noise: f64,
    #[arg(long, default_value_t = 0)]
    pub sim_seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub c_low: f64,
    #[arg(long, default_value_t = 0.5)]
    pub deficit_gain: f64,
    #[arg(long, default_value_t = 32)]
    pub first_pass_qp: i32,
    #[arg(long, default_value_t = 0)]
    pub qp_min: i32,
    #[arg(long, default_value_t = 63)]
    pub qp_max: i32,
    #[arg(long)]
    pub trace: PathBuf,
    /// Summary JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BdrateArgs {
    #[arg(long)]
    pub anchor: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value = "1920x1080", value_name = "WIDTHxHEIGHT")]
    pub resolution: Resolution,
    /// Log-domain noise of the simulated encoder.
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenFeaturesArgs {
    #[arg(long, default_value_t = 300)]
    pub frames: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot size the worker pool: {e}");
            return ExitCode::from(exit::USAGE as u8);
        }
    }
    let result = match cli.command {
        Command::Analyze(a) => commands::analyze(a),
        Command::Train(a) => commands::train(a),
        Command::Predict(a) => commands::predict(a),
        Command::Rc(a) => commands::rc(a),
        Command::Bdrate(a) => commands::bdrate(a),
        Command::GenData(a) => commands::gen_data(a),
        Command::GenFeatures(a) => commands::gen_features(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::code_for(&e) as u8)
        }
    }
}
