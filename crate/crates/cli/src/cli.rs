use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use hiseq::perturb::PerturbMode;

#[derive(Debug, Parser)]
#[command(
    name = "hiseq",
    version,
    about = "Synthesize, sample, validate and score manipulation mask sequences"
)]
pub struct Cli {
    /// Seed driving every random choice of the subcommand.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Suppress progress and summary messages on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic copy-move composites with manipulation trees.
    Synth(SynthArgs),
    /// Reverse-sample ground-truth mask sequences from every tree.
    Sample(SampleArgs),
    /// Turn a one-shot binary mask into a two-step sequence.
    Decompose(DecomposeArgs),
    /// Check containment, EOS placement and paths of a dataset.
    Validate(ValidateArgs),
    /// Score predicted sequences against ground-truth path sets.
    Score(ScoreArgs),
    /// Compare the alignment DP against exhaustive enumeration.
    OracleCheck(OracleArgs),
    /// Apply a deterministic perturbation to a sequence dataset.
    Perturb(PerturbArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    #[arg(long, default_value_t = 2)]
    pub nodes_min: usize,
    #[arg(long, default_value_t = 6)]
    pub nodes_max: usize,
    #[arg(long, default_value_t = 0.5)]
    pub nest_prob: f64,
    #[arg(long, default_value_t = 4)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 0.05)]
    pub area_min: f64,
    #[arg(long, default_value_t = 0.40)]
    pub area_max: f64,
    /// Directory of P6 base images (cycled in name order) instead of textures.
    #[arg(long)]
    pub base_images: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub paths: usize,
    /// Radius of the boundary targets; 0 writes none.
    #[arg(long, default_value_t = 1)]
    pub boundary_radius: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[arg(long)]
    pub mask: PathBuf,
    /// Sample id; defaults to the mask file stem.
    #[arg(long)]
    pub id: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub boundary_radius: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Prediction dataset; each sample's first sequence is the prediction.
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// Which ground-truth path set to score against.
    #[arg(long, default_value_t = 0)]
    pub path_set: usize,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 6)]
    pub max_steps: usize,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    #[arg(long)]
    pub pred_in: PathBuf,
    /// drop-last-step, duplicate-step, dilate-masks, erode-masks or relabel-fraction.
    #[arg(long, value_parser = parse_mode)]
    pub mode: PerturbMode,
    #[arg(long, default_value_t = 1.0)]
    pub magnitude: f64,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_mode(s: &str) -> Result<PerturbMode, String> {
    s.parse().map_err(|e: hiseq::Error| e.to_string())
}
