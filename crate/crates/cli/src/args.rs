use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ensel::LearningProbMode;

/// Entropy-gated ensemble selection for segmentation.
#[derive(Debug, Parser)]
#[command(name = "ensel", version)]
pub struct Cli {
    /// JSON file with default values for any flag (flags given on the
    /// command line take precedence).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with out-of-fold predictions and a manifest.
    Synth(SynthArgs),
    /// Validate a manifest and optionally assemble combined per-image stacks.
    Stack(StackArgs),
    /// Fit per-model entropy thresholds with CLPSO.
    Optimize(OptimizeArgs),
    /// Apply fitted thresholds to the test stacks of a manifest.
    Fuse(FuseArgs),
    /// Dice report of members, mean ensemble, gated ensemble and masks.
    Evaluate(EvaluateArgs),
    /// Exhaustive grid search over thresholds.
    Oracle(OracleArgs),
    /// Run CLPSO on the benchmark test functions.
    BenchClpso(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Predictor as NAME:ACCURACY:SHARPNESS[:BIAS]; repeat per model.
    /// [default: strong:0.9:3 medium:0.7:3 weak:0.55:3]
    #[arg(long = "model", value_name = "SPEC")]
    pub models: Vec<String>,
    /// Training images. [default: 20]
    #[arg(long)]
    pub train: Option<usize>,
    /// Test images. [default: 5]
    #[arg(long)]
    pub test: Option<usize>,
    /// [default: 32]
    #[arg(long)]
    pub height: Option<usize>,
    /// [default: 32]
    #[arg(long)]
    pub width: Option<usize>,
    /// [default: 2]
    #[arg(long)]
    pub classes: Option<usize>,
    /// [default: 5]
    #[arg(long)]
    pub folds: Option<usize>,
    /// Generated and printed when absent.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct StackArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Write one combined stack per training image plus a new manifest here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Population size. [default: 10]
    #[arg(long)]
    pub pop: Option<usize>,
    /// Iterations. [default: 500]
    #[arg(long)]
    pub iters: Option<usize>,
    /// Acceleration constant. [default: 1.49445]
    #[arg(long)]
    pub c: Option<f64>,
    /// Inertia at the first iteration. [default: 0.9]
    #[arg(long)]
    pub a0: Option<f64>,
    /// Inertia at the last iteration. [default: 0.4]
    #[arg(long)]
    pub a1: Option<f64>,
    /// Stagnation iterations before an exemplar is reassigned. [default: 7]
    #[arg(long)]
    pub refresh_gap: Option<usize>,
    /// Velocity limit as a fraction of the box width. [default: 0.2]
    #[arg(long)]
    pub vmax_frac: Option<f64>,
    /// Learning probability schedule. [default: ramped]
    #[arg(long, value_parser = parse_mode)]
    pub pc_mode: Option<LearningProbMode>,
    /// Use the product-form inertia formula.
    #[arg(long)]
    pub inertia_literal: bool,
    /// Generated and printed when absent.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Threshold document. [default: thresholds.json]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-iteration convergence trace (CSV).
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub thresholds: PathBuf,
    /// Directory for predicted masks, one `<id>.pgm` per test image.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Threshold document; adds the gated-ensemble row.
    #[arg(long)]
    pub thresholds: Option<PathBuf>,
    /// Directory of predicted `<id>.pgm` masks to score.
    #[arg(long)]
    pub masks: Option<PathBuf>,
    /// Score the out-of-fold training matrix instead of the test images.
    #[arg(long)]
    pub train: bool,
    /// Also write the report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Grid spacing in nats. [default: 0.0693]
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated subset of sphere,rastrigin,rosenbrock,ackley,griewank.
    /// [default: all]
    #[arg(long, value_delimiter = ',')]
    pub functions: Vec<String>,
    /// [default: 10]
    #[arg(long)]
    pub dim: Option<usize>,
    /// Independent runs per function. [default: 10]
    #[arg(long)]
    pub runs: Option<usize>,
    /// [default: 10]
    #[arg(long)]
    pub pop: Option<usize>,
    /// [default: 499]
    #[arg(long)]
    pub iters: Option<usize>,
    /// [default: ramped]
    #[arg(long, value_parser = parse_mode)]
    pub pc_mode: Option<LearningProbMode>,
    /// Generated and printed when absent.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write `<function>-<run>.csv` traces here.
    #[arg(long)]
    pub trace_dir: Option<PathBuf>,
    /// Summary JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<LearningProbMode, String> {
    s.parse()
}
