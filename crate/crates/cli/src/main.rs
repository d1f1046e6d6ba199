//! `multinex`: batch enhancement, training, descriptor analysis and evaluation.

mod commands;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "multinex", version, about = "Multi-prior Retinex low-light enhancement")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Enhance one image or every image in a directory.
    Enhance(EnhanceArgs),
    /// Train a variant on a paired `low/` + `high/` dataset.
    Train(TrainArgs),
    /// Write each guidance descriptor as a grayscale PNG.
    Stacks(StacksArgs),
    /// Descriptor analyses.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// PSNR, SSIM and MS-SSIM of predictions against references.
    Eval(EvalArgs),
    /// Per-layer parameter table, total and GFLOPs.
    Params(ParamsArgs),
    /// Write a synthetic paired dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct EnhanceArgs {
    /// Image file or directory of images.
    #[arg(long)]
    pub input: PathBuf,
    /// Output file for a single input, output directory otherwise.
    #[arg(long)]
    pub output: PathBuf,
    /// Checkpoint; without it the seeded initialization is used.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value = "lightweight")]
    pub variant: String,
    /// Also write `<stem>_delta_l.png` and `<stem>_delta_r.png`.
    #[arg(long)]
    pub dump_deltas: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Overrides the config file; `lightweight` when neither sets it.
    #[arg(long)]
    pub variant: Option<String>,
    /// Flat JSON with training keys and optionally `variant`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub patch: Option<usize>,
    #[arg(long)]
    pub lr_start: Option<f64>,
    #[arg(long)]
    pub lr_end: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub log_every: Option<usize>,
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    /// Disable random crops, flips and rotations.
    #[arg(long)]
    pub no_augment: bool,
    /// Start from this checkpoint instead of the seeded initialization.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StackChoice {
    Luminance,
    Reflectance,
    Both,
    Extended,
    All,
    LuminancePool,
    ChromaPool,
}

#[derive(Debug, Args)]
pub struct StacksArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    pub stack: StackChoice,
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// Leave-one-out descriptor importance.
    Dia(DiaArgs),
    /// Linear reconstruction of a target from a stack's principal components.
    Lra(LraArgs),
    /// Pearson correlation between descriptor magnitude maps.
    Corr(CorrArgs),
}

#[derive(Debug, Args)]
pub struct DiaArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Directory for `importance.csv` and the per-descriptor maps.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "luminance-pool")]
    pub pool: StackChoice,
}

#[derive(Debug, Args)]
pub struct LraArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "luminance")]
    pub stack: StackChoice,
    /// `rgb`, `luma`, `self` or the path of a target image.
    #[arg(long, default_value = "rgb")]
    pub target: String,
    /// Principal components kept.
    #[arg(long, default_value_t = multinex::analysis::lra::DEFAULT_COMPONENTS)]
    pub d: usize,
    #[arg(long, default_value_t = multinex::analysis::lra::DEFAULT_LAMBDA)]
    pub lambda: f64,
    /// Reconstruction PNG; targets other than 1 or 3 channels are tiled horizontally.
    #[arg(long)]
    pub output: PathBuf,
    /// JSON fit report; defaults to the output path with a `.json` extension.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorrArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    pub stack: StackChoice,
    /// CSV path; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Prediction image or directory.
    #[arg(long)]
    pub pred: PathBuf,
    /// Reference image or directory with matching file names.
    #[arg(long)]
    pub gt: PathBuf,
    /// Add GT-Mean rescaled columns.
    #[arg(long)]
    pub gt_mean: bool,
    /// CSV path; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ParamsArgs {
    #[arg(long, default_value = "lightweight")]
    pub variant: String,
    /// `WIDTHxHEIGHT` for the GFLOPs count.
    #[arg(long, default_value = "600x400")]
    pub resolution: String,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub count: usize,
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Gaussian noise standard deviation on the dark images.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
}

/// Why a command failed; selects the exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags or unreadable paths: exit 2.
    Usage(String),
    /// Rejected data or configuration: exit 1.
    Domain(String),
}

impl From<multinex::Error> for Failure {
    fn from(e: multinex::Error) -> Self {
        if e.is_io() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Domain(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = files::init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
