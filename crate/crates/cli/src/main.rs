//! `deepcam`: dataset simulation, classical and learned reconstruction,
//! training and evaluation from the command line.
//!
//! Exit codes: 0 success, 1 partial failure, 2 usage or input error,
//! 3 numeric abort during training.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "deepcam", version, about = "Raw camera ISP laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
pub struct Common {
    /// Seed for every random choice of the command.
    #[arg(long, env = "DCAM_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for per-frame work; 1 is the deterministic reference mode.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Write a corpus of synthetic sRGB scenes (16-bit PPM).
    GenScenes(GenScenesArgs),
    /// Simulate raw/ground-truth pairs from a directory of PPM images.
    Simulate(SimulateArgs),
    /// Run the classical pipeline over one split of a manifest.
    Pipeline(PipelineArgs),
    /// Train the network on a manifest.
    Train(TrainArgs),
    /// Reconstruct frames with a trained checkpoint.
    Infer(InferArgs),
    /// Score methods on one split; writes report.csv and summary.json.
    Eval(EvalArgs),
    /// Render side-by-side comparison strips from eval outputs.
    Report(ReportArgs),
}

#[derive(Args)]
pub struct GenScenesArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub count: usize,
    /// WIDTHxHEIGHT
    #[arg(long, default_value = "128x128")]
    pub size: String,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Directory of source PPM images.
    #[arg(long)]
    pub src: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Dataset config (TOML); flags given on the command line override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated shot-noise SNR levels in dB.
    #[arg(long, value_delimiter = ',')]
    pub snr: Option<Vec<f64>>,
    /// Comma-separated exposure gains.
    #[arg(long, value_delimiter = ',')]
    pub exposures: Option<Vec<f64>>,
    #[arg(long)]
    pub crops: Option<usize>,
    /// WIDTHxHEIGHT
    #[arg(long)]
    pub crop_size: Option<String>,
    /// bayer | xtrans
    #[arg(long)]
    pub cfa: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Pipeline config (TOML); individual flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = ["bilinear", "malvar"])]
    pub demosaic: Option<String>,
    #[arg(long, value_parser = ["oracle", "none", "grayworld", "shades-of-gray", "whitepatch", "gray-edge"])]
    pub wb: Option<String>,
    #[arg(long, value_parser = ["oracle", "auto"])]
    pub exposure: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Network base width.
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Network config (JSON); --width overrides its base width.
    #[arg(long)]
    pub net_config: Option<PathBuf>,
    /// Continue from a checkpoint.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Best-validation checkpoint.
    #[arg(long)]
    pub out: PathBuf,
    /// History CSV; defaults to the checkpoint path with a .csv extension.
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args)]
pub struct InferArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Reconstruct every frame of this manifest split ...
    #[arg(long, conflicts_with = "raw")]
    pub manifest: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// ... or a single raw file.
    #[arg(long)]
    pub raw: Option<PathBuf>,
    /// Output directory (manifest mode) or file (single raw).
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Comma-separated `kind:arg` list: `cnn:CKPT`, `classical:CONFIG.toml`
    /// (or a preset: oracle, oracle-bilinear, baseline), `images:DIR`.
    /// Prefix `name=` to choose the report name.
    #[arg(long, value_delimiter = ',', required = true)]
    pub methods: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Output directory of a previous `eval` run.
    #[arg(long)]
    pub eval: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long)]
    pub out: PathBuf,
    /// At most this many strips.
    #[arg(long)]
    pub limit: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenScenes(a) => commands::gen_scenes(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Pipeline(a) => commands::pipeline(a),
        Command::Train(a) => commands::train(a),
        Command::Infer(a) => commands::infer(a),
        Command::Eval(a) => commands::eval(a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(code) => code.into(),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code().into()
        }
    }
}
