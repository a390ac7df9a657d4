//! `easter`: generate data, train, evaluate and run the text recognizer.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod plot;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(name = "easter", version, about = "Recurrence-free convolutional text recognition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a synthetic dataset of text images with a manifest.
    GenData(GenDataArgs),
    /// Write augmented variants of one image for visual inspection.
    AugmentPreview(AugmentPreviewArgs),
    /// Train a model from a training config.
    Train(TrainArgs),
    /// Score a checkpoint on a manifest and write CER/WER reports.
    Eval(EvalArgs),
    /// Transcribe an image or every image in a directory (TSV on stdout).
    Transcribe(TranscribeArgs),
    /// Print the architecture table and parameter count.
    Inspect(InspectArgs),
    /// Plot loss and validation CER curves from metrics CSVs as SVG.
    ExportPlot(ExportPlotArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum TemplatePreset {
    /// Names, street addresses, dollar amounts, phone numbers, e-mail addresses.
    Document,
    /// Digit strings and mixed letter/digit words.
    Alphanumeric,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["config", "preset"])))]
struct GenDataArgs {
    /// Generator config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in template set, used instead of a config file.
    #[arg(long, value_enum)]
    preset: Option<TemplatePreset>,
    /// Output directory; defaults to `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of samples.
    #[arg(long)]
    size: Option<usize>,
}

#[derive(Args, Debug)]
struct AugmentPreviewArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Augmentation TOML (`[[ops]]` list) or a training config with an `augment` section.
    /// Without it the standard pipeline is used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Training config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Continue from a state file (default: `train.state` in the output directory).
    #[arg(long, num_args = 0..=1)]
    resume: Option<Option<PathBuf>>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Directory for `summary.json` and `records.tsv`.
    #[arg(long)]
    out: PathBuf,
    /// Compare case-insensitively.
    #[arg(long)]
    case_fold: bool,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
}

#[derive(Args, Debug)]
struct TranscribeArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Image file or directory of images.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("model").required(true).args(["checkpoint", "config", "preset"])))]
struct InspectArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Training config whose model section is shown.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset: 3x3, 5x3 or small.
    #[arg(long)]
    preset: Option<String>,
    /// Vocabulary for `--preset` (default: 0-9a-zA-Z).
    #[arg(long, requires = "preset")]
    vocab: Option<String>,
}

#[derive(Args, Debug)]
struct ExportPlotArgs {
    /// Metrics CSV; repeat to overlay runs.
    #[arg(long, required = true)]
    metrics: Vec<PathBuf>,
    /// Legend label per metrics file (default: the run directory name).
    #[arg(long)]
    label: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or configuration: exit 2.
    Usage(String),
    /// Anything that went wrong while running: exit 1.
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<easter_core::Error> for CliError {
    fn from(e: easter_core::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData(a) => commands::gen_data(a),
        Command::AugmentPreview(a) => commands::augment_preview(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Transcribe(a) => commands::transcribe(a),
        Command::Inspect(a) => commands::inspect(a),
        Command::ExportPlot(a) => commands::export_plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
