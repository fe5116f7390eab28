//! The `fmx` command line: every subcommand maps onto library calls and
//! writes its artifacts under an output directory.
//!
//! Configuration precedence is flags > `--config` file > defaults.

mod commands;
mod values;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::Error;

pub use values::parse_values;

/// Exit status of a successful run.
pub const EXIT_OK: i32 = 0;
/// Any failure without a more specific code.
pub const EXIT_FAILURE: i32 = 1;
/// Unknown or malformed flags and config keys.
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
/// Training produced a non-finite value.
pub const EXIT_DIVERGED: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "fmx", version, about = "Frequency-aware mixed attention for skeleton action recognition")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a model and write logs, checkpoints and test scores.
    Train(TrainArgs),
    /// Score a checkpoint on a dataset split.
    Eval(EvalArgs),
    /// Fuse score files by weighted softmax and report accuracy.
    Ensemble(EnsembleArgs),
    /// Generate the confusable synthetic dataset.
    Synth(SynthArgs),
    /// Convert NTU `.skeleton` files into a canonical dataset.
    Parse(ParseArgs),
    /// Export attention maps of one sample as CSV and PGM images.
    AttnExport(AttnExportArgs),
    /// Print transform residuals for the given clip lengths.
    SpectralCheck(SpectralCheckArgs),
    /// Compare autodiff gradients with central differences.
    GradCheck(GradCheckArgs),
    /// Train once per value of a hyper-parameter.
    Sweep(SweepArgs),
    /// Render CSV outputs as Markdown tables.
    Report(ReportArgs),
}

/// Model and schedule configuration shared by commands that build a model.
#[derive(Args, Debug, Clone, Default)]
pub struct ConfigArgs {
    /// `key=value` file with model and schedule keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Canonical dataset file.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Parent directory; the run goes into a subdirectory named by the config hash.
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
    /// Also keep one checkpoint per epoch.
    #[arg(long)]
    pub every_epoch: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Config the checkpoint was trained with (a run's `replay.cfg`).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    /// Where to write the score CSV.
    #[arg(long)]
    pub scores: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EnsembleArgs {
    /// Score CSV; repeat once per stream.
    #[arg(long = "scores", required = true)]
    pub scores: Vec<PathBuf>,
    /// Comma-separated stream weights (default all 1).
    #[arg(long)]
    pub weights: Option<String>,
    /// Dataset the score ids index into; supplies the labels.
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Output dataset file (a `.manifest` and `.replay` file are written next to it).
    #[arg(long, default_value = "synth.fmxd")]
    pub out: PathBuf,
    /// `key=value` file with generator keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub classes: Option<usize>,
    /// Generator seed (default 0).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Protocol {
    /// Split by performer id.
    Xsub,
    /// Camera 1 is the test view.
    Xview,
}

#[derive(Args, Debug)]
pub struct ParseArgs {
    /// `.skeleton` files or directories holding them.
    #[arg(long = "input", required = true)]
    pub input: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub frames: usize,
    #[arg(long, value_enum, default_value = "xsub")]
    pub protocol: Protocol,
    /// joint, bone, joint_motion or bone_motion.
    #[arg(long, default_value = "joint")]
    pub modality: String,
    /// 0-based joint subtracted from every frame.
    #[arg(long, default_value_t = crate::data::DEFAULT_CENTER_JOINT)]
    pub center: usize,
    /// Number of classes (default: largest action id).
    #[arg(long)]
    pub classes: Option<usize>,
}

#[derive(Args, Debug)]
pub struct AttnExportArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Trained weights; omit to export the maps of a freshly initialised model.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset index of the sample.
    #[arg(long, default_value_t = 0)]
    pub sample: usize,
    /// Frame whose fused and frequency maps are written.
    #[arg(long, default_value_t = 0)]
    pub frame: usize,
    #[arg(long, default_value = "attn")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SpectralCheckArgs {
    /// Clip length; repeatable.
    #[arg(long = "F", value_name = "F", default_values_t = [4usize, 8, 16, 64])]
    pub frames: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct GradCheckArgs {
    /// Model keys over the tiny config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-5)]
    pub epsilon: f64,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    /// Frequency operator coefficient.
    Phi,
    /// Number of unit groups.
    N,
    /// Number of enhanced coefficients.
    Nc,
    /// Baseline, +FAB, +FO, +TAB.
    Ablation,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub param: SweepParam,
    /// `a..b` (step from the written precision, or `--step`) or a comma list.
    #[arg(long)]
    pub values: Option<String>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// CSV files or directories scanned for CSV files.
    #[arg(long = "input", required = true)]
    pub input: Vec<PathBuf>,
    /// Markdown output; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Error raised by the command layer.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self::Lib(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(msg) => write!(f, "{msg}"),
            Self::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Lib(Error::Io { .. }) => EXIT_IO,
            Self::Lib(Error::Diverged { .. }) => EXIT_DIVERGED,
            Self::Lib(_) => EXIT_FAILURE,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (program name first), runs the command and returns the exit code.
/// Results go to stdout, diagnostics to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
