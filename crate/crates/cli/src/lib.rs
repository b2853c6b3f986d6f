//! The `bounce` command line: dataset generation, training, evaluation and
//! reporting for bouncing-balls video prediction.
//!
//! Every subcommand is a thin wrapper over `bounce_core`. Artifacts carry the
//! configuration and seed that produced them, and contain no timestamps, so
//! re-running a command with the same inputs reproduces its outputs byte for
//! byte.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use bounce_core::eval::Matching;
use bounce_core::models::Architecture;
use bounce_core::training::{Axis, Mode, OptimizerKind, Strategy};
use bounce_core::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::{ExperimentConfig, Profile, SplitSizes};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

/// Process exit status for `err`.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Diverged { .. } => EXIT_DIVERGED,
        e if e.is_data_error() => EXIT_DATA,
        Error::Json(_) => EXIT_DATA,
        Error::Config(_)
        | Error::BoxTooCrowded { .. }
        | Error::Shape(_)
        | Error::Range(_)
        | Error::UnsupportedArchitecture(_)
        | Error::UnknownAxis(_) => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

#[derive(Debug, Parser)]
#[command(name = "bounce", version, about = "Bouncing-balls video prediction experiments")]
pub struct Cli {
    /// Cap on worker threads.
    #[arg(long, global = true, env = "BB_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate and render the train/valid/test splits.
    Generate(GenerateArgs),
    /// Train one model and write its checkpoint and loss log.
    Train(TrainArgs),
    /// Score a checkpoint or a baseline on a dataset.
    Evaluate(EvaluateArgs),
    /// Plot one or more evaluation CSVs as SVG charts.
    Report(ReportArgs),
    /// One-at-a-time hyperparameter search ranked by validation error.
    Gridsearch(GridsearchArgs),
    /// Save the hidden-state channels of a convolutional model as a PNG grid.
    InspectHidden(InspectArgs),
    /// Train forced and curriculum models that differ only in seed and compare them.
    CompareCurriculum(CompareArgs),
    /// generate, train, evaluate and report in one invocation.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Start from a built-in profile's dataset sizes.
    #[arg(long)]
    pub profile: Option<Profile>,
    /// Take generation settings from an experiment config.
    #[arg(long, conflicts_with = "profile")]
    pub config: Option<PathBuf>,
    /// Training sequences; validation and test get a fifth each unless set.
    #[arg(long)]
    pub seqs: Option<usize>,
    #[arg(long)]
    pub valid_seqs: Option<usize>,
    #[arg(long)]
    pub test_seqs: Option<usize>,
    /// Frames per sequence.
    #[arg(long)]
    pub frames: Option<usize>,
    /// Frame side in pixels.
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub balls: Option<usize>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub speed: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Render at half size, then upsample 2x with nearest neighbor.
    #[arg(long)]
    pub legacy_upsample: bool,
    #[arg(long, default_value = "data")]
    pub out: PathBuf,
}

/// Model and training settings shared by every command that trains.
#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    #[arg(long)]
    pub model: Option<Architecture>,
    /// Experiment config JSON; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, conflicts_with = "config")]
    pub profile: Option<Profile>,
    #[arg(long)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub context: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Comma-separated kernel sizes, one per layer.
    #[arg(long, value_delimiter = ',')]
    pub kernels: Option<Vec<usize>>,
    /// Comma-separated channel counts, one per layer.
    #[arg(long, value_delimiter = ',')]
    pub channels: Option<Vec<usize>>,
    /// Comma-separated hidden units for the fully connected LSTM.
    #[arg(long, value_delimiter = ',')]
    pub hidden_units: Option<Vec<usize>>,
    /// Which steps turn self-fed first during curriculum training.
    #[arg(long)]
    pub strategy: Option<Strategy>,
    #[arg(long)]
    pub optimizer: Option<OptimizerKind>,
    /// Disable gradient-norm clipping.
    #[arg(long)]
    pub no_clip: bool,
    /// Seq2seq decoders consume their own outputs regardless of the regimen.
    #[arg(long)]
    pub decoder_self_feed: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// A dataset file, or a directory holding train.bbv.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "runs/train")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    /// Always predict a black frame.
    Empty,
    /// Repeat the last context frame.
    Copy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MatchingArg {
    Greedy,
    Optimal,
}

impl From<MatchingArg> for Matching {
    fn from(m: MatchingArg) -> Self {
        match m {
            MatchingArg::Greedy => Matching::Greedy,
            MatchingArg::Optimal => Matching::Optimal,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// A checkpoint manifest, or a directory holding checkpoint.json.
    #[arg(long, required_unless_present = "baseline")]
    pub ckpt: Option<PathBuf>,
    #[arg(long, conflicts_with = "ckpt")]
    pub baseline: Option<Baseline>,
    /// A dataset file, or a directory holding test.bbv.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub context: usize,
    #[arg(long, default_value_t = 20)]
    pub horizon: usize,
    #[arg(long, value_enum, default_value_t = MatchingArg::Greedy)]
    pub matching: MatchingArg,
    /// Foreground threshold of the ball detector.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, default_value = "runs/eval")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Evaluation CSVs to plot together.
    #[arg(long, required = true)]
    pub csv: Vec<PathBuf>,
    /// Series names, in the order of --csv.
    #[arg(long)]
    pub label: Vec<String>,
    #[arg(long, default_value = "runs/report")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GridsearchArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub axis: Axis,
    /// Comma-separated values of the axis.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<f64>,
    /// Directory holding train.bbv and valid.bbv.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "runs/gridsearch")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// A dataset file, or a directory holding test.bbv.
    #[arg(long)]
    pub data: PathBuf,
    /// Zero-based layer index.
    #[arg(long, default_value_t = 0)]
    pub layer: usize,
    #[arg(long, default_value_t = 0)]
    pub sequence: usize,
    /// Context frames to consume; defaults to the checkpoint's.
    #[arg(long)]
    pub context: Option<usize>,
    #[arg(long, default_value = "hidden.png")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Models per regimen.
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    /// Directory holding train.bbv and test.bbv.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "runs/curriculum")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "runs/pipeline")]
    pub out: PathBuf,
}

fn configure_threads(threads: Option<usize>) -> Result<(), Error> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        // Fails only if a pool already exists in this process, which then keeps its size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = configure_threads(cli.threads).and_then(|()| commands::dispatch(cli.command));
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Diverged { step: 3 }), EXIT_DIVERGED);
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::UnknownAxis("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::BadMagic { expected: *b"BBV1", found: [0; 4] }), EXIT_DATA);
        assert_eq!(exit_code(&Error::SequenceTooShort { len: 1, needed: 2 }), EXIT_DATA);
    }

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from([
            "bounce", "train", "--model", "seq2seq-multi", "--data", "d", "--mode", "curriculum",
            "--kernels", "5,3", "--channels", "10,1", "--lr", "0.01",
        ])
        .unwrap();
        let Command::Train(args) = cli.command else { panic!() };
        assert_eq!(args.model.model, Some(Architecture::Seq2seqMulti));
        assert_eq!(args.model.kernels, Some(vec![5, 3]));
        assert_eq!(args.model.mode, Some(Mode::Curriculum));
        assert!(Cli::try_parse_from(["bounce", "train", "--model", "gru", "--data", "d"]).is_err());
        assert!(Cli::try_parse_from(["bounce", "evaluate", "--data", "d"]).is_err());
    }
}
