use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qipf_core::bandwidth::{DEFAULT_FACTOR_GRID, DEFAULT_INDUCING_CAP, DEFAULT_VALIDATION_FRACTION};
use qipf_core::metrics::DEFAULT_HISTOGRAM_BINS;
use qipf_core::network::{DEFAULT_ENSEMBLE_SIZE, DEFAULT_MC_RATE, DEFAULT_MC_RUNS};
use qipf_core::{CorruptionKind, GridSpec, SigmaPolicy, DEFAULT_MODES};

#[derive(Debug, Parser)]
#[command(name = "qipf", version, about = "Kernel-field uncertainty scoring for classifier predictions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decompose the kernel field of a sampled 50 Hz sine wave over a 1-D grid.
    DemoSine(DemoSineArgs),
    /// Generate (or load) a dataset, train the toy classifier and optional ensemble.
    Train(TrainArgs),
    /// Corrupt the test split of a dataset.
    Corrupt(CorruptArgs),
    /// Score test predictions against a field built from training predictions.
    Score(ScoreArgs),
    /// Evaluate scores as error detectors.
    Evaluate(EvaluateArgs),
    /// Corruption-severity sweep over QIPF and the baselines.
    Sweep(SweepArgs),
    /// MC-Dropout or ensemble uncertainty scores.
    Baseline(BaselineArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::DemoSine(_) => "demo-sine",
            Command::Train(_) => "train",
            Command::Corrupt(_) => "corrupt",
            Command::Score(_) => "score",
            Command::Evaluate(_) => "evaluate",
            Command::Sweep(_) => "sweep",
            Command::Baseline(_) => "baseline",
        }
    }
}

fn parse_kind(s: &str) -> Result<CorruptionKind, String> {
    s.parse().map_err(|e: qipf_core::Error| e.to_string())
}

fn parse_policy(s: &str) -> Result<SigmaPolicy, String> {
    s.parse().map_err(|e: qipf_core::Error| e.to_string())
}

fn parse_grid(s: &str) -> Result<GridSpec, String> {
    s.parse().map_err(|e: qipf_core::Error| e.to_string())
}

fn default_grid() -> String {
    DEFAULT_FACTOR_GRID.map(|f| f.to_string()).join(",")
}

/// Field construction and bandwidth options shared by `score` and `sweep`.
#[derive(Debug, Clone, Args, Serialize)]
pub struct QipfArgs {
    /// Number of modes averaged into the score.
    #[arg(long, default_value_t = DEFAULT_MODES)]
    pub modes: usize,
    /// `auto` to cross-validate the Silverman multiplier, or a fixed multiplier.
    #[arg(long, default_value = "auto", value_parser = parse_policy)]
    pub sigma_factor: SigmaPolicy,
    /// Candidate multipliers for `--sigma-factor auto`.
    #[arg(long, default_value_t = default_grid())]
    pub factor_grid: String,
    /// Fraction of training predictions held out during cross-validation.
    #[arg(long, default_value_t = DEFAULT_VALIDATION_FRACTION)]
    pub val_frac: f64,
    /// Inducing set size; capped at the number of training predictions.
    #[arg(long, default_value_t = DEFAULT_INDUCING_CAP)]
    pub downsample_n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl QipfArgs {
    pub fn factor_grid(&self) -> qipf_core::Result<Vec<f64>> {
        self.factor_grid
            .split(',')
            .map(|s| {
                s.trim().parse::<f64>().map_err(|_| {
                    qipf_core::Error::InvalidParameter(format!("bad factor `{s}` in --factor-grid"))
                })
            })
            .collect()
    }
}

impl Default for QipfArgs {
    fn default() -> Self {
        QipfArgs {
            modes: DEFAULT_MODES,
            sigma_factor: SigmaPolicy::Auto,
            factor_grid: default_grid(),
            val_frac: DEFAULT_VALIDATION_FRACTION,
            downsample_n: DEFAULT_INDUCING_CAP,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Calibration {
    /// Minimum over the signal samples.
    Inducing,
    /// Minimum over the evaluation grid.
    Grid,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DemoSineArgs {
    /// Kernel widths, one CSV and plot each.
    #[arg(long, value_delimiter = ',', default_value = "0.15,0.3,0.5")]
    pub widths: Vec<f64>,
    #[arg(long, default_value_t = 8)]
    pub modes: usize,
    /// Evaluation grid `lo:hi:steps`, endpoints included.
    #[arg(long, default_value = "-2:2:400", value_parser = parse_grid, allow_hyphen_values = true)]
    pub grid: GridSpec,
    /// Samples over one period of the wave.
    #[arg(long, default_value_t = 512)]
    pub samples: usize,
    #[arg(long, value_enum, default_value_t = Calibration::Inducing)]
    pub calibration: Calibration,
    /// Mode values are clipped to +-cap in the plots only.
    #[arg(long, default_value_t = 10.0)]
    pub plot_cap: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Generator {
    Blobs,
    Moons,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    /// Existing dataset JSON; when absent one is generated.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Generator::Blobs)]
    pub generator: Generator,
    #[arg(long, default_value_t = 400)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    /// Blob standard deviation.
    #[arg(long, default_value_t = 0.3)]
    pub spread: f64,
    /// Moon noise standard deviation.
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.5)]
    pub test_frac: f64,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, value_delimiter = ',', default_value = "64,32")]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub dropout: f64,
    /// Extra independently initialized members for the ensemble baseline; 0 skips it.
    #[arg(long, default_value_t = DEFAULT_ENSEMBLE_SIZE)]
    pub ensemble: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CorruptArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_parser = parse_kind)]
    pub corruption: CorruptionKind,
    #[arg(long)]
    pub severity: u8,
    /// Also write the model's predictions on the corrupted test split.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScoreArgs {
    /// Training predictions CSV; the field is built from these.
    #[arg(long)]
    pub train: PathBuf,
    /// Predictions CSV to score.
    #[arg(long)]
    pub test: PathBuf,
    #[command(flatten)]
    pub qipf: QipfArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    /// Scores CSV with a header row.
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long, default_value = "score")]
    pub column: String,
    /// Predictions the scores belong to, row for row.
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long, default_value_t = DEFAULT_HISTOGRAM_BINS)]
    pub bins: usize,
    #[arg(long, default_value = "qipf")]
    pub method: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, ValueEnum, Serialize)]
pub enum Method {
    #[value(name = "qipf")]
    #[serde(rename = "qipf")]
    Qipf,
    #[value(name = "mc-dropout")]
    #[serde(rename = "mc-dropout")]
    McDropout,
    #[value(name = "ensemble")]
    #[serde(rename = "ensemble")]
    Ensemble,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Qipf => "qipf",
            Method::McDropout => "mc-dropout",
            Method::Ensemble => "ensemble",
        }
    }
}

/// Ensemble members given either as files or as a directory of `*.json`.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct EnsembleArgs {
    #[arg(long, value_delimiter = ',')]
    pub ensemble: Vec<PathBuf>,
    #[arg(long)]
    pub ensemble_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BaselineArgs {
    #[arg(long, value_enum)]
    pub method: BaselineMethod,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Model for MC-Dropout, and the model whose errors the scores are judged against.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub members: EnsembleArgs,
    #[arg(long, value_parser = parse_kind)]
    pub corruption: Option<CorruptionKind>,
    #[arg(long, default_value_t = 0)]
    pub severity: u8,
    #[arg(long, default_value_t = DEFAULT_MC_RATE)]
    pub rate: f64,
    #[arg(long, default_value_t = DEFAULT_MC_RUNS)]
    pub runs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum BaselineMethod {
    #[value(name = "mc-dropout")]
    #[serde(rename = "mc-dropout")]
    McDropout,
    #[value(name = "ensemble")]
    #[serde(rename = "ensemble")]
    Ensemble,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub members: EnsembleArgs,
    #[arg(long, value_parser = parse_kind, default_value = "rotation")]
    pub corruption: CorruptionKind,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5")]
    pub severities: Vec<u8>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "qipf,mc-dropout,ensemble")]
    pub methods: Vec<Method>,
    #[command(flatten)]
    pub qipf: QipfArgs,
    #[arg(long, default_value_t = DEFAULT_MC_RATE)]
    pub mc_rate: f64,
    #[arg(long, default_value_t = DEFAULT_MC_RUNS)]
    pub mc_runs: usize,
    #[arg(long, default_value_t = DEFAULT_HISTOGRAM_BINS)]
    pub bins: usize,
    #[arg(long)]
    pub out: PathBuf,
}
