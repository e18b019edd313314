//! `tdroc`: time-dependent ROC analysis from the command line.
//!
//! Every subcommand writes a result table (`--format csv|json`) and a
//! `<name>_plot.csv` file with columns time, raw, smoothed, ci_low, ci_high
//! into `--output-dir`. Times on the command line are in the cohort's display
//! unit (years for prepared PBC data).
//!
//! Exit codes: 0 success, 2 input error, 3 estimation error.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use output::Format;

#[derive(Parser, Debug)]
#[command(name = "tdroc", version, about = "Time-dependent ROC curves, AUC series and concordance for survival markers")]
pub struct Cli {
    /// Directory for result and plot files (created if missing).
    #[arg(long, global = true, default_value = ".")]
    pub output_dir: PathBuf,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Merge the PBC baseline and sequential files into a counting-process cohort.
    PreparePbc(PrepareArgs),
    /// Product-limit survival of the subjects' terminal times.
    Km(InputArgs),
    /// Cumulative/dynamic ROC curve at one time on the baseline sample.
    CdRoc(CdRocArgs),
    /// Landmark series of cumulative/dynamic AUC over a fixed window.
    CdSequential(CdSequentialArgs),
    /// Incident/dynamic AUC series (mean rank) with nearest-neighbour smoothing.
    IdAuc(IdAucArgs),
    /// Incident/dynamic sensitivity at a fixed false-positive fraction.
    IdTpr(IdTprArgs),
    /// Cox proportional hazards fit.
    CoxFit(CoxFitArgs),
    /// Cross-validated (baseline) or full-data time-updated risk scores.
    CvScores(CvScoresArgs),
    /// Concordance index truncated at tau.
    Cindex(CindexArgs),
    /// Paired bootstrap of the difference between two c-indices.
    CindexDiff(CindexDiffArgs),
    /// Cause-specific cumulative/dynamic ROC curve under competing risks.
    CompetingCd(CompetingCdArgs),
    /// Cause-specific incident/dynamic ROC curve under competing risks.
    CompetingId(CompetingIdArgs),
    /// Percentile bootstrap interval for one statistic.
    Bootstrap(BootstrapArgs),
    /// Simulate a cohort with known accuracy.
    Simulate(SimulateArgs),
    /// Full PBC analysis: both models, baseline and updated scores.
    CaseStudy(CaseStudyArgs),
}

#[derive(Args, Debug)]
pub struct InputArgs {
    /// Cohort file (id,start,stop,status,marker,<covariates>).
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Args, Debug)]
pub struct MarkerArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::Baseline)]
    pub marker_mode: ModeArg,

    /// Use this covariate column as the marker instead of `marker`.
    #[arg(long)]
    pub marker: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Baseline,
    Updated,
}

impl From<ModeArg> for tdroc::data::MarkerMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Baseline => tdroc::data::MarkerMode::Baseline,
            ModeArg::Updated => tdroc::data::MarkerMode::Updated,
        }
    }
}

#[derive(Args, Debug)]
pub struct BootArgs {
    /// Bootstrap replicates (0 disables intervals).
    #[arg(long, default_value_t = 0)]
    pub nboot: usize,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct SmoothArgs {
    /// Smoothing span of the time window.
    #[arg(long)]
    pub lambda: Option<f64>,

    /// Choose the span by leave-one-out cross-validation (overrides --lambda).
    #[arg(long)]
    pub cv_bandwidth: bool,
}

#[derive(Args, Debug)]
pub struct PrepareArgs {
    /// PBC baseline table.
    #[arg(long)]
    pub input: PathBuf,

    /// PBC sequential (longitudinal) table.
    #[arg(long)]
    pub sequential: PathBuf,

    /// Optional `canonical = actual` column-name mapping file.
    #[arg(long)]
    pub columns: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CdRocArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Prediction time (display units).
    #[arg(long)]
    pub time: f64,

    #[arg(long, value_enum, default_value_t = Estimator::Nne)]
    pub estimator: Estimator,

    /// Nearest-neighbour span (default 0.04 n^-0.2).
    #[arg(long)]
    pub span: Option<f64>,

    #[arg(long)]
    pub marker: Option<String>,

    #[command(flatten)]
    pub boot: BootArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Estimator {
    Km,
    Nne,
}

#[derive(Args, Debug)]
pub struct CdSequentialArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Comma-separated landmark times (display units).
    #[arg(long, value_delimiter = ',', default_value = "1,4,6")]
    pub landmarks: Vec<f64>,

    #[arg(long, default_value_t = 1.0)]
    pub window: f64,

    #[arg(long)]
    pub span: Option<f64>,

    #[command(flatten)]
    pub marker: MarkerArgs,

    #[command(flatten)]
    pub boot: BootArgs,
}

#[derive(Args, Debug)]
pub struct IdAucArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[command(flatten)]
    pub smooth: SmoothArgs,

    #[command(flatten)]
    pub marker: MarkerArgs,

    #[command(flatten)]
    pub boot: BootArgs,
}

#[derive(Args, Debug)]
pub struct IdTprArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// False-positive fraction.
    #[arg(long, default_value_t = 0.1)]
    pub fpf: f64,

    /// Smoothing span (default 0.3).
    #[arg(long)]
    pub lambda: Option<f64>,

    #[command(flatten)]
    pub marker: MarkerArgs,

    #[command(flatten)]
    pub boot: BootArgs,
}

#[derive(Args, Debug)]
pub struct CoxFitArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// five_covariate, four_covariate, marker, or custom:<path>.
    #[arg(long, default_value = "five_covariate")]
    pub model: String,

    #[arg(long, value_enum, default_value_t = Ties::Efron)]
    pub ties: Ties,

    /// Fit on the entry values or on the time-updated intervals.
    #[arg(long, value_enum, default_value_t = ModeArg::Baseline)]
    pub marker_mode: ModeArg,

    /// Span for the coefficient path of a single-term model.
    #[arg(long, default_value_t = 0.2)]
    pub lambda: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Ties {
    Efron,
    Breslow,
}

#[derive(Args, Debug)]
pub struct CvScoresArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[arg(long, default_value = "five_covariate")]
    pub model: String,

    #[arg(long, default_value_t = 10)]
    pub folds: usize,

    /// Fold-assignment seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// baseline: cross-validated scores on the entry values; updated: full
    /// fit evaluated on every interval.
    #[arg(long, value_enum, default_value_t = ModeArg::Baseline)]
    pub marker_mode: ModeArg,
}

#[derive(Args, Debug)]
pub struct CindexArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Truncation time (display units).
    #[arg(long, default_value_t = 10.0)]
    pub tau: f64,

    #[command(flatten)]
    pub marker: MarkerArgs,

    #[command(flatten)]
    pub boot: BootArgs,
}

#[derive(Args, Debug)]
pub struct CindexDiffArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// First marker column (`marker` or a covariate).
    #[arg(long)]
    pub marker_a: String,

    /// Second marker column.
    #[arg(long)]
    pub marker_b: String,

    #[arg(long, default_value_t = 10.0)]
    pub tau: f64,

    #[arg(long, value_enum, default_value_t = ModeArg::Baseline)]
    pub marker_mode: ModeArg,

    #[arg(long, default_value_t = 500)]
    pub nboot: usize,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct CompetingCdArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[arg(long, default_value_t = 1)]
    pub cause: u32,

    #[arg(long)]
    pub time: f64,

    #[arg(long)]
    pub span: Option<f64>,

    #[arg(long)]
    pub marker: Option<String>,
}

#[derive(Args, Debug)]
pub struct CompetingIdArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[arg(long, default_value_t = 1)]
    pub cause: u32,

    #[arg(long)]
    pub time: f64,

    #[arg(long)]
    pub marker: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StatisticArg {
    Cindex,
    IdAuc,
    IdTpr,
    CdNne,
    CdKm,
}

#[derive(Args, Debug)]
pub struct BootstrapArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[arg(long, value_enum)]
    pub statistic: StatisticArg,

    /// Evaluation time for id-auc, id-tpr and cd-km; window for cd-nne.
    #[arg(long)]
    pub time: Option<f64>,

    /// Landmark for cd-nne.
    #[arg(long, default_value_t = 0.0)]
    pub landmark: f64,

    #[arg(long, default_value_t = 10.0)]
    pub tau: f64,

    #[arg(long, default_value_t = 0.1)]
    pub fpf: f64,

    #[command(flatten)]
    pub smooth: SmoothArgs,

    #[command(flatten)]
    pub marker: MarkerArgs,

    #[arg(long, default_value_t = 500)]
    pub nboot: usize,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Scenario file of `key = value` lines; flags below are ignored when set.
    #[arg(long)]
    pub scenario: Option<PathBuf>,

    #[arg(long, default_value_t = 500)]
    pub n: usize,

    /// Log hazard ratio per marker unit.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,

    /// Baseline event hazard.
    #[arg(long, default_value_t = 1.0)]
    pub rate: f64,

    /// Independent exponential censoring rate (0 for none).
    #[arg(long, default_value_t = 0.0)]
    pub censor_rate: f64,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Also report the Monte-Carlo cumulative AUC for (0, time].
    #[arg(long)]
    pub time: Option<f64>,

    #[arg(long, default_value_t = 200_000)]
    pub mc: usize,
}

#[derive(Args, Debug)]
pub struct CaseStudyArgs {
    /// PBC baseline table.
    #[arg(long)]
    pub input: PathBuf,

    /// PBC sequential table.
    #[arg(long)]
    pub sequential: PathBuf,

    #[arg(long)]
    pub columns: Option<PathBuf>,

    /// Cross-validation fold seed.
    #[arg(long, default_value_t = 0)]
    pub cv_seed: u64,

    /// Bootstrap seed.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    #[command(flatten)]
    pub smooth: SmoothArgs,

    #[arg(long, value_delimiter = ',', default_value = "1,4,6")]
    pub landmarks: Vec<f64>,

    #[arg(long, default_value_t = 1.0)]
    pub window: f64,

    #[arg(long, default_value_t = 10.0)]
    pub tau: f64,

    #[arg(long, default_value_t = 0.1)]
    pub fpf: f64,

    #[arg(long, default_value_t = 500)]
    pub nboot: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
