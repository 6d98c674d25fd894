use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mlwm::synthdata::{Preset, VarianceMode};

/// Multilevel clustering of grouped data with Wasserstein means.
#[derive(Debug, Parser)]
#[command(name = "mlwm", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic grouped dataset and its ground truth.
    Generate(GenerateArgs),
    /// Fit a multilevel clustering to a grouped CSV.
    Fit(FitArgs),
    /// Score a fitted result against a ground truth.
    Evaluate(EvaluateArgs),
    /// Run a seeded sweep described by a TOML config.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    Nc,
    Lc,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Nc => Preset::Nc,
            PresetArg::Lc => Preset::Lc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VarianceArg {
    Constant,
    Proportional,
}

impl From<VarianceArg> for VarianceMode {
    fn from(v: VarianceArg) -> Self {
        match v {
            VarianceArg::Constant => VarianceMode::Constant,
            VarianceArg::Proportional => VarianceMode::Proportional,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Mwm,
    Mwms,
    Tsk,
}

impl MethodArg {
    pub fn name(self) -> &'static str {
        match self {
            MethodArg::Mwm => "mwm",
            MethodArg::Mwms => "mwms",
            MethodArg::Tsk => "tsk",
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value = "nc")]
    pub preset: PresetArg,
    /// Number of groups.
    #[arg(long, default_value_t = 50)]
    pub m: usize,
    /// Observations per group.
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub d: usize,
    /// Number of global clusters M.
    #[arg(long, default_value_t = 5)]
    pub num_global: usize,
    /// Atoms per global measure.
    #[arg(long, default_value_t = 6)]
    pub global_atoms: usize,
    /// Atoms per local measure (nc).
    #[arg(long, default_value_t = 5)]
    pub local_atoms: usize,
    /// Size of the shared atom pool (lc).
    #[arg(long, default_value_t = 50)]
    pub shared_atoms: usize,
    #[arg(long, value_enum, default_value = "constant")]
    pub variance: VarianceArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "data.csv")]
    pub out_data: PathBuf,
    #[arg(long, default_value = "truth.json")]
    pub out_truth: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, value_enum, default_value = "mwm")]
    pub method: MethodArg,
    /// Grouped CSV with header group_id,x0,...
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "result.json")]
    pub out: PathBuf,
    /// Number of global clusters M.
    #[arg(short = 'M', long, default_value_t = 5)]
    pub num_global: usize,
    /// Atoms per local measure (mwm, tsk).
    #[arg(short = 'k', long, default_value_t = 5)]
    pub local_atoms: usize,
    /// Size of the shared support (mwms).
    #[arg(short = 'K', long, default_value_t = mlwm::mwms::DEFAULT_SHARED_ATOMS)]
    pub shared_atoms: usize,
    /// Support bound L of each global measure.
    #[arg(short = 'L', long, default_value_t = mlwm::mwm::DEFAULT_GLOBAL_SUPPORT)]
    pub global_support: usize,
    #[arg(long, default_value_t = mlwm::mwm::DEFAULT_MAX_OUTER)]
    pub max_outer: usize,
    #[arg(long, default_value_t = mlwm::mwm::DEFAULT_REL_TOL)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Exit with status 3 if the outer loop hits --max-outer.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub result: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, default_value = "metrics.csv")]
    pub out: PathBuf,
    /// Accepted for uniformity; evaluation draws no randomness.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// TOML sweep description.
    #[arg(long)]
    pub config: PathBuf,
    /// Directory receiving runs.csv and summary.csv.
    #[arg(long, default_value = "bench-out")]
    pub out_dir: PathBuf,
    /// Offset added to every seed in the sweep.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
