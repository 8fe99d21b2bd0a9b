use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "nomix",
    version,
    about = "Spike-and-slab variational fits and simulation studies"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the summary-statistics regression model to one dataset.
    FitGls(FitGlsArgs),
    /// Fit sparse probabilistic PCA to one data matrix.
    FitPpca(FitPpcaArgs),
    /// Run the regression simulation study.
    BenchGls(BenchArgs),
    /// Run the sparse PCA simulation study.
    BenchPpca(BenchArgs),
    /// Posterior means at P = 1 along a grid of observed effects.
    ThresholdCurve(ThresholdArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeArg {
    Sparse,
    Naive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Small sizes and few replicates; runs in well under a second.
    Smoke,
    /// Full-scale study settings.
    Paper,
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitGlsArgs {
    /// TOML file; relative paths inside it resolve against its directory.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Observed effects, one value per line.
    #[arg(long)]
    pub beta_hat: Option<PathBuf>,
    /// Correlation matrix as headerless CSV.
    #[arg(long)]
    pub corr: Option<PathBuf>,
    #[arg(long)]
    pub sigma_e2: Option<f64>,
    /// Slab variance.
    #[arg(long)]
    pub sigma1: Option<f64>,
    /// Prior spike probability.
    #[arg(long)]
    pub p0: Option<f64>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    /// Spike variance for the naive scheme.
    #[arg(long)]
    pub sigma0: Option<f64>,
    #[arg(long)]
    pub sweeps: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct FitPpcaArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// N x P data matrix as headerless CSV, used as given.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Number of components.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub sigma_e2: Option<f64>,
    #[arg(long)]
    pub sigma1: Option<f64>,
    #[arg(long)]
    pub p0: Option<f64>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    #[arg(long)]
    pub sigma0: Option<f64>,
    #[arg(long)]
    pub sweeps: Option<usize>,
    /// Stop early once the relative ELBo change over a sweep is below this.
    #[arg(long)]
    pub elbo_rel_tol: Option<f64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// TOML file with study settings; keys mirror the config field names.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Starting point that the config file and flags override.
    #[arg(long, value_enum, default_value = "paper")]
    pub preset: Preset,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// `sparse` drops the naive methods; `naive` keeps them.
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    /// Replace the naive spike-variance grid with this single value.
    #[arg(long)]
    pub sigma0: Option<f64>,
    /// Fill the elapsed_ms column. Off by default so reruns are byte-identical.
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub p0: Option<f64>,
    #[arg(long)]
    pub sigma_e2: Option<f64>,
    #[arg(long)]
    pub sigma1: Option<f64>,
    /// Spike variance for the naive scheme.
    #[arg(long)]
    pub sigma0: Option<f64>,
    #[arg(long)]
    pub from: Option<f64>,
    #[arg(long)]
    pub to: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
    /// Explicit comma-separated grid; overrides from/to/step.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub grid: Option<Vec<f64>>,
    #[command(flatten)]
    pub out: OutArgs,
}
