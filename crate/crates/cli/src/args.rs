use std::path::PathBuf;
use std::str::FromStr;

use automodel::harness::{Method, RegMethod};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "am", version, about = "Auto-modeling estimation: fits, baselines and simulation studies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Many-normal-means simulation study (MPE per method and sample size).
    SimulateMnm(SimulateArgs),
    /// Fit the many-normal-means model to the response column of a CSV file.
    FitMnm(FitMnmArgs),
    /// Sparse linear regression on 0/1 labels with a train/test split.
    FitReg(FitRegArgs),
    /// Exact versus Monte Carlo AM estimate for the scalar mean model.
    OracleSimple(OracleArgs),
    /// James-Stein estimates for a CSV response column, or its expected MPE.
    BaselineJs(JsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StudyArg {
    Gaussian,
    Bimodal,
    Zeroinf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DualityArg {
    L1,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Solver, imputation, seed and output flags shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Bootstrap replicates B.
    #[arg(long = "boot", value_name = "B", value_parser = clap::value_parser!(u64).range(1..))]
    pub boot: Option<u64>,
    /// Imputed draws per replicate (default: sample size).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub draws: Option<u64>,
    #[arg(long, value_enum, default_value = "l1")]
    pub duality: DualityArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_parser = unit_interval)]
    pub tol: Option<f64>,
    #[arg(long, value_parser = positive)]
    pub step: Option<f64>,
    #[arg(long = "max-iters", value_parser = clap::value_parser!(u64).range(1..))]
    pub max_iters: Option<u64>,
    /// Output file (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "gaussian")]
    pub study: StudyArg,
    /// Sample sizes, comma separated, each at least 4.
    #[arg(long = "n", value_delimiter = ',', value_parser = sample_size, default_value = "10,20,50")]
    pub n: Vec<usize>,
    /// Replications K per sample size.
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    pub reps: u64,
    /// Prior variance of the gaussian study.
    #[arg(long = "A", default_value_t = 0.01, value_parser = nonnegative)]
    pub a: f64,
    /// Comma separated subset of mle, js, am.
    #[arg(long, value_delimiter = ',', default_value = "mle,js,am", value_parser = parse_enum::<Method>)]
    pub methods: Vec<Method>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct FitMnmArgs {
    /// CSV file; the last column is used as the observations.
    #[arg(long)]
    pub train: PathBuf,
    /// Support size m (default: number of observations).
    #[arg(long = "m-support", value_parser = clap::value_parser!(u64).range(1..))]
    pub m_support: Option<u64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct FitRegArgs {
    /// Training CSV; covariate columns then a 0/1 label column.
    #[arg(long)]
    pub train: PathBuf,
    /// Test CSV with the same columns.
    #[arg(long)]
    pub test: PathBuf,
    /// Comma separated subset of am, lasso, ridge.
    #[arg(long, value_delimiter = ',', default_value = "am,lasso,ridge", value_parser = parse_enum::<RegMethod>)]
    pub methods: Vec<RegMethod>,
    /// Keep the K covariates with the largest two-sample t statistics.
    #[arg(long = "screen-top", value_name = "K", value_parser = clap::value_parser!(u64).range(1..))]
    pub screen_top: Option<u64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[arg(long = "n", default_value_t = 25, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    /// Sample mean of the synthetic data.
    #[arg(long, default_value_t = 0.1)]
    pub ybar: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct JsArgs {
    /// CSV file whose last column holds the observations.
    #[arg(long, required_unless_present = "a")]
    pub train: Option<PathBuf>,
    /// Report the expected MPE under a N(0, A) prior.
    #[arg(long = "A", value_parser = nonnegative)]
    pub a: Option<f64>,
    /// Sample size for the expected MPE when no file is given.
    #[arg(long = "n", value_parser = sample_size)]
    pub n: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

fn parse_enum<E: FromStr<Err = automodel::AmError>>(s: &str) -> Result<E, String> {
    s.trim().parse().map_err(|e: automodel::AmError| e.to_string())
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err("must be positive".into())
    }
}

fn nonnegative(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err("must be >= 0".into())
    }
}

fn unit_interval(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err("must lie in (0, 1)".into())
    }
}

fn sample_size(s: &str) -> Result<usize, String> {
    let n: usize = s.trim().parse().map_err(|_| format!("`{s}` is not a sample size"))?;
    if n < 4 {
        return Err(format!("{n} is too small; James-Stein needs n >= 4"));
    }
    Ok(n)
}
