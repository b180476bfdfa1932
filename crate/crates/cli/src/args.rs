use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use subboot::experiments::Scale;
use subboot::source::Column;
use subboot::{Method, StatisticKind};

#[derive(Debug, Parser)]
#[command(name = "subboot", version, about = "Standard errors for large data by subsampling and the bootstrap")]
pub struct Cli {
    /// Master seed; overrides any seed in a config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// JSON run config (`estimate`) or experiment config (`experiment`).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads for parallel replications.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    /// Run replications sequentially on one thread.
    #[arg(long, global = true)]
    pub deterministic: bool,

    /// Directory for CSV, JSON and generated data files.
    #[arg(long, global = true, env = "SUBBOOT_OUT", value_name = "DIR")]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the byte-offset sidecar for a delimited text file.
    Index {
        data: PathBuf,
        #[command(flatten)]
        format: FormatArgs,
        /// Sidecar path; defaults to DATA.sbidx.
        #[arg(long, value_name = "FILE")]
        index: Option<PathBuf>,
    },
    /// Run one estimator and print its SE².
    Estimate(EstimateArgs),
    /// Pick (B*, R*) for BLB from a cost model.
    Tune(TuneArgs),
    /// Time BLB probes on a dataset and fit the cost model.
    Calibrate(CalibrateArgs),
    /// Run one of the simulation studies and write its CSV report.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Args)]
pub struct FormatArgs {
    /// Field delimiter; `tab` or `\t` for tabs.
    #[arg(long, default_value = ",")]
    pub delimiter: String,
    /// The first line is a header.
    #[arg(long)]
    pub header: bool,
    /// One or two columns, by name or zero-based ordinal.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub columns: Vec<Column>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub method: Option<Method>,
    /// Defaults to the mean for one column and the correlation for two.
    #[arg(long)]
    pub statistic: Option<StatisticKind>,
    #[arg(long, default_value_t = 0)]
    pub n: usize,
    #[arg(long = "B", default_value_t = 0)]
    pub b: usize,
    #[arg(long = "R", default_value_t = 0)]
    pub r: usize,
    /// Load the whole file instead of sampling records through the index.
    #[arg(long)]
    pub in_memory: bool,
    /// Add N(0, SD²) noise to the last selected column.
    #[arg(long, value_name = "SD")]
    pub add_noise: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub noise_seed: u64,
    #[command(flatten)]
    pub format: FormatArgs,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    /// Calibration JSON holding beta1 and beta2.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["beta1", "beta2"])]
    pub calibration: Option<PathBuf>,
    #[arg(long, requires = "beta2")]
    pub beta1: Option<f64>,
    #[arg(long, requires = "beta1")]
    pub beta2: Option<f64>,
    /// Moment ratio σ⁴/(σ₄ − σ⁴).
    #[arg(long)]
    pub c: Option<f64>,
    /// Estimate c from the first selected column of this file.
    #[arg(long, value_name = "FILE", conflicts_with = "c")]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub format: FormatArgs,
    #[arg(long)]
    pub n: usize,
    /// Current B; with R, tune at the same predicted time.
    #[arg(long = "B", requires = "r", conflicts_with = "c_max")]
    pub b: Option<usize>,
    #[arg(long = "R", requires = "b")]
    pub r: Option<usize>,
    /// CPU budget in seconds.
    #[arg(long)]
    pub c_max: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    pub data: PathBuf,
    /// Subset size of every probe.
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub statistic: Option<StatisticKind>,
    #[arg(long, value_enum, default_value = "desk")]
    pub scale: ScaleArg,
    /// Override the number of timed runs per probe.
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[command(flatten)]
    pub format: FormatArgs,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    pub study: Study,
    #[arg(long, value_enum, default_value = "desk")]
    pub scale: ScaleArg,
    /// Calibration JSON for the tuning study; calibrates first when absent.
    #[arg(long, value_name = "FILE")]
    pub calibration: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Study {
    Gamma,
    Kappa,
    Tuning,
}

impl Study {
    pub fn name(self) -> &'static str {
        match self {
            Study::Gamma => "gamma",
            Study::Kappa => "kappa",
            Study::Tuning => "tuning",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScaleArg {
    Desk,
    Full,
}

impl From<ScaleArg> for Scale {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Desk => Scale::Desk,
            ScaleArg::Full => Scale::Full,
        }
    }
}
