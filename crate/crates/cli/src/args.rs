use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use superstat::correlation::Estimator;
use superstat::distfit::{Binning, ModelKind};
use superstat::ingest::Resolution;
use superstat::windowing::Shifts;

#[derive(Debug, Parser)]
#[command(
    name = "superstat",
    version,
    about = "Superstatistical analysis of price series"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full pipeline: returns, window scan, beta fits, marginals, correlations.
    Analyze(AnalyzeArgs),
    /// Generate a synthetic series from the hybrid Langevin model.
    Simulate(SimulateArgs),
    /// Fit the kappa mixture at several return lags.
    KappaScan(KappaScanArgs),
    /// Normalized lag-tau returns only.
    Returns(StageArgs),
    /// Kurtosis scan and optimal window only.
    Window(StageArgs),
    /// Local beta series and histogram.
    Betas(StageArgs),
    /// Fit the volatility laws to the local betas.
    Fit(FitArgs),
    /// Correlation functions of returns and betas with decay fits.
    Corr(CorrArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ResolutionArg {
    Daily,
    Intraday,
}

impl From<ResolutionArg> for Resolution {
    fn from(r: ResolutionArg) -> Self {
        match r {
            ResolutionArg::Daily => Resolution::Daily,
            ResolutionArg::Intraday => Resolution::Intraday,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Output directory for all artifacts.
    #[arg(long, env = "SUPERSTAT_OUT_DIR", default_value = "superstat-out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct StageArgs {
    /// Price CSV (`timestamp,price[,session]`, optionally gzipped).
    pub input: PathBuf,

    /// Return lag tau, in ticks (records) of the input series.
    #[arg(long, default_value_t = 1)]
    pub tau: usize,

    /// Force the input resolution instead of detecting it from timestamps.
    #[arg(long, value_enum)]
    pub resolution: Option<ResolutionArg>,

    /// Candidate window sizes in ticks: `start:end:step` or a comma list.
    #[arg(long, value_parser = parse_grid, default_value = "4:100:2")]
    pub window_grid: WindowGrid,

    /// Window offsets in ticks: `quarters` (0, dt/4, dt/2, 3dt/4) or a comma list.
    #[arg(long, value_parser = parse_shifts, default_value = "quarters")]
    pub shifts: Shifts,

    /// Use this window size in ticks instead of scanning for the optimum.
    #[arg(long)]
    pub window: Option<usize>,

    /// Bins of the beta histogram: `fd`, `log`, `<n>` or `log:<n>`.
    #[arg(long, value_parser = parse_bins, default_value = "fd")]
    pub bins: Binning,

    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct FitOpts {
    /// Volatility laws to fit (comma list of chi2, invchi2, lognormal, mixed).
    #[arg(long, value_delimiter = ',', default_value = "chi2,invchi2,lognormal")]
    pub models: Vec<ModelKind>,

    /// Fit the kappa mixture too; the optional value is the kappa grid step.
    #[arg(long, num_args = 0..=1, default_missing_value = "0.01")]
    pub kappa: Option<f64>,

    /// Number of squared factors n in the chi-square part of the mixture.
    #[arg(long, default_value_t = 4)]
    pub n_dof: u32,

    /// Let every parameter float instead of pinning the mean to the sample mean of beta.
    #[arg(long)]
    pub free_mean: bool,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub stage: StageArgs,
    #[command(flatten)]
    pub fit: FitOpts,
}

#[derive(Debug, Clone, Args)]
pub struct CorrOpts {
    /// Largest correlation lag, in ticks for returns and in windows for betas.
    #[arg(long, default_value_t = 100)]
    pub max_lag: usize,

    /// Autocorrelation estimator: `global`, `literal` or `per-lag`.
    #[arg(long, default_value = "global")]
    pub estimator: Estimator,

    /// Deseasonalization period of the beta correlation, in windows
    /// (default: windows per session for intraday data, none for daily).
    #[arg(long)]
    pub period: Option<usize>,

    /// Sector label written to the decay summary table.
    #[arg(long, default_value = "")]
    pub sector: String,
}

#[derive(Debug, Clone, Args)]
pub struct CorrArgs {
    #[command(flatten)]
    pub stage: StageArgs,
    #[command(flatten)]
    pub corr: CorrOpts,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub stage: StageArgs,
    #[command(flatten)]
    pub fit: FitOpts,
    #[command(flatten)]
    pub corr: CorrOpts,

    /// Skip the amended (return-level) refits of the marginal densities.
    #[arg(long)]
    pub no_amended: bool,

    /// Also run a kappa scan over these return lags, in ticks (comma list).
    #[arg(long, value_delimiter = ',')]
    pub kappa_taus: Vec<usize>,

    /// Record this string in the report's `generated_at` field.
    #[arg(long)]
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// JSON configuration; every field is optional.
    pub config: Option<PathBuf>,

    /// Generate the two-scale series used by kappa-scan (config is then a
    /// two-scale configuration).
    #[arg(long)]
    pub multiscale: bool,

    /// RNG seed; overrides the configuration (two-scale: the walk seed,
    /// with the level seed one above it).
    #[arg(long)]
    pub seed: Option<u64>,

    /// Number of ticks to generate; overrides the configuration.
    #[arg(long)]
    pub ticks: Option<usize>,

    /// Mixture weight kappa in [0, 1]; overrides the configuration.
    #[arg(long)]
    pub kappa: Option<f64>,

    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct KappaScanArgs {
    /// Price CSV (`timestamp,price[,session]`, optionally gzipped).
    pub input: PathBuf,

    /// Return lags in ticks, strictly ascending (comma list).
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32")]
    pub tau: Vec<usize>,

    /// Force the input resolution instead of detecting it from timestamps.
    #[arg(long, value_enum)]
    pub resolution: Option<ResolutionArg>,

    /// Candidate window sizes in ticks: `start:end:step` or a comma list.
    #[arg(long, value_parser = parse_grid, default_value = "4:200:2")]
    pub window_grid: WindowGrid,

    /// Window offsets in ticks: `quarters` or a comma list.
    #[arg(long, value_parser = parse_shifts, default_value = "quarters")]
    pub shifts: Shifts,

    /// Kappa grid step.
    #[arg(long, default_value_t = 0.01)]
    pub kappa: f64,

    /// Number of squared factors n in the chi-square part of the mixture.
    #[arg(long, default_value_t = 4)]
    pub n_dof: u32,

    /// Keep every lag-tau return instead of non-overlapping ones.
    #[arg(long)]
    pub overlapping: bool,

    #[command(flatten)]
    pub out: OutArgs,
}

/// Candidate window sizes, parsed as one flag value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowGrid(pub Vec<usize>);

fn parse_grid(s: &str) -> Result<WindowGrid, String> {
    let grid: Vec<usize> =
        if let Some((range, step)) = s.rsplit_once(':').filter(|_| s.matches(':').count() == 2) {
            let (a, b) = range.split_once(':').expect("two colons");
            let (a, b, step): (usize, usize, usize) = (num(a)?, num(b)?, num(step)?);
            if step == 0 || a > b {
                return Err(format!("bad range `{s}`"));
            }
            (a..=b).step_by(step).collect()
        } else {
            s.split(',').map(num).collect::<Result<_, _>>()?
        };
    if grid.is_empty() {
        return Err("empty window grid".into());
    }
    Ok(WindowGrid(grid))
}

fn num(s: &str) -> Result<usize, String> {
    s.trim()
        .parse()
        .map_err(|_| format!("`{s}` is not a non-negative integer"))
}

fn parse_shifts(s: &str) -> Result<Shifts, String> {
    if s == "quarters" {
        Ok(Shifts::Quarters)
    } else {
        s.split(',')
            .map(num)
            .collect::<Result<Vec<_>, _>>()
            .map(Shifts::Fixed)
    }
}

fn parse_bins(s: &str) -> Result<Binning, String> {
    s.parse().map_err(|e: superstat::Error| e.to_string())
}
