use serde::{Deserialize, Serialize};

use superstat::correlation::{DecayFit, Estimator};
use superstat::distfit::{FittedModel, KappaPoint, ModelKind};
use superstat::ingest::Resolution;
use superstat::marginal::AmendedFit;
use superstat::synth::KappaScan;

/// Bumped whenever a field is added, removed or changes meaning.
pub const REPORT_VERSION: &str = "1.0.0";

/// Contents of `report.json`. Optional sections are omitted, never `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub report_version: String,
    /// The only field allowed to differ between identical runs; absent
    /// unless `--timestamp` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
    pub input_summary: InputSummary,
    pub window: WindowSummary,
    pub beta_stats: BetaStats,
    pub fits: FitSummary,
    pub marginal_fits: MarginalSummary,
    pub correlations: CorrelationSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<KappaSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSummary {
    pub source: String,
    pub records: usize,
    pub resolution: Resolution,
    pub tau: usize,
    pub returns: usize,
    /// Lag-τ pairs dropped because they straddle a session boundary.
    pub dropped_overnight: usize,
    pub sessions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    /// Interpolated crossing of the mean kurtosis with 3, in ticks.
    pub window: f64,
    pub uncertainty: f64,
    /// Integer window used for β extraction.
    pub used: usize,
    /// False when the window was fixed on the command line.
    pub scanned: bool,
    pub grid: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaStats {
    pub beta0: f64,
    pub count: usize,
    pub window: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedFit {
    pub kind: ModelKind,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub constrained_mean: bool,
    pub models: Vec<FittedModel>,
    /// Kind of the fit in `models` with the smallest KS statistic.
    pub preferred: ModelKind,
    pub failed: Vec<FailedFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalSummary {
    pub skipped: bool,
    pub fits: Vec<AmendedFit>,
    pub failed: Vec<FailedFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesCorrelation {
    pub max_lag: usize,
    pub sample_size: usize,
    /// Deseasonalization period in lags, when one was applied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<DecayFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSummary {
    pub estimator: Estimator,
    pub returns: SeriesCorrelation,
    pub beta: SeriesCorrelation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaSummary {
    pub kappa: f64,
    pub x0_s: f64,
    pub ks: f64,
    pub n_dof: u32,
    pub step: f64,
    pub profile: Vec<KappaPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<KappaScan>,
}

impl AnalysisReport {
    pub fn preferred_fit(&self) -> Option<&FittedModel> {
        self.fits
            .models
            .iter()
            .find(|m| m.model.kind() == self.fits.preferred)
    }
}
