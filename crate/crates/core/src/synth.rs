//! Simulation of the hybrid superstatistical model: Ornstein–Uhlenbeck
//! factors drive a κ-mixture β that is refreshed every
//! `beta_update_interval` ticks, and u follows a linear Langevin equation
//! with local variance 1/β in between.

use std::io::Write;
use std::path::Path;

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::distfit::{fit_kappa, DistributionModel, KappaOptions, MixedParams};
use crate::error::{Error, Result};
use crate::ingest::{PriceRecord, PriceSeries, Resolution};
use crate::returns::{log_returns, normalize, RawReturns};
use crate::windowing::{extract_betas, find_optimal_window, Shifts};

/// Scale of the synthetic log-price increments, `ln S_{t+1} − ln S_t = RETURN_SCALE·u_t`.
pub const RETURN_SCALE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub kappa: f64,
    pub n_dof: u32,
    pub x0_mean: f64,
    pub x0_std: f64,
    pub xi_std: f64,
    /// OU mean reversion Γ of the factors, per tick.
    #[serde(alias = "drag_Gamma")]
    pub drag_gamma: f64,
    /// OU noise amplitude Σ; `None` means √(2Γ), i.e. unit stationary
    /// variance of the factors.
    #[serde(alias = "noise_Sigma")]
    pub noise_sigma: Option<f64>,
    /// Langevin drag γ of u, per tick.
    pub langevin_gamma: f64,
    pub beta_update_interval: usize,
    pub total_ticks: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    /// Both mixture components have mean 1 (n·xi_std² = e^{x0_mean + x0_std²/2}).
    fn default() -> Self {
        Self {
            kappa: 0.5,
            n_dof: 4,
            x0_mean: -0.5,
            x0_std: 1.0,
            xi_std: 0.5,
            drag_gamma: 0.002,
            noise_sigma: None,
            langevin_gamma: 5.0,
            beta_update_interval: 50,
            total_ticks: 100_000,
            seed: 42,
        }
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(
            field,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

impl SynthConfig {
    /// Components with equal means β₀ and the given lognormal width.
    pub fn equal_means(kappa: f64, n_dof: u32, x0_std: f64, beta0: f64) -> Self {
        Self {
            kappa,
            n_dof,
            x0_mean: beta0.ln() - 0.5 * x0_std * x0_std,
            x0_std,
            xi_std: (beta0 / n_dof as f64).sqrt(),
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| Error::config("<json>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.kappa) {
            return Err(Error::config(
                "kappa",
                format!("must lie in [0, 1], got {}", self.kappa),
            ));
        }
        if self.n_dof < 1 {
            return Err(Error::config("n_dof", "must be at least 1"));
        }
        if !self.x0_mean.is_finite() {
            return Err(Error::config("x0_mean", "must be finite"));
        }
        positive("x0_std", self.x0_std)?;
        positive("xi_std", self.xi_std)?;
        positive("drag_gamma", self.drag_gamma)?;
        if let Some(s) = self.noise_sigma {
            positive("noise_sigma", s)?;
        }
        positive("langevin_gamma", self.langevin_gamma)?;
        if self.beta_update_interval < 2 {
            return Err(Error::config(
                "beta_update_interval",
                format!("must be at least 2, got {}", self.beta_update_interval),
            ));
        }
        if self.total_ticks < 1 {
            return Err(Error::config("total_ticks", "must be at least 1"));
        }
        Ok(())
    }

    /// Σ with the default filled in.
    pub fn resolved_noise_sigma(&self) -> f64 {
        self.noise_sigma
            .unwrap_or_else(|| (2.0 * self.drag_gamma).sqrt())
    }

    /// Copy with every optional field resolved.
    pub fn resolved(&self) -> Self {
        Self {
            noise_sigma: Some(self.resolved_noise_sigma()),
            ..self.clone()
        }
    }

    /// Stationary standard deviation Σ/√(2Γ) of the unscaled OU factors.
    fn factor_sd(&self) -> f64 {
        self.resolved_noise_sigma() / (2.0 * self.drag_gamma).sqrt()
    }

    /// Exact stationary law of β.
    pub fn stationary_law(&self) -> DistributionModel {
        let sd = self.factor_sd();
        let x0_s = self.x0_std * sd;
        let chi_scale = (self.xi_std * sd).powi(2);
        let n = self.n_dof as f64;
        if self.kappa >= 1.0 {
            DistributionModel::lognormal(x0_s, self.x0_mean)
        } else if self.kappa <= 0.0 {
            DistributionModel::chi2(n, n * chi_scale)
        } else {
            DistributionModel::Mixed(MixedParams {
                kappa: self.kappa,
                n_dof: self.n_dof,
                x0_mu: self.x0_mean,
                x0_s,
                chi_scale,
            })
        }
    }

    /// Discarded ticks before recording: ten times the slowest relaxation
    /// time, rounded up to whole refresh intervals.
    pub fn burn_in(&self) -> usize {
        let slowest = (1.0 / self.drag_gamma).max(1.0 / self.langevin_gamma);
        let l = self.beta_update_interval;
        ((10.0 * slowest).ceil() as usize).div_ceil(l) * l
    }
}

/// Exact OU transition x' = x·e^{−Γdt} + Σ·√((1−e^{−2Γdt})/(2Γ))·ξ.
pub fn ou_step(x: f64, gamma: f64, sigma: f64, dt: f64, noise: f64) -> Result<f64> {
    Ok(OuStepper::new(gamma, sigma, dt)?.step(x, noise))
}

/// [`ou_step`] with its coefficients precomputed.
#[derive(Debug, Clone, Copy)]
pub struct OuStepper {
    decay: f64,
    spread: f64,
}

impl OuStepper {
    /// Σ = 0 is accepted and gives the deterministic decay.
    pub fn new(gamma: f64, sigma: f64, dt: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Domain(format!(
                "OU rate must be positive, got {gamma}"
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!(
                "OU time step must be positive, got {dt}"
            )));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::Domain(format!(
                "OU noise amplitude must be non-negative, got {sigma}"
            )));
        }
        Ok(Self {
            decay: (-gamma * dt).exp(),
            spread: sigma * (-(-2.0 * gamma * dt).exp_m1() / (2.0 * gamma)).sqrt(),
        })
    }

    pub fn step(&self, x: f64, noise: f64) -> f64 {
        x * self.decay + self.spread * noise
    }
}

/// One-tick update of u at fixed β: an OU step whose stationary variance
/// is 1/β, u' = u·e^{−γ} + √((1−e^{−2γ})/β)·ξ.
#[derive(Debug, Clone, Copy)]
pub struct LocalLangevin {
    decay: f64,
    unit_spread: f64,
}

impl LocalLangevin {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Domain(format!(
                "Langevin drag must be positive, got {gamma}"
            )));
        }
        Ok(Self {
            decay: (-gamma).exp(),
            unit_spread: (-(-2.0 * gamma).exp_m1()).sqrt(),
        })
    }

    pub fn step(&self, u: f64, beta: f64, noise: f64) -> f64 {
        u * self.decay + self.unit_spread / beta.sqrt() * noise
    }
}

/// β = κ·e^{X₀} + (1−κ)·(X₁² + … + X_n²).
pub fn beta_from_factors(x: &[f64], config: &SynthConfig) -> Result<f64> {
    let n = config.n_dof as usize;
    if x.len() != n + 1 {
        return Err(Error::InvalidArgument(format!(
            "expected {} factors (n_dof + 1), got {}",
            n + 1,
            x.len()
        )));
    }
    let k = config.kappa;
    let chi: f64 = x[1..].iter().map(|v| v * v).sum();
    Ok(k * x[0].exp() + (1.0 - k) * chi)
}

/// Maps unit OU factors Y to X₀ = x0_mean + x0_std·Y₀, X_i = xi_std·Y_i.
fn scale_factors(y: &[f64], config: &SynthConfig, out: &mut [f64]) {
    out[0] = config.x0_mean + config.x0_std * y[0];
    for (o, v) in out[1..].iter_mut().zip(&y[1..]) {
        *o = config.xi_std * v;
    }
}

/// Independent draws from the stationary law of β, generated through the
/// factors.
pub fn stationary_betas(config: &SynthConfig, count: usize, seed: u64) -> Result<Vec<f64>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = config.factor_sd();
    let dim = config.n_dof as usize + 1;
    let mut y = vec![0.0; dim];
    let mut x = vec![0.0; dim];
    (0..count)
        .map(|_| {
            for v in y.iter_mut() {
                *v = sd * rng.sample::<f64, _>(StandardNormal);
            }
            scale_factors(&y, config, &mut x);
            beta_from_factors(&x, config)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthOutput {
    /// u rescaled to unit population variance.
    pub u_series: Vec<f64>,
    /// β in force at each tick, in the units of the unscaled u.
    pub beta_truth: Vec<f64>,
    /// The configuration with defaults resolved.
    pub model_truth: SynthConfig,
    /// Standard deviation of u before rescaling; the local variance of the
    /// rescaled series is 1/(β·u_scale²).
    pub u_scale: f64,
}

pub fn simulate(config: &SynthConfig) -> Result<SynthOutput> {
    config.validate()?;
    let cfg = config.resolved();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let l = cfg.beta_update_interval;
    let sigma = cfg.resolved_noise_sigma();
    let factor = OuStepper::new(cfg.drag_gamma, sigma, l as f64)?;
    let langevin = LocalLangevin::new(cfg.langevin_gamma)?;
    let dim = cfg.n_dof as usize + 1;

    let sd = cfg.factor_sd();
    let mut y: Vec<f64> = (0..dim)
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut x = vec![0.0; dim];
    let burn = cfg.burn_in();
    let total = burn + cfg.total_ticks;

    let mut u_series = Vec::with_capacity(cfg.total_ticks);
    let mut beta_truth = Vec::with_capacity(cfg.total_ticks);
    let mut u = 0.0;
    let mut tick = 0;
    while tick < total {
        if tick > 0 {
            for v in y.iter_mut() {
                *v = factor.step(*v, rng.sample(StandardNormal));
            }
        }
        scale_factors(&y, &cfg, &mut x);
        let beta = beta_from_factors(&x, &cfg)?;
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Domain(format!(
                "factors produced beta = {beta} at tick {tick}"
            )));
        }
        if tick == 0 {
            u = rng.sample::<f64, _>(StandardNormal) / beta.sqrt();
        }
        for _ in 0..l.min(total - tick) {
            u = langevin.step(u, beta, rng.sample(StandardNormal));
            if tick >= burn {
                u_series.push(u);
                beta_truth.push(beta);
            }
            tick += 1;
        }
    }

    let n = u_series.len() as f64;
    let mean = u_series.iter().sum::<f64>() / n;
    let var = u_series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let u_scale = var.sqrt();
    if !(u_scale > 0.0) {
        return Err(Error::ZeroVariance);
    }
    for v in &mut u_series {
        *v /= u_scale;
    }
    Ok(SynthOutput {
        u_series,
        beta_truth,
        model_truth: cfg,
        u_scale,
    })
}

/// Daily price series with ln S_0 = 0 and the given log-price path.
pub fn prices_from_log_path(log_prices: &[f64], label: &str) -> PriceSeries {
    let start = NaiveDate::from_ymd_opt(2000, 1, 1)
        .expect("valid date")
        .and_hms_opt(0, 0, 0)
        .expect("valid time");
    let records = log_prices
        .iter()
        .enumerate()
        .map(|(i, lp)| PriceRecord {
            timestamp: start + Duration::days(i as i64),
            price: lp.exp(),
            session_id: i as u64,
        })
        .collect();
    PriceSeries {
        records,
        resolution: Resolution::Daily,
        source_label: label.to_string(),
    }
}

fn cumulative(u: &[f64]) -> Vec<f64> {
    let mut path = Vec::with_capacity(u.len() + 1);
    let mut acc = 0.0;
    path.push(acc);
    for v in u {
        acc += RETURN_SCALE * v;
        path.push(acc);
    }
    path
}

impl SynthOutput {
    /// Prices exp(0.01·Σu) on consecutive days; one more row than ticks.
    pub fn price_series(&self) -> PriceSeries {
        prices_from_log_path(&cumulative(&self.u_series), "synthetic")
    }

    /// `tick,beta` rows.
    pub fn write_beta_truth<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["tick", "beta"])?;
        for (i, b) in self.beta_truth.iter().enumerate() {
            w.write_record([i.to_string(), b.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    /// `tick,u` rows.
    pub fn write_returns<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["tick", "u"])?;
        for (i, u) in self.u_series.iter().enumerate() {
            w.write_record([i.to_string(), u.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Two-scale price path: a random walk driven by a χ²-type simulation plus
/// a stationary level from a lognormal-type simulation. Short-lag returns
/// are dominated by the stationary term and long-lag returns by the walk,
/// so the fitted κ falls as the lag grows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultiScaleConfig {
    pub walk: SynthConfig,
    pub level: SynthConfig,
    /// Weight b of the stationary term, ln S = 0.01·(Σu_walk + b·u_level).
    pub level_weight: f64,
}

impl Default for MultiScaleConfig {
    fn default() -> Self {
        let base = SynthConfig {
            total_ticks: 4_000_000,
            ..SynthConfig::default()
        };
        Self {
            walk: SynthConfig {
                seed: 11,
                ..SynthConfig::equal_means(0.0, 4, 1.0, 1.0).with_schedule(&base)
            },
            level: SynthConfig {
                seed: 12,
                ..SynthConfig::equal_means(1.0, 4, 0.6, 1.0).with_schedule(&base)
            },
            level_weight: 2.0,
        }
    }
}

impl SynthConfig {
    /// Copy taking the timing fields (rates, interval, length) from `other`.
    pub fn with_schedule(&self, other: &SynthConfig) -> Self {
        Self {
            drag_gamma: other.drag_gamma,
            noise_sigma: other.noise_sigma,
            langevin_gamma: other.langevin_gamma,
            beta_update_interval: other.beta_update_interval,
            total_ticks: other.total_ticks,
            ..self.clone()
        }
    }
}

impl MultiScaleConfig {
    pub fn validate(&self) -> Result<()> {
        self.walk.validate()?;
        self.level.validate()?;
        if self.walk.total_ticks != self.level.total_ticks {
            return Err(Error::config(
                "level.total_ticks",
                "must equal walk.total_ticks",
            ));
        }
        if !(self.level_weight >= 0.0 && self.level_weight.is_finite()) {
            return Err(Error::config(
                "level_weight",
                "must be non-negative and finite",
            ));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| Error::config("<json>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Generates the two-scale price series (total_ticks + 1 rows).
pub fn simulate_multiscale(config: &MultiScaleConfig) -> Result<PriceSeries> {
    config.validate()?;
    let walk = simulate(&config.walk)?;
    let level = simulate(&config.level)?;
    let mut path = cumulative(&walk.u_series);
    path[0] += RETURN_SCALE * config.level_weight * level.u_series[0];
    for (p, v) in path[1..].iter_mut().zip(&level.u_series) {
        *p += RETURN_SCALE * config.level_weight * v;
    }
    Ok(prices_from_log_path(&path, "synthetic-multiscale"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaScanRow {
    pub tau: usize,
    pub kappa: f64,
    pub ks: f64,
    pub window: usize,
    pub beta_count: usize,
}

/// κ = intercept + slope·ln τ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogTauFit {
    pub intercept: f64,
    pub slope: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaScan {
    pub rows: Vec<KappaScanRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<LogTauFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Number of leading points used by the log-τ line.
pub const SCAN_FIT_POINTS: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct ScanOptions {
    pub window_grid: Vec<usize>,
    pub shifts: Shifts,
    pub kappa: KappaOptions,
    /// Keep every lag-τ return instead of a non-overlapping subset. The
    /// overlapping series is MA(τ−1)-correlated, which pulls window
    /// kurtosis below 3 at large τ.
    pub overlapping: bool,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            window_grid: (4..=200).step_by(2).collect(),
            shifts: Shifts::Quarters,
            kappa: KappaOptions::default(),
            overlapping: false,
        }
    }
}

impl KappaScan {
    /// `tau,kappa,ks` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["tau", "kappa", "ks"])?;
        for r in &self.rows {
            w.write_record([r.tau.to_string(), r.kappa.to_string(), r.ks.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Greedy subset of returns whose price intervals do not overlap.
fn non_overlapping(raw: RawReturns) -> RawReturns {
    let tau = raw.lag_tau;
    let mut values = Vec::with_capacity(raw.values.len() / tau + 1);
    let mut start_index = Vec::with_capacity(values.capacity());
    let mut next = 0;
    for (&v, &i) in raw.values.iter().zip(&raw.start_index) {
        if i >= next {
            values.push(v);
            start_index.push(i);
            next = i + tau;
        }
    }
    RawReturns {
        values,
        start_index,
        ..raw
    }
}

/// For each τ: lag-τ returns → optimal window → β series → κ fit, followed by
/// a least-squares line κ = a + b·ln τ through the first
/// [`SCAN_FIT_POINTS`] rows.
pub fn kappa_scan(series: &PriceSeries, taus: &[usize], opts: &ScanOptions) -> Result<KappaScan> {
    if taus.is_empty() {
        return Err(Error::InvalidArgument("tau list is empty".into()));
    }
    if taus[0] == 0 || taus.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "tau values must be positive and strictly ascending".into(),
        ));
    }
    let mut rows = Vec::with_capacity(taus.len());
    for &tau in taus {
        let mut raw = log_returns(series, tau)?;
        if !opts.overlapping {
            raw = non_overlapping(raw);
        }
        let u = normalize(&raw)?;
        let scan = find_optimal_window(&u, &opts.window_grid, &opts.shifts)?;
        let window = scan
            .crossing
            .expect("find_optimal_window returns a crossing")
            .rounded();
        let betas = extract_betas(&u.values, window)?;
        let fit = fit_kappa(&betas.betas, &opts.kappa)?;
        rows.push(KappaScanRow {
            tau,
            kappa: fit.kappa(),
            ks: fit.best.fit_stats.ks_statistic,
            window,
            beta_count: betas.len(),
        });
    }
    let (fit, note) = if rows.len() < 2 {
        (None, Some("a single tau gives no log-tau fit".to_string()))
    } else {
        let used = &rows[..rows.len().min(SCAN_FIT_POINTS)];
        let xs: Vec<f64> = used.iter().map(|r| (r.tau as f64).ln()).collect();
        let ys: Vec<f64> = used.iter().map(|r| r.kappa).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let slope = sxy / sxx;
        (
            Some(LogTauFit {
                intercept: my - slope * mx,
                slope,
                points: used.len(),
            }),
            None,
        )
    };
    Ok(KappaScan { rows, fit, note })
}
