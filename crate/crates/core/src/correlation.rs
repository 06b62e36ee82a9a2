//! Autocorrelation of returns and of β, and exponential / power-law decay
//! fits.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the mean is removed at lag t.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Estimator {
    /// (1/(M−t)) Σ (x_i − m)(x_{i+t} − m) with the full-sample mean m.
    /// Shift invariant; equal to `Literal` up to edge terms of order m².
    #[default]
    GlobalMean,
    /// (1/(M−t)) Σ x_i x_{i+t} − m².
    Literal,
    /// Pearson-style: head and tail segments centred on their own means.
    PerLagMeans,
}

impl std::str::FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" | "global-mean" => Ok(Estimator::GlobalMean),
            "literal" => Ok(Estimator::Literal),
            "per-lag" | "per-lag-means" => Ok(Estimator::PerLagMeans),
            other => Err(Error::InvalidArgument(format!(
                "estimator must be `global`, `literal` or `per-lag`, got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationFunction {
    pub lags: Vec<usize>,
    /// Unnormalized covariances.
    pub values: Vec<f64>,
    /// `values / values[0]`.
    pub normalized: Vec<f64>,
    /// Length of the series the estimate came from.
    pub sample_size: usize,
}

impl CorrelationFunction {
    /// Wraps precomputed values at lags 0, 1, 2, ….
    pub fn from_values(values: Vec<f64>, sample_size: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        if !(values[0] > 0.0) {
            return Err(Error::ZeroVariance);
        }
        let c0 = values[0];
        let mut normalized: Vec<f64> = values.iter().map(|v| v / c0).collect();
        normalized[0] = 1.0;
        Ok(Self {
            lags: (0..values.len()).collect(),
            values,
            normalized,
            sample_size,
        })
    }

    pub fn max_lag(&self) -> usize {
        self.lags.len().saturating_sub(1)
    }

    /// Default noise floor 2/√M.
    pub fn noise_floor(&self) -> f64 {
        2.0 / (self.sample_size.max(1) as f64).sqrt()
    }

    /// `lag,c,c_normalized` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["lag", "c", "c_normalized"])?;
        for ((lag, c), n) in self.lags.iter().zip(&self.values).zip(&self.normalized) {
            w.write_record([lag.to_string(), c.to_string(), n.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

pub fn autocorrelation(x: &[f64], max_lag: usize) -> Result<CorrelationFunction> {
    autocorrelation_with(x, max_lag, Estimator::default())
}

pub fn autocorrelation_with(
    x: &[f64],
    max_lag: usize,
    estimator: Estimator,
) -> Result<CorrelationFunction> {
    let m = x.len();
    if m < max_lag + 2 {
        return Err(Error::SeriesTooShort {
            needed: max_lag + 2,
            got: m,
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "series contains non-finite values".into(),
        ));
    }
    let mean = x.iter().sum::<f64>() / m as f64;
    let values: Vec<f64> = (0..=max_lag)
        .into_par_iter()
        .map(|t| {
            let n = (m - t) as f64;
            let (head, tail) = (&x[..m - t], &x[t..]);
            match estimator {
                Estimator::GlobalMean => {
                    head.iter()
                        .zip(tail)
                        .map(|(a, b)| (a - mean) * (b - mean))
                        .sum::<f64>()
                        / n
                }
                Estimator::Literal => {
                    head.iter().zip(tail).map(|(a, b)| a * b).sum::<f64>() / n - mean * mean
                }
                Estimator::PerLagMeans => {
                    let mh = head.iter().sum::<f64>() / n;
                    let mt = tail.iter().sum::<f64>() / n;
                    head.iter()
                        .zip(tail)
                        .map(|(a, b)| (a - mh) * (b - mt))
                        .sum::<f64>()
                        / n
                }
            }
        })
        .collect();
    CorrelationFunction::from_values(values, m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DecayForm {
    /// C ~ e^{−γt}
    Exponential,
    /// C ~ t^{−α}
    PowerLaw,
}

impl DecayForm {
    pub const ALL: [DecayForm; 2] = [DecayForm::Exponential, DecayForm::PowerLaw];
}

/// One log-linear fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormFit {
    pub form: DecayForm,
    /// γ for `Exponential`, α for `PowerLaw`.
    pub parameter: f64,
    /// ln C at t = 0 (exponential) or t = 1 (power law).
    pub intercept: f64,
    /// RMS of the log residuals.
    pub residual: f64,
    pub preferred: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub form: DecayForm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent_alpha: Option<f64>,
    /// Inclusive lag range.
    pub fit_range: (usize, usize),
    /// Residual of the preferred form.
    pub residual: f64,
    pub fits: Vec<FormFit>,
    pub noise_floor: f64,
    pub points_used: usize,
    /// Lags in range skipped because C ≤ 0.
    pub excluded_nonpositive: usize,
}

pub const MIN_DECAY_POINTS: usize = 5;
/// Consecutive sub-floor lags that end the fit range.
const FLOOR_RUN: usize = 3;

/// Least squares y = a + b·x; returns (a, b, rms residual).
fn line_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - a - b * x).powi(2))
        .sum();
    (a, b, (rss / n).sqrt())
}

pub fn fit_decay(corr: &CorrelationFunction, candidates: &[DecayForm]) -> Result<DecayFit> {
    fit_decay_with_floor(corr, candidates, corr.noise_floor())
}

/// [`fit_decay`] with an explicit noise floor.
pub fn fit_decay_with_floor(
    corr: &CorrelationFunction,
    candidates: &[DecayForm],
    floor: f64,
) -> Result<DecayFit> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no decay forms requested".into()));
    }
    let c = &corr.normalized;
    if c.len() < 2 || c[1..].iter().all(|&v| !(v > floor)) {
        return Err(Error::AllBelowFloor { floor });
    }
    // range: lag 1 up to the start of the first run of sub-floor lags
    let mut end = c.len() - 1;
    let mut run = 0;
    for (t, &v) in c.iter().enumerate().skip(1) {
        if v > floor {
            run = 0;
        } else {
            run += 1;
            if run == FLOOR_RUN {
                end = t - FLOOR_RUN;
                break;
            }
        }
    }
    let mut ts = Vec::new();
    let mut logs = Vec::new();
    let mut excluded = 0;
    for (t, &v) in c.iter().enumerate().take(end + 1).skip(1) {
        if v > 0.0 {
            ts.push(t as f64);
            logs.push(v.ln());
        } else {
            excluded += 1;
        }
    }
    let above = (1..=end).filter(|&t| c[t] > floor).count();
    if above < MIN_DECAY_POINTS || ts.len() < MIN_DECAY_POINTS {
        return Err(Error::TooFewPoints {
            needed: MIN_DECAY_POINTS,
            got: above.min(ts.len()),
        });
    }

    let mut fits: Vec<FormFit> = candidates
        .iter()
        .map(|&form| {
            let xs: Vec<f64> = match form {
                DecayForm::Exponential => ts.clone(),
                DecayForm::PowerLaw => ts.iter().map(|t| t.ln()).collect(),
            };
            let (a, b, residual) = line_fit(&xs, &logs);
            FormFit {
                form,
                parameter: -b,
                intercept: a,
                residual,
                preferred: false,
            }
        })
        .filter(|f| f.parameter > 0.0 && f.parameter.is_finite())
        .collect();
    let best = (0..fits.len())
        .min_by(|&i, &j| fits[i].residual.total_cmp(&fits[j].residual))
        .ok_or_else(|| {
            Error::OptimizationFailure("no candidate form decays over the fit range".into())
        })?;
    fits[best].preferred = true;
    let pick = |form| fits.iter().find(|f| f.form == form).map(|f| f.parameter);
    Ok(DecayFit {
        form: fits[best].form,
        rate_gamma: pick(DecayForm::Exponential),
        exponent_alpha: pick(DecayForm::PowerLaw),
        fit_range: (1, end),
        residual: fits[best].residual,
        noise_floor: floor,
        points_used: ts.len(),
        excluded_nonpositive: excluded,
        fits,
    })
}

/// Removes a periodic modulation of the given period (in lags): ln C is
/// detrended by a log-log line, the per-phase means of the residuals are
/// centred and subtracted, and the trend is refitted on the result. Lag 0
/// and non-positive values are left as they are.
pub fn deseasonalize(corr: &CorrelationFunction, period: usize) -> Result<CorrelationFunction> {
    if period < 2 {
        return Err(Error::InvalidArgument(format!(
            "period must be at least 2, got {period}"
        )));
    }
    let max_lag = corr.max_lag();
    if max_lag < 2 * period {
        return Err(Error::PeriodTooLong { period, max_lag });
    }
    let idx: Vec<usize> = (1..=max_lag)
        .filter(|&t| corr.normalized[t] > 0.0)
        .collect();
    if idx.len() < 2 {
        return Ok(corr.clone());
    }
    let xs: Vec<f64> = idx.iter().map(|&t| (t as f64).ln()).collect();
    let orig: Vec<f64> = idx.iter().map(|&t| corr.normalized[t].ln()).collect();
    let mut adjusted = orig.clone();
    for _ in 0..3 {
        let (a, b, _) = line_fit(&xs, &adjusted);
        let mut sum = vec![0.0; period];
        let mut count = vec![0usize; period];
        for ((&t, &x), &y) in idx.iter().zip(&xs).zip(&orig) {
            sum[t % period] += y - (a + b * x);
            count[t % period] += 1;
        }
        let phase: Vec<f64> = sum
            .iter()
            .zip(&count)
            .map(|(s, &n)| if n > 0 { s / n as f64 } else { 0.0 })
            .collect();
        let used: Vec<f64> = phase
            .iter()
            .zip(&count)
            .filter(|(_, &n)| n > 0)
            .map(|(p, _)| *p)
            .collect();
        let centre = used.iter().sum::<f64>() / used.len() as f64;
        for ((&t, y), &o) in idx.iter().zip(adjusted.iter_mut()).zip(&orig) {
            *y = o - (phase[t % period] - centre);
        }
    }
    let mut normalized = corr.normalized.clone();
    for (&t, &y) in idx.iter().zip(&adjusted) {
        normalized[t] = y.exp();
    }
    let c0 = corr.values[0];
    Ok(CorrelationFunction {
        lags: corr.lags.clone(),
        values: normalized.iter().map(|n| n * c0).collect(),
        normalized,
        sample_size: corr.sample_size,
    })
}

/// Number of β windows per trading session, the default deseasonalization
/// period; `None` when a session holds fewer than two windows.
pub fn session_period(window: usize, session_length: usize) -> Option<usize> {
    if window == 0 {
        return None;
    }
    let p = (session_length as f64 / window as f64).round() as usize;
    (p >= 2).then_some(p)
}
