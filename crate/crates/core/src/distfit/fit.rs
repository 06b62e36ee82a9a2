//! Maximum-likelihood fits of the volatility laws to observed β samples.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

use super::kappa::{fit_kappa, KappaOptions};
use super::model::{DistributionModel, ModelKind};
use crate::error::{Error, Result};
use crate::numeric::ks::{ks_pvalue, ks_statistic};
use crate::numeric::optimize::brent;

pub const MIN_FIT_SAMPLES: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitStats {
    pub log_likelihood: f64,
    pub aic: f64,
    pub ks_statistic: f64,
    pub ks_pvalue: f64,
    pub sample_count: usize,
    pub free_params: usize,
    pub constrained_mean: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// A model together with its goodness-of-fit statistics. Serializes as
/// `{kind, params, fit_stats}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    #[serde(flatten)]
    pub model: DistributionModel,
    pub fit_stats: FitStats,
}

impl FittedModel {
    /// Computes the statistics of `model` against `samples`.
    pub fn evaluate(
        model: DistributionModel,
        samples: &[f64],
        free_params: usize,
        constrained_mean: bool,
    ) -> Self {
        let log_likelihood = samples.iter().map(|&b| model.ln_pdf(b)).sum::<f64>();
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let d = ks_statistic(&sorted, |b| model.cdf(b));
        Self::with_stats(
            model,
            log_likelihood,
            d,
            samples.len(),
            free_params,
            constrained_mean,
        )
    }

    pub(crate) fn with_stats(
        model: DistributionModel,
        log_likelihood: f64,
        ks: f64,
        n: usize,
        free_params: usize,
        constrained_mean: bool,
    ) -> Self {
        let mut notes = Vec::new();
        match model {
            DistributionModel::InvChi2 { d2, .. } if d2 <= 2.0 => {
                notes.push("variance of f(beta) is infinite (d2 <= 2)".to_string())
            }
            DistributionModel::Chi2 { d1, .. } if d1 <= 2.0 => {
                notes.push("marginal p(u) has infinite variance (d1 <= 2)".to_string())
            }
            _ => {}
        }
        Self {
            model,
            fit_stats: FitStats {
                log_likelihood,
                aic: 2.0 * free_params as f64 - 2.0 * log_likelihood,
                ks_statistic: ks,
                ks_pvalue: ks_pvalue(ks, n),
                sample_count: n,
                free_params,
                constrained_mean,
                notes,
            },
        }
    }
}

pub(crate) fn check_samples(samples: &[f64], needed: usize) -> Result<()> {
    if samples.len() < needed {
        return Err(Error::TooFewSamples {
            needed,
            got: samples.len(),
        });
    }
    if let Some(b) = samples.iter().find(|b| !(**b > 0.0) || !b.is_finite()) {
        return Err(Error::Domain(format!(
            "samples must be positive and finite, found {b}"
        )));
    }
    let first = samples[0];
    if samples.iter().all(|&b| b == first) {
        return Err(Error::OptimizationFailure(
            "samples have zero spread; no shape parameter is identifiable".into(),
        ));
    }
    Ok(())
}

/// Solves ln a − ψ(a) = s for the gamma shape a (s > 0).
fn gamma_shape_mle(s: f64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::OptimizationFailure(format!(
            "gamma shape equation has no solution (s = {s})"
        )));
    }
    let mut a = (3.0 - s + ((s - 3.0).powi(2) + 24.0 * s).sqrt()) / (12.0 * s);
    for _ in 0..100 {
        let f = a.ln() - digamma(a) - s;
        // d/da [ln a − ψ(a)] = 1/a − ψ'(a); ψ' by central difference of ψ
        let h = 1e-5 * a;
        let trigamma = (digamma(a + h) - digamma(a - h)) / (2.0 * h);
        let step = f / (1.0 / a - trigamma);
        let next = (a - step).max(0.5 * a);
        if (next - a).abs() <= 1e-13 * a {
            a = next;
            break;
        }
        a = next;
    }
    if !(a.is_finite() && a > 1e-6 && a < 1e8) {
        return Err(Error::OptimizationFailure(format!(
            "gamma shape estimate out of bounds ({a})"
        )));
    }
    Ok(a)
}

fn bounded_1d<F: Fn(f64) -> f64>(neg_ll: F, lo: f64, hi: f64, name: &str) -> Result<f64> {
    let (x, fx) = brent(&neg_ll, lo, hi, 1e-10, 500);
    if !fx.is_finite() {
        return Err(Error::OptimizationFailure(format!(
            "non-finite likelihood while fitting {name}"
        )));
    }
    let margin = 1e-6 * (hi - lo);
    if x - lo < margin || hi - x < margin {
        return Err(Error::OptimizationFailure(format!(
            "{name} hit its search bound ({:.4e})",
            x.exp()
        )));
    }
    Ok(x)
}

/// Fits one model family by maximum likelihood. With `constrain_mean` the
/// mean is pinned to the sample mean β₀ and only the shape is free.
pub fn fit_mle(samples: &[f64], kind: ModelKind, constrain_mean: bool) -> Result<FittedModel> {
    check_samples(samples, MIN_FIT_SAMPLES)?;
    // a fixed summation order makes the result independent of sample order
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let samples = &sorted[..];
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let mean_ln = samples.iter().map(|b| b.ln()).sum::<f64>() / n;

    let model = match kind {
        ModelKind::Chi2 => {
            // The unconstrained gamma MLE already reproduces the sample mean,
            // so both variants coincide.
            let a = gamma_shape_mle(mean.ln() - mean_ln)?;
            DistributionModel::chi2(2.0 * a, mean)
        }
        ModelKind::InvChi2 => {
            let sum_ln = n * mean_ln;
            let sum_inv: f64 = samples.iter().map(|b| 1.0 / b).sum();
            if constrain_mean {
                let neg_ll = |ln_d: f64| {
                    let a = 0.5 * ln_d.exp();
                    -(n * (mean.ln() - ln_gamma(a) + a * (a * mean).ln())
                        - (a + 2.0) * sum_ln
                        - a * mean * sum_inv)
                };
                let ln_d = bounded_1d(neg_ll, (1e-4f64).ln(), (1e4f64).ln(), "d2")?;
                DistributionModel::inv_chi2(ln_d.exp(), mean)
            } else {
                let mean_y = sum_inv / n;
                let k = gamma_shape_mle(mean_y.ln() + mean_ln)?;
                if k <= 1.0 {
                    return Err(Error::OptimizationFailure(format!(
                        "inverse-chi2 fit hit the d2 > 0 bound (shape of 1/beta = {k:.4})"
                    )));
                }
                let a = k - 1.0;
                let rate = k / mean_y;
                DistributionModel::inv_chi2(2.0 * a, rate / a)
            }
        }
        ModelKind::LogNormal => {
            let logs: Vec<f64> = samples.iter().map(|b| b.ln()).collect();
            if constrain_mean {
                let ln_b0 = mean.ln();
                let neg_ll = |ln_s: f64| {
                    let s = ln_s.exp();
                    let mu = ln_b0 - 0.5 * s * s;
                    n * ln_s + logs.iter().map(|l| (l - mu).powi(2)).sum::<f64>() / (2.0 * s * s)
                };
                let ln_s = bounded_1d(neg_ll, (1e-4f64).ln(), (50f64).ln(), "s")?;
                DistributionModel::lognormal_with_mean(ln_s.exp(), mean)
            } else {
                let var = logs.iter().map(|l| (l - mean_ln).powi(2)).sum::<f64>() / n;
                DistributionModel::lognormal(var.sqrt(), mean_ln)
            }
        }
        ModelKind::Mixed => return Ok(fit_kappa(samples, &KappaOptions::default())?.best),
    };
    model
        .validate()
        .map_err(|e| Error::OptimizationFailure(e.to_string()))?;
    let k = model.num_params(constrain_mean);
    Ok(FittedModel::evaluate(model, samples, k, constrain_mean))
}

/// The fit with the smallest KS statistic.
pub fn preferred(fits: &[FittedModel]) -> Option<&FittedModel> {
    fits.iter().min_by(|a, b| {
        a.fit_stats
            .ks_statistic
            .total_cmp(&b.fit_stats.ks_statistic)
    })
}
