//! Grid search for the lognormal/χ² mixing weight κ.
//!
//! At every κ both mixture components are tied to the sample mean β₀ (so
//! the overall mean is β₀ as well) and the lognormal width is fitted by
//! maximum likelihood. The κ with the smallest KS distance wins.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{check_samples, FittedModel};
use super::mixed::MixedTable;
use super::model::{DistributionModel, MixedParams};
use crate::error::{Error, Result};
use crate::numeric::ks::ks_statistic_from_cdf;
use crate::numeric::optimize::brent;

pub const MIN_KAPPA_SAMPLES: usize = 100;
pub const DEFAULT_N_DOF: u32 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaOptions {
    pub n_dof: u32,
    pub step: f64,
    /// Search interval for the lognormal width x0_s.
    pub x0_s_bounds: (f64, f64),
}

impl Default for KappaOptions {
    fn default() -> Self {
        Self {
            n_dof: DEFAULT_N_DOF,
            step: 0.01,
            x0_s_bounds: (0.02, 4.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaPoint {
    pub kappa: f64,
    pub x0_s: f64,
    pub log_likelihood: f64,
    pub ks: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaFit {
    pub best: FittedModel,
    /// KS distance for every grid κ.
    pub profile: Vec<KappaPoint>,
}

impl KappaFit {
    pub fn kappa(&self) -> f64 {
        match self.best.model {
            DistributionModel::Mixed(p) => p.kappa,
            _ => unreachable!("kappa fits always hold a mixed model"),
        }
    }
}

struct Evaluated {
    point: KappaPoint,
    params: MixedParams,
}

fn evaluate(sorted: &[f64], params: MixedParams) -> (f64, f64) {
    let table = MixedTable::new(params);
    let ll: f64 = sorted.iter().map(|&b| table.ln_pdf(b)).sum();
    let cdf: Vec<f64> = sorted.iter().map(|&b| table.cdf(b)).collect();
    (ll, ks_statistic_from_cdf(&cdf))
}

fn fit_at(sorted: &[f64], kappa: f64, beta0: f64, opts: &KappaOptions) -> Evaluated {
    let make = |x0_s: f64| MixedParams::equal_means(kappa, opts.n_dof, x0_s, beta0);
    let x0_s = if kappa <= 0.0 {
        1.0
    } else {
        let (lo, hi) = opts.x0_s_bounds;
        let neg_ll = |ln_s: f64| {
            let table = MixedTable::new(make(ln_s.exp()));
            let ll: f64 = sorted.iter().map(|&b| table.ln_pdf(b)).sum();
            if ll.is_finite() {
                -ll
            } else {
                f64::MAX
            }
        };
        brent(neg_ll, lo.ln(), hi.ln(), 1e-5, 100).0.exp()
    };
    let params = make(x0_s);
    let (log_likelihood, ks) = evaluate(sorted, params);
    Evaluated {
        point: KappaPoint {
            kappa,
            x0_s,
            log_likelihood,
            ks,
        },
        params,
    }
}

pub fn fit_kappa(samples: &[f64], opts: &KappaOptions) -> Result<KappaFit> {
    check_samples(samples, MIN_KAPPA_SAMPLES)?;
    if !(opts.step > 0.0 && opts.step <= 0.5) {
        return Err(Error::InvalidArgument(format!(
            "kappa grid step must lie in (0, 0.5], got {}",
            opts.step
        )));
    }
    if opts.n_dof < 1 {
        return Err(Error::InvalidArgument("n_dof must be at least 1".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let beta0 = sorted.iter().sum::<f64>() / sorted.len() as f64;

    let steps = (1.0 / opts.step).round() as usize;
    let grid: Vec<f64> = (0..=steps)
        .map(|i| (i as f64 * opts.step).min(1.0))
        .collect();
    let evaluated: Vec<Evaluated> = grid
        .par_iter()
        .map(|&k| fit_at(&sorted, k, beta0, opts))
        .collect();

    let best_idx = (0..evaluated.len())
        .min_by(|&i, &j| evaluated[i].point.ks.total_cmp(&evaluated[j].point.ks))
        .expect("grid is nonempty");
    let mut best = &evaluated[best_idx];

    // quadratic refinement through the neighbouring grid points
    let refined;
    if best_idx > 0 && best_idx + 1 < evaluated.len() {
        let (a, b, c) = (
            &evaluated[best_idx - 1].point,
            &evaluated[best_idx].point,
            &evaluated[best_idx + 1].point,
        );
        let denom = a.ks - 2.0 * b.ks + c.ks;
        if denom > 0.0 {
            let h = b.kappa - a.kappa;
            let vertex = b.kappa + 0.5 * h * (a.ks - c.ks) / denom;
            let vertex = vertex.clamp(a.kappa, c.kappa);
            refined = fit_at(&sorted, vertex, beta0, opts);
            if refined.point.ks < best.point.ks {
                best = &refined;
            }
        }
    }

    let free = if best.point.kappa > 0.0 { 2 } else { 1 };
    let fitted = FittedModel::with_stats(
        DistributionModel::Mixed(best.params),
        best.point.log_likelihood,
        best.point.ks,
        sorted.len(),
        free,
        true,
    );
    Ok(KappaFit {
        best: fitted,
        profile: evaluated.into_iter().map(|e| e.point).collect(),
    })
}
