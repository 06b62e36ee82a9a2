use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::{Distribution, Gamma, LogNormal, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use super::mixed;
use crate::error::{Error, Result};
use crate::numeric::optimize::bisect;

/// Regularized lower incomplete gamma P(a, x), total for x ∈ [0, ∞].
pub(crate) fn gamma_lr(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x.is_infinite() {
        1.0
    } else {
        statrs::function::gamma::gamma_lr(a, x)
    }
}

/// Regularized upper incomplete gamma Q(a, x).
pub(crate) fn gamma_ur(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x.is_infinite() {
        0.0
    } else {
        statrs::function::gamma::gamma_ur(a, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    Chi2,
    InvChi2,
    LogNormal,
    Mixed,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Chi2,
        ModelKind::InvChi2,
        ModelKind::LogNormal,
        ModelKind::Mixed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Chi2 => "Chi2",
            ModelKind::InvChi2 => "InvChi2",
            ModelKind::LogNormal => "LogNormal",
            ModelKind::Mixed => "Mixed",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "chi2" => Ok(ModelKind::Chi2),
            "invchi2" | "inv-chi2" | "inverse-chi2" => Ok(ModelKind::InvChi2),
            "lognormal" | "log-normal" => Ok(ModelKind::LogNormal),
            "mixed" => Ok(ModelKind::Mixed),
            other => Err(Error::InvalidArgument(format!(
                "unknown model kind `{other}`"
            ))),
        }
    }
}

/// Parameters of the κ-mixture β = κ·e^{X₀} + (1−κ)·chi_scale·χ²_n with
/// X₀ ~ N(x0_mu, x0_s²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedParams {
    pub kappa: f64,
    pub n_dof: u32,
    pub x0_mu: f64,
    pub x0_s: f64,
    pub chi_scale: f64,
}

impl MixedParams {
    /// Parameterization in which both components have mean `beta0`, leaving
    /// κ and the lognormal width as the only shape parameters.
    pub fn equal_means(kappa: f64, n_dof: u32, x0_s: f64, beta0: f64) -> Self {
        Self {
            kappa,
            n_dof,
            x0_mu: beta0.ln() - 0.5 * x0_s * x0_s,
            x0_s,
            chi_scale: beta0 / n_dof as f64,
        }
    }

    /// Location of the lognormal component κ·e^{X₀} in log space.
    pub(crate) fn lognormal_mu(&self) -> f64 {
        self.x0_mu + self.kappa.ln()
    }

    /// Gamma shape and scale of the (1−κ)·chi_scale·χ²_n component.
    pub(crate) fn gamma_shape_scale(&self) -> (f64, f64) {
        (
            0.5 * self.n_dof as f64,
            2.0 * (1.0 - self.kappa) * self.chi_scale,
        )
    }
}

/// Candidate volatility-parameter law f(β).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params")]
pub enum DistributionModel {
    Chi2 { d1: f64, beta0: f64 },
    InvChi2 { d2: f64, beta0: f64 },
    LogNormal { s: f64, mu: f64 },
    Mixed(MixedParams),
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

fn gamma_ln_pdf(x: f64, shape: f64, scale: f64) -> f64 {
    -ln_gamma(shape) - shape * scale.ln() + (shape - 1.0) * x.ln() - x / scale
}

fn lognormal_ln_pdf(x: f64, mu: f64, s: f64) -> f64 {
    let z = (x.ln() - mu) / s;
    -0.5 * z * z - x.ln() - s.ln() - 0.5 * (2.0 * PI).ln()
}

fn lognormal_cdf(x: f64, mu: f64, s: f64) -> f64 {
    0.5 * erfc(-(x.ln() - mu) / (s * SQRT_2))
}

/// Quantile of a CDF on (0, ∞) by bisection in log space.
pub(crate) fn quantile_log_bisect<F: Fn(f64) -> f64>(cdf: F, p: f64) -> f64 {
    let (lo, hi) = (-700.0f64, 600.0f64);
    bisect(|x| cdf(x.exp()) - p, lo, hi, 200).exp()
}

impl DistributionModel {
    /// χ² law with the given degrees of freedom and mean.
    pub fn chi2(d1: f64, beta0: f64) -> Self {
        DistributionModel::Chi2 { d1, beta0 }
    }

    pub fn inv_chi2(d2: f64, beta0: f64) -> Self {
        DistributionModel::InvChi2 { d2, beta0 }
    }

    pub fn lognormal(s: f64, mu: f64) -> Self {
        DistributionModel::LogNormal { s, mu }
    }

    /// Lognormal with μ chosen so that the mean is `beta0`.
    pub fn lognormal_with_mean(s: f64, beta0: f64) -> Self {
        DistributionModel::LogNormal {
            s,
            mu: beta0.ln() - 0.5 * s * s,
        }
    }

    /// Named parameter values, in declaration order.
    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            DistributionModel::Chi2 { d1, beta0 } => vec![("d1", d1), ("beta0", beta0)],
            DistributionModel::InvChi2 { d2, beta0 } => vec![("d2", d2), ("beta0", beta0)],
            DistributionModel::LogNormal { s, mu } => vec![("s", s), ("mu", mu)],
            DistributionModel::Mixed(p) => vec![
                ("kappa", p.kappa),
                ("n_dof", p.n_dof as f64),
                ("x0_mu", p.x0_mu),
                ("x0_s", p.x0_s),
                ("chi_scale", p.chi_scale),
            ],
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            DistributionModel::Chi2 { .. } => ModelKind::Chi2,
            DistributionModel::InvChi2 { .. } => ModelKind::InvChi2,
            DistributionModel::LogNormal { .. } => ModelKind::LogNormal,
            DistributionModel::Mixed(_) => ModelKind::Mixed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DistributionModel::Chi2 { d1, beta0 } => {
                positive("d1", d1)?;
                positive("beta0", beta0)
            }
            DistributionModel::InvChi2 { d2, beta0 } => {
                positive("d2", d2)?;
                positive("beta0", beta0)
            }
            DistributionModel::LogNormal { s, mu } => {
                positive("s", s)?;
                if mu.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Domain("mu must be finite".into()))
                }
            }
            DistributionModel::Mixed(p) => {
                if !(0.0..=1.0).contains(&p.kappa) {
                    return Err(Error::Domain(format!(
                        "kappa must lie in [0, 1], got {}",
                        p.kappa
                    )));
                }
                if p.n_dof < 1 {
                    return Err(Error::Domain("n_dof must be at least 1".into()));
                }
                positive("x0_s", p.x0_s)?;
                positive("chi_scale", p.chi_scale)?;
                if p.x0_mu.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Domain("x0_mu must be finite".into()))
                }
            }
        }
    }

    /// f(β), checked: β must be positive and the parameters valid.
    pub fn density(&self, beta: f64) -> Result<f64> {
        if !(beta > 0.0) {
            return Err(Error::Domain(format!("beta must be positive, got {beta}")));
        }
        self.validate()?;
        Ok(self.pdf(beta))
    }

    /// f(β) without validation; 0 for β ≤ 0.
    pub fn pdf(&self, beta: f64) -> f64 {
        if !(beta > 0.0) {
            return 0.0;
        }
        match self {
            DistributionModel::Mixed(p) => mixed::pdf(p, beta),
            _ => self.ln_pdf(beta).exp(),
        }
    }

    /// ln f(β); −∞ outside the support.
    pub fn ln_pdf(&self, beta: f64) -> f64 {
        if !(beta > 0.0) {
            return f64::NEG_INFINITY;
        }
        match *self {
            DistributionModel::Chi2 { d1, beta0 } => gamma_ln_pdf(beta, 0.5 * d1, 2.0 * beta0 / d1),
            DistributionModel::InvChi2 { d2, beta0 } => {
                let a = 0.5 * d2;
                let c = a * beta0;
                beta0.ln() - ln_gamma(a) + a * c.ln() - (a + 2.0) * beta.ln() - c / beta
            }
            DistributionModel::LogNormal { s, mu } => lognormal_ln_pdf(beta, mu, s),
            DistributionModel::Mixed(p) => mixed::pdf(&p, beta).ln(),
        }
    }

    pub fn cdf(&self, beta: f64) -> f64 {
        if !(beta > 0.0) {
            return 0.0;
        }
        match *self {
            DistributionModel::Chi2 { d1, beta0 } => gamma_lr(0.5 * d1, beta * d1 / (2.0 * beta0)),
            DistributionModel::InvChi2 { d2, beta0 } => {
                let a = 0.5 * d2;
                gamma_ur(a + 1.0, a * beta0 / beta)
            }
            DistributionModel::LogNormal { s, mu } => lognormal_cdf(beta, mu, s),
            DistributionModel::Mixed(p) => mixed::cdf(&p, beta),
        }
    }

    /// Analytic mean E[β].
    pub fn mean(&self) -> f64 {
        match *self {
            DistributionModel::Chi2 { beta0, .. } | DistributionModel::InvChi2 { beta0, .. } => {
                beta0
            }
            DistributionModel::LogNormal { s, mu } => (mu + 0.5 * s * s).exp(),
            DistributionModel::Mixed(p) => {
                p.kappa * (p.x0_mu + 0.5 * p.x0_s * p.x0_s).exp()
                    + (1.0 - p.kappa) * p.n_dof as f64 * p.chi_scale
            }
        }
    }

    /// E[β⁻¹], the variance of the superstatistical marginal; `None` when
    /// it diverges.
    pub fn inverse_mean(&self) -> Option<f64> {
        match *self {
            DistributionModel::Chi2 { d1, beta0 } => (d1 > 2.0).then(|| d1 / (beta0 * (d1 - 2.0))),
            // 1/β ~ Gamma(d2/2 + 1, rate d2·β0/2)
            DistributionModel::InvChi2 { d2, beta0 } => Some((d2 + 2.0) / (d2 * beta0)),
            DistributionModel::LogNormal { s, mu } => Some((-mu + 0.5 * s * s).exp()),
            DistributionModel::Mixed(_) => None,
        }
    }

    /// Whether Var[β] is finite.
    pub fn has_finite_variance(&self) -> bool {
        match *self {
            DistributionModel::InvChi2 { d2, .. } => d2 > 2.0,
            _ => true,
        }
    }

    pub fn num_params(&self, constrain_mean: bool) -> usize {
        match self {
            DistributionModel::Mixed(_) => {
                if constrain_mean {
                    2
                } else {
                    3
                }
            }
            _ => {
                if constrain_mean {
                    1
                } else {
                    2
                }
            }
        }
    }

    /// An interval holding all but `tail` probability on each side.
    pub fn support(&self, tail: f64) -> (f64, f64) {
        match *self {
            DistributionModel::LogNormal { s, mu } => {
                let z = statrs::function::erf::erfc_inv(2.0 * tail) * SQRT_2;
                ((mu - z * s).exp(), (mu + z * s).exp())
            }
            DistributionModel::Mixed(p) => mixed::support(&p, tail),
            _ => (
                quantile_log_bisect(|b| self.cdf(b), tail),
                quantile_log_bisect(|b| self.cdf(b), 1.0 - tail),
            ),
        }
    }

    /// One draw from f(β).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            DistributionModel::Chi2 { d1, beta0 } => Gamma::new(0.5 * d1, 2.0 * beta0 / d1)
                .expect("valid gamma")
                .sample(rng),
            DistributionModel::InvChi2 { d2, beta0 } => {
                let a = 0.5 * d2;
                1.0 / Gamma::new(a + 1.0, 1.0 / (a * beta0))
                    .expect("valid gamma")
                    .sample(rng)
            }
            DistributionModel::LogNormal { s, mu } => {
                LogNormal::new(mu, s).expect("valid lognormal").sample(rng)
            }
            DistributionModel::Mixed(p) => {
                let x0 = Normal::new(p.x0_mu, p.x0_s)
                    .expect("valid normal")
                    .sample(rng);
                let chi: f64 = (0..p.n_dof)
                    .map(|_| {
                        let z: f64 = rng.sample(rand_distr::StandardNormal);
                        z * z
                    })
                    .sum();
                p.kappa * x0.exp() + (1.0 - p.kappa) * p.chi_scale * chi
            }
        }
    }
}

pub(crate) mod component {
    //! Densities of the two mixture components, shared with the convolution code.
    use super::*;

    pub fn lognormal_pdf(x: f64, mu: f64, s: f64) -> f64 {
        if x > 0.0 {
            lognormal_ln_pdf(x, mu, s).exp()
        } else {
            0.0
        }
    }

    pub fn lognormal_cdf(x: f64, mu: f64, s: f64) -> f64 {
        if x > 0.0 {
            super::lognormal_cdf(x, mu, s)
        } else {
            0.0
        }
    }

    pub fn gamma_pdf(x: f64, shape: f64, scale: f64) -> f64 {
        if x > 0.0 {
            gamma_ln_pdf(x, shape, scale).exp()
        } else {
            0.0
        }
    }

    pub fn gamma_cdf(x: f64, shape: f64, scale: f64) -> f64 {
        if x > 0.0 {
            gamma_lr(shape, x / scale)
        } else {
            0.0
        }
    }

    pub fn lognormal_quantile(p: f64, mu: f64, s: f64) -> f64 {
        let z = -statrs::function::erf::erfc_inv(2.0 * p) * SQRT_2;
        (mu + z * s).exp()
    }

    pub fn gamma_quantile(p: f64, shape: f64, scale: f64) -> f64 {
        quantile_log_bisect(|x| gamma_lr(shape, x / scale), p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi2_two_dof_is_exponential() {
        let m = DistributionModel::chi2(2.0, 1.0);
        assert!((m.density(1.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert!((m.density(1e-12).unwrap() - 1.0).abs() < 1e-10);
        assert!((m.cdf(1.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn lognormal_mean_closed_form() {
        // e^{0.45 + 0.87²/2} = e^{0.82845}
        let m = DistributionModel::lognormal(0.87, 0.45);
        assert!((m.mean() - 0.82845f64.exp()).abs() < 1e-12);
        assert!((m.mean() - 2.29).abs() < 0.01);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(
            DistributionModel::chi2(2.0, 1.0).density(0.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            DistributionModel::chi2(-1.0, 1.0).density(1.0),
            Err(Error::Domain(_))
        ));
        let bad = DistributionModel::Mixed(MixedParams::equal_means(1.5, 4, 1.0, 1.0));
        assert!(bad.validate().is_err());
    }

    #[test]
    fn inv_chi2_cdf_matches_density() {
        let m = DistributionModel::inv_chi2(0.45, 2.19);
        let (a, b) = (0.7, 3.1);
        let r = crate::numeric::quad::integrate(|x| m.pdf(x), a, b, Default::default());
        assert!((r.value - (m.cdf(b) - m.cdf(a))).abs() < 1e-10);
    }

    #[test]
    fn support_brackets_mass() {
        for m in [
            DistributionModel::chi2(0.13, 6.33),
            DistributionModel::inv_chi2(2.83, 6.33),
            DistributionModel::lognormal(1.11, 1.23),
        ] {
            let (lo, hi) = m.support(1e-9);
            assert!((m.cdf(lo) - 1e-9).abs() < 1e-11, "{m:?}");
            assert!((m.cdf(hi) - (1.0 - 1e-9)).abs() < 1e-11, "{m:?}");
        }
    }

    #[test]
    fn model_kind_parsing() {
        assert_eq!(
            "lognormal".parse::<ModelKind>().unwrap(),
            ModelKind::LogNormal
        );
        assert_eq!("InvChi2".parse::<ModelKind>().unwrap(), ModelKind::InvChi2);
        assert!("f".parse::<ModelKind>().is_err());
    }

    #[test]
    fn json_shape() {
        let v = serde_json::to_value(DistributionModel::chi2(1.51, 2.19)).unwrap();
        assert_eq!(v["kind"], "Chi2");
        assert_eq!(v["params"]["d1"], 1.51);
    }
}
