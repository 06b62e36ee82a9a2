//! Density of the κ-mixture β = A + B with A = κ·e^{X₀} lognormal and
//! B = (1−κ)·chi_scale·χ²_n gamma distributed, by numerical convolution.
//!
//! Both halves of the convolution integral are evaluated in log space so the
//! lognormal peak and the gamma singularity at zero (n = 1) stay resolved.

use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use super::model::MixedParams;
use super::model::{component, gamma_lr};
use crate::numeric::quad::{integrate, QuadOptions};

const TAIL: f64 = 1e-16;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

fn opts() -> QuadOptions {
    QuadOptions {
        rel_tol: 1e-10,
        abs_tol: 1e-300,
        max_intervals: 400,
    }
}

#[derive(Debug, Clone, Copy)]
struct Components {
    mu_a: f64,
    s_a: f64,
    shape_b: f64,
    scale_b: f64,
    ln_norm_b: f64,
    ln_a_lo: f64,
    ln_b_lo: f64,
}

impl Components {
    fn new(p: &MixedParams) -> Self {
        let mu_a = p.lognormal_mu();
        let (shape_b, scale_b) = p.gamma_shape_scale();
        // small-x asymptote F(x) ≈ (x/θ)^k / (k Γ(k))
        let ln_b_lo = scale_b.ln() + (TAIL.ln() + shape_b.ln() + ln_gamma(shape_b)) / shape_b;
        Self {
            mu_a,
            s_a: p.x0_s,
            shape_b,
            scale_b,
            ln_norm_b: -ln_gamma(shape_b) - shape_b * scale_b.ln(),
            ln_a_lo: mu_a - 9.0 * p.x0_s,
            ln_b_lo,
        }
    }

    /// Density of ln A at x (so f_A(e^x)·e^x).
    fn log_a_density(&self, x: f64) -> f64 {
        let z = (x - self.mu_a) / self.s_a;
        (-0.5 * z * z - LN_SQRT_2PI).exp() / self.s_a
    }

    /// Density of ln B at y (so f_B(e^y)·e^y).
    fn log_b_density(&self, y: f64) -> f64 {
        (self.ln_norm_b + self.shape_b * y - y.exp() / self.scale_b).exp()
    }

    fn a_pdf(&self, a: f64) -> f64 {
        component::lognormal_pdf(a, self.mu_a, self.s_a)
    }

    fn b_pdf(&self, b: f64) -> f64 {
        if b > 0.0 {
            (self.ln_norm_b + (self.shape_b - 1.0) * b.ln() - b / self.scale_b).exp()
        } else {
            0.0
        }
    }

    fn pdf(&self, z: f64) -> f64 {
        let half = (0.5 * z).ln();
        let mut total = 0.0;
        if half > self.ln_a_lo {
            total += integrate(
                |x| self.log_a_density(x) * self.b_pdf(z - x.exp()),
                self.ln_a_lo,
                half,
                opts(),
            )
            .value;
        }
        if half > self.ln_b_lo {
            total += integrate(
                |y| self.log_b_density(y) * self.a_pdf(z - y.exp()),
                self.ln_b_lo,
                half,
                opts(),
            )
            .value;
        }
        total.max(0.0)
    }

    fn cdf(&self, z: f64) -> f64 {
        let half = (0.5 * z).ln();
        let mut total = 0.0;
        if half > self.ln_a_lo {
            total += integrate(
                |x| self.log_a_density(x) * gamma_lr(self.shape_b, (z - x.exp()) / self.scale_b),
                self.ln_a_lo,
                half,
                opts(),
            )
            .value;
        }
        if half > self.ln_b_lo {
            total += integrate(
                |y| {
                    let w = y.exp();
                    self.a_pdf(z - w) * gamma_lr(self.shape_b, w / self.scale_b) * w
                },
                self.ln_b_lo,
                half,
                opts(),
            )
            .value;
        }
        total.clamp(0.0, 1.0)
    }
}

pub(crate) fn pdf(p: &MixedParams, z: f64) -> f64 {
    if !(z > 0.0) {
        return 0.0;
    }
    if p.kappa >= 1.0 {
        return component::lognormal_pdf(z, p.x0_mu, p.x0_s);
    }
    if p.kappa <= 0.0 {
        let (k, theta) = p.gamma_shape_scale();
        return component::gamma_pdf(z, k, theta);
    }
    Components::new(p).pdf(z)
}

pub(crate) fn cdf(p: &MixedParams, z: f64) -> f64 {
    if !(z > 0.0) {
        return 0.0;
    }
    if p.kappa >= 1.0 {
        return component::lognormal_cdf(z, p.x0_mu, p.x0_s);
    }
    if p.kappa <= 0.0 {
        let (k, theta) = p.gamma_shape_scale();
        return component::gamma_cdf(z, k, theta);
    }
    Components::new(p).cdf(z)
}

pub(crate) fn support(p: &MixedParams, tail: f64) -> (f64, f64) {
    let (k, theta) = p.gamma_shape_scale();
    if p.kappa >= 1.0 {
        return (
            component::lognormal_quantile(tail, p.x0_mu, p.x0_s),
            component::lognormal_quantile(1.0 - tail, p.x0_mu, p.x0_s),
        );
    }
    if p.kappa <= 0.0 {
        return (
            component::gamma_quantile(tail, k, theta),
            component::gamma_quantile(1.0 - tail, k, theta),
        );
    }
    let mu_a = p.lognormal_mu();
    let lo = component::lognormal_quantile(tail, mu_a, p.x0_s)
        .min(component::gamma_quantile(tail, k, theta));
    let hi = component::lognormal_quantile(1.0 - tail, mu_a, p.x0_s)
        + component::gamma_quantile(1.0 - tail, k, theta);
    (lo, hi)
}

/// Tabulated ln f and CDF of one mixture on a log-spaced grid, for fast
/// repeated evaluation during fitting.
#[derive(Debug, Clone)]
pub struct MixedTable {
    params: MixedParams,
    ln_lo: f64,
    step: f64,
    ln_pdf: crate::numeric::UniformCubic,
    cdf: Vec<f64>,
    raw_total: f64,
}

impl MixedTable {
    pub const GRID: usize = 512;

    pub fn new(params: MixedParams) -> Self {
        let (lo, hi) = support(&params, 1e-12);
        let (ln_lo, ln_hi) = (lo.ln(), hi.ln());
        let step = (ln_hi - ln_lo) / (Self::GRID - 1) as f64;
        let xs: Vec<f64> = (0..Self::GRID).map(|i| ln_lo + step * i as f64).collect();
        let dens: Vec<f64> = xs.par_iter().map(|&x| pdf(&params, x.exp())).collect();
        let ln_vals: Vec<f64> = dens.iter().map(|d| d.ln().max(-700.0)).collect();
        let ln_pdf = crate::numeric::UniformCubic::new(ln_lo, step, ln_vals);

        let mut table = Self {
            params,
            ln_lo,
            step,
            ln_pdf,
            cdf: Vec::with_capacity(Self::GRID),
            raw_total: 0.0,
        };
        let mut acc = 0.0;
        table.cdf.push(0.0);
        for x in xs.windows(2) {
            acc += table.cell_mass(x[0], x[1]);
            table.cdf.push(acc);
        }
        if acc > 0.0 {
            for c in &mut table.cdf {
                *c /= acc;
            }
        }
        table.raw_total = acc;
        table
    }

    /// Density of ln β from the interpolant.
    fn log_space_density(&self, x: f64) -> f64 {
        (self.ln_pdf.eval(x) + x).exp()
    }

    /// Simpson's rule on [x0, x1] in log space.
    fn cell_mass(&self, x0: f64, x1: f64) -> f64 {
        let mid = 0.5 * (x0 + x1);
        (x1 - x0) / 6.0
            * (self.log_space_density(x0)
                + 4.0 * self.log_space_density(mid)
                + self.log_space_density(x1))
    }

    pub fn params(&self) -> &MixedParams {
        &self.params
    }

    /// The tabulated interval in ln β.
    pub fn ln_range(&self) -> (f64, f64) {
        (self.ln_lo, self.ln_pdf.end())
    }

    pub fn ln_pdf(&self, z: f64) -> f64 {
        if !(z > 0.0) {
            return f64::NEG_INFINITY;
        }
        let x = z.ln();
        if self.ln_pdf.contains(x) {
            self.ln_pdf.eval(x)
        } else {
            pdf(&self.params, z).ln()
        }
    }

    pub fn cdf(&self, z: f64) -> f64 {
        if !(z > 0.0) {
            return 0.0;
        }
        let pos = (z.ln() - self.ln_lo) / self.step;
        if pos <= 0.0 {
            return 0.0;
        }
        let last = (Self::GRID - 1) as f64;
        if pos >= last {
            return 1.0;
        }
        let i = pos.floor() as usize;
        let x0 = self.ln_lo + self.step * i as f64;
        if self.raw_total > 0.0 {
            (self.cdf[i] + self.cell_mass(x0, z.ln()) / self.raw_total).min(1.0)
        } else {
            0.0
        }
    }
}
