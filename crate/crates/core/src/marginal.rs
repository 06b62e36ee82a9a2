//! Superstatistical return densities p(u) = ∫ p(u|β) f(β) dβ.
//!
//! All integrals run over x = ln β. The range covers f's quantiles
//! [1e-14, 1 − 1e-14] and is pre-split into unit-width segments so the
//! Gaussian-weighted peak, which moves with u, is always resolved.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::distfit::{DistributionModel, MixedTable, ModelKind};
use crate::error::{Error, Result};
use crate::numeric::optimize::nelder_mead;
use crate::numeric::quad::{integrate_pieces, QuadOptions, QuadResult};
use crate::numeric::UniformCubic;

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const TAIL: f64 = 1e-14;
/// Relative accuracy every grid point must reach.
pub const QUAD_REL_TOL: f64 = 1e-8;
pub const MIN_AMENDED_SAMPLES: usize = 1000;
const MAX_EXTENSION: usize = 200;
const EXTENSION_TOL: f64 = 1e-14;

/// p(u|β) = √(β/2π)·exp(−βu²/2).
pub fn gaussian_conditional(u: f64, beta: f64) -> Result<f64> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Domain(format!(
            "beta must be positive and finite, got {beta}"
        )));
    }
    Ok((0.5 * (beta.ln() - LN_2PI) - 0.5 * beta * u * u).exp())
}

/// Closed form of the χ² marginal: a Student-t with d1 degrees of freedom
/// and location-scale 1/√β₀, i.e. ∝ (1 + β₀u²/d1)^{−(d1+1)/2}.
pub fn student_t_marginal(u: f64, d1: f64, beta0: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let a = 0.5 * d1;
    let ln_norm = ln_gamma(a + 0.5) - ln_gamma(a) - 0.5 * (std::f64::consts::PI * d1 / beta0).ln();
    (ln_norm - (a + 0.5) * (beta0 * u * u / d1).ln_1p()).exp()
}

enum LogDensity {
    Model(DistributionModel),
    Table(Box<MixedTable>),
}

/// The density of ln β together with its integration segments.
struct LogBeta {
    density: LogDensity,
    breaks: Vec<f64>,
    opts: QuadOptions,
}

impl LogBeta {
    fn new(model: &DistributionModel, rel_tol: f64) -> Result<Self> {
        model.validate()?;
        let (density, lo, hi) = match model {
            DistributionModel::Mixed(p) => {
                let table = MixedTable::new(*p);
                let (lo, hi) = table.ln_range();
                (LogDensity::Table(Box::new(table)), lo, hi)
            }
            m => {
                let (lo, hi) = m.support(TAIL);
                (LogDensity::Model(*m), lo.ln(), hi.ln())
            }
        };
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::QuadratureFailure {
                point: f64::NAN,
                error: f64::INFINITY,
            });
        }
        let pieces = (hi - lo).ceil().max(1.0) as usize;
        let width = (hi - lo) / pieces as f64;
        let mut breaks: Vec<f64> = (0..=pieces).map(|i| lo + width * i as f64).collect();
        breaks[pieces] = hi;
        Ok(Self {
            density,
            breaks,
            opts: QuadOptions {
                rel_tol,
                abs_tol: 0.0,
                max_intervals: 4000,
            },
        })
    }

    /// ln(f(e^x)·e^x).
    fn ln_density(&self, x: f64) -> f64 {
        let beta = x.exp();
        match &self.density {
            LogDensity::Model(m) => m.ln_pdf(beta) + x,
            LogDensity::Table(t) => t.ln_pdf(beta) + x,
        }
    }

    /// ∫ exp(ln_weight(x)) f(e^x) e^x dx.
    fn integrate<F: Fn(f64) -> f64>(&self, ln_weight: F) -> QuadResult {
        let g = |x: f64| {
            let v = (ln_weight(x) + self.ln_density(x)).exp();
            if v.is_nan() {
                0.0
            } else {
                v
            }
        };
        integrate_pieces(g, &self.extended_breaks(&g), self.opts)
    }

    /// Adds unit segments below the range while the integrand's left tail,
    /// extrapolated as e^{a·x}, still holds non-negligible mass. Weights
    /// that fall with β push the integrand below f's own lower quantile.
    fn extended_breaks<G: Fn(f64) -> f64>(&self, g: &G) -> Vec<f64> {
        let scale = self.breaks.iter().map(|&x| g(x)).fold(0.0, f64::max);
        let mut head = Vec::new();
        let mut x0 = self.breaks[0];
        let mut v0 = g(x0);
        for _ in 0..MAX_EXTENSION {
            if !(v0 > 0.0) || scale <= 0.0 {
                break;
            }
            let v_next = g(x0 + 1.0);
            let slope = (v_next / v0).ln();
            if slope > 0.0 && v0 / slope <= EXTENSION_TOL * scale {
                break;
            }
            x0 -= 1.0;
            head.push(x0);
            v0 = g(x0);
        }
        head.reverse();
        head.extend_from_slice(&self.breaks);
        head
    }
    fn pdf(&self, u: f64) -> QuadResult {
        let half_u2 = 0.5 * u * u;
        self.integrate(|x| 0.5 * (x - LN_2PI) - half_u2 * x.exp())
    }

    /// P(|u| > cut).
    fn two_sided_tail(&self, cut: f64) -> QuadResult {
        let c = cut.abs() / std::f64::consts::SQRT_2;
        self.integrate(|x| erfc(c * (0.5 * x).exp()).ln())
    }
}

fn checked(r: QuadResult, point: f64) -> Result<(f64, f64)> {
    let rel = if r.value > 0.0 {
        r.error / r.value
    } else {
        0.0
    };
    if !r.value.is_finite() || (!r.converged && rel > QUAD_REL_TOL) {
        return Err(Error::QuadratureFailure { point, error: rel });
    }
    Ok((r.value, rel))
}

/// p(u) at a single point.
pub fn marginal_pdf(model: &DistributionModel, u: f64) -> Result<f64> {
    let lb = LogBeta::new(model, 1e-10)?;
    checked(lb.pdf(u.abs()), u).map(|(v, _)| v)
}

/// P(|u| > cut) under the marginal, by the analytic Gaussian tail
/// erfc(cut·√(β/2)) integrated against f(β).
pub fn two_sided_tail(model: &DistributionModel, cut: f64) -> Result<f64> {
    let lb = LogBeta::new(model, 1e-10)?;
    checked(lb.two_sided_tail(cut), cut).map(|(v, _)| v.min(1.0))
}

/// p(u) tabulated on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalDensity {
    pub model: DistributionModel,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Worst relative error estimate over the grid.
    pub quadrature_tol: f64,
    /// Probability outside [grid[0], grid[last]].
    pub tail_mass: f64,
}

impl MarginalDensity {
    /// ∫ p du across the grid: Simpson on uniform grids with an even number
    /// of intervals, trapezoid otherwise.
    pub fn grid_mass(&self) -> f64 {
        let g = &self.grid;
        let n = g.len();
        if n < 2 {
            return 0.0;
        }
        let h = (g[n - 1] - g[0]) / (n - 1) as f64;
        let uniform = g
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(1.0));
        if uniform && n % 2 == 1 && n >= 3 {
            let inner: f64 = self.values[1..n - 1]
                .iter()
                .enumerate()
                .map(|(i, v)| if i % 2 == 0 { 4.0 * v } else { 2.0 * v })
                .sum();
            h / 3.0 * (self.values[0] + inner + self.values[n - 1])
        } else {
            g.windows(2)
                .zip(self.values.windows(2))
                .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
                .sum()
        }
    }

    /// Grid mass plus the analytic tail mass.
    pub fn total_mass(&self) -> f64 {
        self.grid_mass() + self.tail_mass
    }

    /// `u,p` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["u", "p"])?;
        for (u, p) in self.grid.iter().zip(&self.values) {
            w.write_record([u.to_string(), p.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Symmetric uniform grid on [−half_width, half_width] with `points` nodes.
pub fn symmetric_grid(half_width: f64, points: usize) -> Vec<f64> {
    let points = points.max(2);
    (0..points)
        .map(|i| -half_width + 2.0 * half_width * i as f64 / (points - 1) as f64)
        .collect()
}

pub fn integrate_marginal(model: &DistributionModel, u_grid: &[f64]) -> Result<MarginalDensity> {
    if u_grid.is_empty() {
        return Err(Error::InvalidArgument("u grid is empty".into()));
    }
    if let Some(u) = u_grid.iter().find(|u| !u.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "u grid contains non-finite value {u}"
        )));
    }
    let lb = LogBeta::new(model, 1e-10)?;
    // evaluate at |u| so the result is exactly symmetric
    let points: Vec<(f64, f64)> = u_grid
        .par_iter()
        .map(|&u| checked(lb.pdf(u.abs()), u))
        .collect::<Result<_>>()?;

    let lo = u_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = u_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // P(u > c) for one side
    let upper = |c: f64| -> Result<f64> {
        let t = checked(lb.two_sided_tail(c), c)?.0.min(1.0);
        Ok(if c >= 0.0 { 0.5 * t } else { 1.0 - 0.5 * t })
    };
    let tail_mass = upper(hi)? + upper(-lo)?;

    Ok(MarginalDensity {
        model: *model,
        grid: u_grid.to_vec(),
        values: points.iter().map(|p| p.0).collect(),
        quadrature_tol: points.iter().map(|p| p.1).fold(0.0, f64::max),
        tail_mass,
    })
}

/// ln p(|u|) interpolated in t = ln(1 + |u|), for likelihood sums over
/// many samples.
struct LnMarginalTable {
    table: UniformCubic,
}

impl LnMarginalTable {
    const POINTS: usize = 161;

    fn new(model: &DistributionModel, u_max: f64) -> Result<Self> {
        let lb = LogBeta::new(model, 1e-8)?;
        let t_max = u_max.ln_1p().max(1e-6);
        let step = t_max / (Self::POINTS - 1) as f64;
        let values: Vec<f64> = (0..Self::POINTS)
            .into_par_iter()
            .map(|i| {
                let u = (step * i as f64).exp_m1();
                let r = lb.pdf(u);
                if r.value > 0.0 && r.value.is_finite() {
                    r.value.ln()
                } else {
                    -745.0
                }
            })
            .collect();
        Ok(Self {
            table: UniformCubic::new(0.0, step, values),
        })
    }

    fn log_likelihood(&self, u: &[f64]) -> f64 {
        u.iter().map(|x| self.table.eval(x.abs().ln_1p())).sum()
    }
}

/// Relative gap between the amended and the f(β)-level value of one
/// parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGap {
    pub name: String,
    pub direct: f64,
    pub amended: f64,
    pub relative_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub parameters: Vec<ParamGap>,
    /// ∫|p_amended − p_direct| du over the sample range.
    pub marginal_l1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmendedFit {
    pub kind: ModelKind,
    pub amended: DistributionModel,
    pub log_likelihood: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direct: Option<DistributionModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direct_log_likelihood: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divergence: Option<Divergence>,
}

fn to_model(kind: ModelKind, theta: &[f64]) -> Option<DistributionModel> {
    let m = match kind {
        ModelKind::Chi2 => DistributionModel::chi2(theta[0].exp(), theta[1].exp()),
        ModelKind::InvChi2 => DistributionModel::inv_chi2(theta[0].exp(), theta[1].exp()),
        ModelKind::LogNormal => DistributionModel::lognormal(theta[0].exp(), theta[1]),
        ModelKind::Mixed => return None,
    };
    // keep shapes where the quadrature stays well conditioned
    let shape = theta[0].exp();
    if !(1e-2..=1e3).contains(&shape) || !theta[1].is_finite() || theta[1].abs() > 50.0 {
        return None;
    }
    Some(m)
}

fn from_model(m: &DistributionModel) -> Option<Vec<f64>> {
    match *m {
        DistributionModel::Chi2 { d1, beta0 } => Some(vec![d1.ln(), beta0.ln()]),
        DistributionModel::InvChi2 { d2, beta0 } => Some(vec![d2.ln(), beta0.ln()]),
        DistributionModel::LogNormal { s, mu } => Some(vec![s.ln(), mu]),
        DistributionModel::Mixed(_) => None,
    }
}

fn default_start(kind: ModelKind) -> Vec<f64> {
    // shapes of moderate tail weight, scaled so that E[1/β] = 1
    match kind {
        ModelKind::Chi2 => vec![4f64.ln(), 2f64.ln()],
        ModelKind::InvChi2 => vec![4f64.ln(), 1.5f64.ln()],
        _ => vec![0.5f64.ln(), 0.125],
    }
}

/// Refits f's parameters by maximizing the likelihood of the returns under
/// p(u), independently of any β-level fit. `reference` is the β-level fit
/// to compare against; it also seeds the search when of the same kind.
pub fn amended_fit(
    u: &[f64],
    kind: ModelKind,
    reference: Option<&DistributionModel>,
) -> Result<AmendedFit> {
    if u.len() < MIN_AMENDED_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_AMENDED_SAMPLES,
            got: u.len(),
        });
    }
    if kind == ModelKind::Mixed {
        return Err(Error::InvalidArgument(
            "the amended fit covers the Chi2, InvChi2 and LogNormal models".into(),
        ));
    }
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(
            "returns contain non-finite values".into(),
        ));
    }
    let u_max = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let neg_ll = |theta: &[f64]| -> f64 {
        match to_model(kind, theta).map(|m| LnMarginalTable::new(&m, u_max)) {
            Some(Ok(t)) => -t.log_likelihood(u),
            _ => f64::INFINITY,
        }
    };
    let reference = reference.filter(|r| r.kind() == kind);
    let start = reference
        .and_then(from_model)
        .unwrap_or_else(|| default_start(kind));

    let mut best = nelder_mead(&neg_ll, &start, &[0.3, 0.3], 1e-8, 400);
    // one restart guards against a collapsed simplex
    let again = nelder_mead(&neg_ll, &best.x, &[0.1, 0.1], 1e-9, 400);
    if again.value <= best.value {
        best = again;
    }
    if !best.value.is_finite() {
        return Err(Error::OptimizationFailure(format!(
            "amended {} fit found no finite likelihood",
            kind.name()
        )));
    }
    let amended = to_model(kind, &best.x).expect("finite optimum lies inside the parameter box");

    let (direct_log_likelihood, divergence) = match reference {
        Some(direct) => {
            let ll = LnMarginalTable::new(direct, u_max)?.log_likelihood(u);
            let parameters = amended
                .params()
                .into_iter()
                .zip(direct.params())
                .map(|((name, a), (_, d))| ParamGap {
                    name: name.to_string(),
                    direct: d,
                    amended: a,
                    relative_gap: (a - d).abs() / d.abs().max(f64::MIN_POSITIVE),
                })
                .collect();
            let grid = symmetric_grid(u_max, 401);
            let pa = integrate_marginal(&amended, &grid)?;
            let pd = integrate_marginal(direct, &grid)?;
            let h = grid[1] - grid[0];
            let diffs: Vec<f64> = pa
                .values
                .iter()
                .zip(&pd.values)
                .map(|(a, b)| (a - b).abs())
                .collect();
            let marginal_l1 =
                h * (diffs.iter().sum::<f64>() - 0.5 * (diffs[0] + diffs[diffs.len() - 1]));
            (
                Some(ll),
                Some(Divergence {
                    parameters,
                    marginal_l1,
                }),
            )
        }
        None => (None, None),
    };

    Ok(AmendedFit {
        kind,
        amended,
        log_likelihood: -best.value,
        direct: reference.copied(),
        direct_log_likelihood,
        divergence,
    })
}
