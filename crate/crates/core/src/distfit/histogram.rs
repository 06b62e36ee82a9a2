use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::quantile_sorted;

/// Bin-width rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub enum Binning {
    /// Freedman–Diaconis width 2·IQR·n^{−1/3} on the linear axis.
    #[default]
    FreedmanDiaconis,
    /// Freedman–Diaconis applied to ln x (positive data only).
    LogFreedmanDiaconis,
    /// Fixed number of equal-width bins.
    Fixed(usize),
    /// Fixed number of bins equal-width in ln x.
    LogFixed(usize),
}

impl std::str::FromStr for Binning {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fd" => Ok(Binning::FreedmanDiaconis),
            "log" | "log-fd" => Ok(Binning::LogFreedmanDiaconis),
            _ => {
                if let Some(n) = s.strip_prefix("log:") {
                    n.parse().map(Binning::LogFixed).map_err(|_| bad_bins(s))
                } else {
                    s.parse().map(Binning::Fixed).map_err(|_| bad_bins(s))
                }
            }
        }
    }
}

fn bad_bins(s: &str) -> Error {
    Error::InvalidArgument(format!(
        "bins must be `fd`, `log`, `<n>` or `log:<n>`, got `{s}`"
    ))
}

const MAX_BINS: usize = 10_000;

/// Density-normalized histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub densities: Vec<f64>,
    pub count: usize,
}

/// Histogram of β samples (positive edges).
pub type BetaHistogram = Histogram;

impl Histogram {
    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]))
            .collect()
    }

    /// Σ density · width; 1 up to rounding.
    pub fn total_mass(&self) -> f64 {
        self.bin_edges
            .windows(2)
            .zip(&self.densities)
            .map(|(w, d)| d * (w[1] - w[0]))
            .sum()
    }

    /// `bin_left,bin_right,density` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["bin_left", "bin_right", "density"])?;
        for (e, d) in self.bin_edges.windows(2).zip(&self.densities) {
            w.write_record([e[0].to_string(), e[1].to_string(), d.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

fn fd_bin_count(sorted: &[f64]) -> usize {
    let n = sorted.len();
    let iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    let range = sorted[n - 1] - sorted[0];
    if iqr > 0.0 && range > 0.0 {
        let h = 2.0 * iqr / (n as f64).cbrt();
        ((range / h).ceil() as usize).clamp(1, MAX_BINS)
    } else {
        // Sturges
        ((n as f64).log2().ceil() as usize + 1).clamp(1, MAX_BINS)
    }
}

fn equal_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let (lo, hi) = if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    };
    let w = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..=bins).map(|i| lo + w * i as f64).collect();
    edges[bins] = hi;
    edges
}

/// Histogram of arbitrary real samples.
pub fn histogram_values(values: &[f64], binning: Binning) -> Result<Histogram> {
    if values.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: values.len(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "histogram input contains non-finite values".into(),
        ));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);

    let log_scale = matches!(binning, Binning::LogFreedmanDiaconis | Binning::LogFixed(_));
    if log_scale && lo <= 0.0 {
        return Err(Error::Domain(
            "logarithmic binning needs positive samples".into(),
        ));
    }
    let edges = match binning {
        Binning::FreedmanDiaconis => equal_edges(lo, hi, fd_bin_count(&sorted)),
        Binning::Fixed(n) => equal_edges(lo, hi, n.clamp(1, MAX_BINS)),
        Binning::LogFreedmanDiaconis | Binning::LogFixed(_) => {
            let logs: Vec<f64> = sorted.iter().map(|v| v.ln()).collect();
            let bins = match binning {
                Binning::LogFixed(n) => n.clamp(1, MAX_BINS),
                _ => fd_bin_count(&logs),
            };
            let mut e: Vec<f64> = equal_edges(logs[0], logs[logs.len() - 1], bins)
                .into_iter()
                .map(f64::exp)
                .collect();
            // keep the extreme samples inside despite exp/ln rounding
            e[0] = e[0].min(lo);
            let last = e.len() - 1;
            e[last] = e[last].max(hi);
            e
        }
    };

    let bins = edges.len() - 1;
    let mut counts = vec![0usize; bins];
    for &v in &sorted {
        let idx = edges
            .partition_point(|&e| e <= v)
            .saturating_sub(1)
            .min(bins - 1);
        counts[idx] += 1;
    }
    let n = sorted.len() as f64;
    let densities = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, w)| c as f64 / (n * (w[1] - w[0])))
        .collect();
    Ok(Histogram {
        bin_edges: edges,
        densities,
        count: sorted.len(),
    })
}

pub fn histogram(betas: &crate::windowing::BetaSeries, binning: Binning) -> Result<BetaHistogram> {
    histogram_values(&betas.betas, binning)
}
