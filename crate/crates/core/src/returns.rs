//! Lag-τ log returns with session-boundary removal, and standardization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{PriceSeries, Resolution};
use crate::numeric::{mean, population_variance};

/// Raw log returns `log(S_{i+τ}/S_i)` before standardization.
#[derive(Debug, Clone, PartialEq)]
pub struct RawReturns {
    pub values: Vec<f64>,
    /// Index `i` of the earlier price of each returned pair.
    pub start_index: Vec<usize>,
    pub lag_tau: usize,
    pub dropped_count: usize,
}

impl RawReturns {
    /// Wraps an already computed return sequence (lag 1, nothing dropped).
    pub fn from_values(values: Vec<f64>) -> Self {
        let start_index = (0..values.len()).collect();
        Self {
            values,
            start_index,
            lag_tau: 1,
            dropped_count: 0,
        }
    }
}

/// Normalized returns `u_i` (zero mean, unit population variance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    pub values: Vec<f64>,
    pub lag_tau: usize,
    pub raw_mean: f64,
    pub raw_std: f64,
    pub dropped_count: usize,
}

impl ReturnSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Pairs `(i, i+τ)` whose session ids differ are omitted at intraday
/// resolution; daily series keep every pair.
pub fn log_returns(series: &PriceSeries, tau: usize) -> Result<RawReturns> {
    if tau == 0 {
        return Err(Error::InvalidArgument("tau must be positive".into()));
    }
    let n = series.records.len();
    if n <= tau {
        return Err(Error::SeriesTooShort {
            needed: tau + 1,
            got: n,
        });
    }
    let check_sessions = series.resolution == Resolution::Intraday;
    let mut values = Vec::with_capacity(n - tau);
    let mut start_index = Vec::with_capacity(n - tau);
    let mut dropped = 0;
    for i in 0..n - tau {
        let (a, b) = (&series.records[i], &series.records[i + tau]);
        if check_sessions && a.session_id != b.session_id {
            dropped += 1;
            continue;
        }
        values.push((b.price / a.price).ln());
        start_index.push(i);
    }
    Ok(RawReturns {
        values,
        start_index,
        lag_tau: tau,
        dropped_count: dropped,
    })
}

/// Standardizes with population moments of the retained returns.
pub fn normalize(raw: &RawReturns) -> Result<ReturnSeries> {
    let n = raw.values.len();
    if n < 2 {
        return Err(Error::SeriesTooShort { needed: 2, got: n });
    }
    let m = mean(&raw.values);
    let var = population_variance(&raw.values);
    if !(var > 0.0) || !var.is_finite() {
        return Err(Error::ZeroVariance);
    }
    let sd = var.sqrt();
    let mut values: Vec<f64> = raw.values.iter().map(|r| (r - m) / sd).collect();
    // Second pass removes the residual rounding offset so the output moments
    // hold to near machine precision even for large N.
    let m2 = mean(&values);
    let s2 = population_variance(&values).sqrt();
    for v in &mut values {
        *v = (*v - m2) / s2;
    }
    Ok(ReturnSeries {
        values,
        lag_tau: raw.lag_tau,
        raw_mean: m,
        raw_std: sd,
        dropped_count: raw.dropped_count,
    })
}
