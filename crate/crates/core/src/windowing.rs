//! Optimal superstatistical window size by the mean-kurtosis-equals-3
//! criterion, and extraction of the per-window volatility parameters β_k.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::returns::ReturnSeries;

pub const MIN_WINDOW: usize = 4;
pub const GAUSSIAN_KURTOSIS: f64 = 3.0;

/// Default candidate window sizes: 4, 6, …, 100.
pub fn default_window_grid() -> Vec<usize> {
    (4..=100).step_by(2).collect()
}

/// Translational offsets applied to the window tiling for each Δt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub enum Shifts {
    /// 0, ⌊Δt/4⌋, ⌊Δt/2⌋, ⌊3Δt/4⌋ (duplicates removed).
    #[default]
    Quarters,
    /// Explicit offsets; offsets ≥ Δt are skipped for that Δt.
    Fixed(Vec<usize>),
}

impl Shifts {
    pub fn offsets(&self, dt: usize) -> Vec<usize> {
        let mut v: Vec<usize> = match self {
            Shifts::Quarters => vec![0, dt / 4, dt / 2, 3 * dt / 4],
            Shifts::Fixed(list) => list.iter().copied().filter(|&s| s < dt).collect(),
        };
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Kurtosis `⟨u⁴⟩/⟨u²⟩²` of every complete window of length `dt` starting
/// at `shift`. Moments are taken about zero, not the window mean.
pub fn window_kurtosis(u: &[f64], dt: usize, shift: usize) -> Result<Vec<f64>> {
    if dt < MIN_WINDOW {
        return Err(Error::WindowTooSmall {
            size: dt,
            min: MIN_WINDOW,
        });
    }
    if shift >= dt {
        return Err(Error::InvalidArgument(format!(
            "shift {shift} must be smaller than the window size {dt}"
        )));
    }
    if u.len() < dt + shift {
        return Err(Error::SeriesTooShort {
            needed: dt + shift,
            got: u.len(),
        });
    }
    u[shift..]
        .chunks_exact(dt)
        .enumerate()
        .map(|(j, w)| {
            let (m2, m4) = w.iter().fold((0.0, 0.0), |(s2, s4), &x| {
                let x2 = x * x;
                (s2 + x2, s4 + x2 * x2)
            });
            if m2 == 0.0 {
                return Err(Error::DegenerateWindow { index: j });
            }
            let n = dt as f64;
            Ok((m4 / n) / ((m2 / n) * (m2 / n)))
        })
        .collect()
}

/// Mean kurtosis over windows for one Δt, per shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KurtosisRow {
    pub dt: usize,
    pub shifts: Vec<usize>,
    pub per_shift: Vec<f64>,
    pub window_counts: Vec<usize>,
    /// Shift-ensemble mean of κ̄.
    pub mean: f64,
    /// Across-shift sample standard deviation (δκ̄); 0 for a single shift.
    pub shift_std: f64,
}

pub fn mean_kurtosis(u: &[f64], dt: usize, shifts: &[usize]) -> Result<KurtosisRow> {
    if shifts.is_empty() {
        return Err(Error::InvalidArgument("no shifts given".into()));
    }
    let cells: Vec<(f64, usize)> = shifts
        .par_iter()
        .map(|&s| {
            let k = window_kurtosis(u, dt, s)?;
            Ok((k.iter().sum::<f64>() / k.len() as f64, k.len()))
        })
        .collect::<Result<_>>()?;
    Ok(row_from_cells(dt, shifts.to_vec(), cells))
}

fn row_from_cells(dt: usize, shifts: Vec<usize>, cells: Vec<(f64, usize)>) -> KurtosisRow {
    let per_shift: Vec<f64> = cells.iter().map(|c| c.0).collect();
    let window_counts = cells.iter().map(|c| c.1).collect();
    let m = per_shift.iter().sum::<f64>() / per_shift.len() as f64;
    let shift_std = if per_shift.len() > 1 {
        (per_shift.iter().map(|k| (k - m) * (k - m)).sum::<f64>() / (per_shift.len() - 1) as f64)
            .sqrt()
    } else {
        0.0
    };
    KurtosisRow {
        dt,
        shifts,
        per_shift,
        window_counts,
        mean: m,
        shift_std,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    /// Estimated optimal window size T, in ticks.
    pub window: f64,
    /// Half-width of the uncertainty interval.
    pub uncertainty: f64,
}

impl Crossing {
    /// Integer window used for β extraction.
    pub fn rounded(&self) -> usize {
        (self.window.round() as usize).max(MIN_WINDOW)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowScan {
    pub rows: Vec<KurtosisRow>,
    pub crossing: Option<Crossing>,
}

impl WindowScan {
    pub fn window_sizes(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.dt).collect()
    }

    /// Shift-averaged κ̄(Δt) curve.
    pub fn mean_curve(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.mean).collect()
    }

    /// `dt,shift,kurtosis` rows, one per (Δt, shift) cell.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["dt", "shift", "kurtosis"])?;
        for row in &self.rows {
            for (s, k) in row.shifts.iter().zip(&row.per_shift) {
                w.write_record([row.dt.to_string(), s.to_string(), k.to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Evaluates κ̄ for every (Δt, shift) cell. Candidates too long for the
/// series are skipped.
pub fn scan_kurtosis(
    u: &ReturnSeries,
    candidates: &[usize],
    shifts: &Shifts,
) -> Result<WindowScan> {
    if candidates.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least two candidate window sizes".into(),
        ));
    }
    if candidates.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "candidate window sizes must be strictly ascending".into(),
        ));
    }
    if let Some(&small) = candidates.iter().find(|&&d| d < MIN_WINDOW) {
        return Err(Error::WindowTooSmall {
            size: small,
            min: MIN_WINDOW,
        });
    }
    let n = u.values.len();
    let cells: Vec<(usize, usize)> = candidates
        .iter()
        .filter(|&&dt| dt <= n)
        .flat_map(|&dt| {
            shifts
                .offsets(dt)
                .into_iter()
                .filter(move |&s| dt + s <= n)
                .map(move |s| (dt, s))
        })
        .collect();
    if cells.is_empty() {
        return Err(Error::SeriesTooShort {
            needed: candidates[0],
            got: n,
        });
    }
    let results: Vec<(f64, usize)> = cells
        .par_iter()
        .map(|&(dt, s)| {
            let k = window_kurtosis(&u.values, dt, s)?;
            Ok((k.iter().sum::<f64>() / k.len() as f64, k.len()))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut i = 0;
    while i < cells.len() {
        let dt = cells[i].0;
        let mut j = i;
        while j < cells.len() && cells[j].0 == dt {
            j += 1;
        }
        let shifts_used = cells[i..j].iter().map(|c| c.1).collect();
        rows.push(row_from_cells(dt, shifts_used, results[i..j].to_vec()));
        i = j;
    }
    Ok(WindowScan {
        rows,
        crossing: None,
    })
}

/// Linear interpolation of the first sign change of κ̄(Δt) − 3.
pub fn locate_crossing(rows: &[KurtosisRow]) -> Result<Crossing> {
    for pair in rows.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let (ea, eb) = (a.mean - GAUSSIAN_KURTOSIS, b.mean - GAUSSIAN_KURTOSIS);
        if ea == 0.0 {
            return Ok(Crossing {
                window: a.dt as f64,
                uncertainty: 0.5 * (b.dt - a.dt) as f64,
            });
        }
        if ea.signum() != eb.signum() {
            let spacing = (b.dt - a.dt) as f64;
            let slope = (b.mean - a.mean) / spacing;
            let window = a.dt as f64 - ea / slope;
            let delta_kappa = 0.5 * (a.shift_std + b.shift_std);
            return Ok(Crossing {
                window,
                uncertainty: 0.5 * spacing + delta_kappa / slope.abs(),
            });
        }
    }
    let closest = rows
        .iter()
        .min_by(|x, y| (x.mean - 3.0).abs().total_cmp(&(y.mean - 3.0).abs()))
        .ok_or(Error::InvalidArgument("empty kurtosis scan".into()))?;
    Err(Error::NoCrossing {
        closest_dt: closest.dt,
        closest_kurtosis: closest.mean,
    })
}

pub fn find_optimal_window(
    u: &ReturnSeries,
    candidates: &[usize],
    shifts: &Shifts,
) -> Result<WindowScan> {
    let mut scan = scan_kurtosis(u, candidates, shifts)?;
    scan.crossing = Some(locate_crossing(&scan.rows)?);
    Ok(scan)
}

/// Per-window inverse variances for one fixed window size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaSeries {
    pub betas: Vec<f64>,
    pub window_size: usize,
    pub beta0: f64,
}

impl BetaSeries {
    pub fn new(betas: Vec<f64>, window_size: usize) -> Self {
        let beta0 = betas.iter().sum::<f64>() / betas.len() as f64;
        Self {
            betas,
            window_size,
            beta0,
        }
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }
}

/// β_k = 1 / s²_k with s²_k the (T−1)-normalized sample variance of window
/// k. The trailing partial window is discarded.
pub fn extract_betas(u: &[f64], window: usize) -> Result<BetaSeries> {
    if window < MIN_WINDOW {
        return Err(Error::WindowTooSmall {
            size: window,
            min: MIN_WINDOW,
        });
    }
    if u.len() < window {
        return Err(Error::SeriesTooShort {
            needed: window,
            got: u.len(),
        });
    }
    let betas = u
        .chunks_exact(window)
        .enumerate()
        .map(|(k, w)| {
            let m = w.iter().sum::<f64>() / window as f64;
            let ss: f64 = w.iter().map(|x| (x - m) * (x - m)).sum();
            let var = ss / (window - 1) as f64;
            if var <= 0.0 {
                Err(Error::DegenerateWindow { index: k })
            } else {
                Ok(1.0 / var)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BetaSeries::new(betas, window))
}
