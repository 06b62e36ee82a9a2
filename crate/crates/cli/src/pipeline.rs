//! Stage helpers shared by the subcommands.

use std::io::Write;

use superstat::correlation::{
    autocorrelation_with, deseasonalize, fit_decay, session_period, CorrelationFunction, DecayForm,
};
use superstat::distfit::{
    fit_kappa, fit_mle, histogram, histogram_values, preferred, Binning, FittedModel, KappaFit,
    KappaOptions, ModelKind,
};
use superstat::ingest::{load_csv, IngestConfig, PriceSeries, Resolution};
use superstat::marginal::{amended_fit, integrate_marginal, symmetric_grid, AmendedFit};
use superstat::returns::{log_returns, normalize, ReturnSeries};
use superstat::windowing::{extract_betas, find_optimal_window, BetaSeries, WindowScan};
use superstat::{Error, Result};

use crate::args::{CorrOpts, FitOpts, StageArgs};
use crate::report::{
    BetaStats, CorrelationSummary, FailedFit, FitSummary, InputSummary, KappaSummary,
    MarginalSummary, SeriesCorrelation, WindowSummary,
};

pub struct Loaded {
    pub series: PriceSeries,
    pub u: ReturnSeries,
    pub summary: InputSummary,
}

pub fn load(stage: &StageArgs) -> Result<Loaded> {
    let config = IngestConfig {
        resolution: stage.resolution.map(Into::into),
        source_label: None,
    };
    let series = load_csv(&stage.input, &config)?;
    let raw = log_returns(&series, stage.tau)?;
    let u = normalize(&raw)?;
    let summary = InputSummary {
        source: series.source_label.clone(),
        records: series.len(),
        resolution: series.resolution,
        tau: stage.tau,
        returns: u.len(),
        dropped_overnight: u.dropped_count,
        sessions: series.session_boundaries() + 1,
    };
    Ok(Loaded { series, u, summary })
}

pub struct Windowed {
    pub scan: Option<WindowScan>,
    pub summary: WindowSummary,
    pub betas: BetaSeries,
}

pub fn window(stage: &StageArgs, u: &ReturnSeries) -> Result<Windowed> {
    let grid = stage.window_grid.0.clone();
    let (scan, summary) = match stage.window {
        Some(t) => (
            None,
            WindowSummary {
                window: t as f64,
                uncertainty: 0.0,
                used: t,
                scanned: false,
                grid: Vec::new(),
            },
        ),
        None => {
            let scan = find_optimal_window(u, &grid, &stage.shifts)?;
            let c = scan
                .crossing
                .expect("find_optimal_window returns a crossing");
            let summary = WindowSummary {
                window: c.window,
                uncertainty: c.uncertainty,
                used: c.rounded(),
                scanned: true,
                grid,
            };
            (Some(scan), summary)
        }
    };
    let betas = extract_betas(&u.values, summary.used)?;
    Ok(Windowed {
        scan,
        summary,
        betas,
    })
}

pub fn beta_stats(betas: &BetaSeries) -> BetaStats {
    BetaStats {
        beta0: betas.beta0,
        count: betas.len(),
        window: betas.window_size,
    }
}

pub struct Fits {
    pub summary: FitSummary,
    pub kappa: Option<KappaFit>,
    pub kappa_options: KappaOptions,
}

pub fn fit_all(betas: &BetaSeries, opts: &FitOpts) -> Result<Fits> {
    let mut kinds: Vec<ModelKind> = Vec::new();
    for &k in &opts.models {
        if !kinds.contains(&k) {
            kinds.push(k);
        }
    }
    if opts.kappa.is_some() && !kinds.contains(&ModelKind::Mixed) {
        kinds.push(ModelKind::Mixed);
    }
    if kinds.is_empty() {
        return Err(Error::InvalidArgument("no models requested".into()));
    }
    let kappa_options = KappaOptions {
        n_dof: opts.n_dof,
        step: opts.kappa.unwrap_or(KappaOptions::default().step),
        ..KappaOptions::default()
    };
    let constrain = !opts.free_mean;
    let mut models = Vec::new();
    let mut failed = Vec::new();
    let mut kappa = None;
    for kind in kinds {
        let result = if kind == ModelKind::Mixed {
            fit_kappa(&betas.betas, &kappa_options).map(|k| {
                let best = k.best.clone();
                kappa = Some(k);
                best
            })
        } else {
            fit_mle(&betas.betas, kind, constrain)
        };
        match result {
            Ok(m) => models.push(m),
            // argument errors are the caller's fault, not a property of the data
            Err(e @ Error::InvalidArgument(_)) => return Err(e),
            Err(e) => failed.push(FailedFit {
                kind,
                error: e.to_string(),
            }),
        }
    }
    let best = preferred(&models).map(|m| m.model.kind()).ok_or_else(|| {
        Error::OptimizationFailure(format!("every model fit failed: {}", describe(&failed)))
    })?;
    Ok(Fits {
        summary: FitSummary {
            constrained_mean: constrain,
            models,
            preferred: best,
            failed,
        },
        kappa,
        kappa_options,
    })
}

fn describe(failed: &[FailedFit]) -> String {
    failed
        .iter()
        .map(|f| format!("{}: {}", f.kind.name(), f.error))
        .collect::<Vec<_>>()
        .join("; ")
}

pub fn kappa_summary(fit: &KappaFit, opts: &KappaOptions) -> KappaSummary {
    let x0_s = match fit.best.model {
        superstat::distfit::DistributionModel::Mixed(p) => p.x0_s,
        _ => f64::NAN,
    };
    KappaSummary {
        kappa: fit.kappa(),
        x0_s,
        ks: fit.best.fit_stats.ks_statistic,
        n_dof: opts.n_dof,
        step: opts.step,
        profile: fit.profile.clone(),
        scan: None,
    }
}

pub fn beta_hist_csv(betas: &BetaSeries, bins: Binning, out: &mut Vec<u8>) -> Result<()> {
    histogram(betas, bins)?.write_csv(out)
}

/// `beta,<Kind>...` fitted densities on a grid over the sample range.
pub fn beta_fits_csv(betas: &BetaSeries, fits: &[FittedModel], out: &mut Vec<u8>) -> Result<()> {
    const POINTS: usize = 200;
    let lo = betas.betas.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = betas.betas.iter().copied().fold(0.0, f64::max);
    let mut header = vec!["beta".to_string()];
    header.extend(fits.iter().map(|f| f.model.kind().name().to_string()));
    let mut rows = Vec::with_capacity(POINTS);
    for i in 0..POINTS {
        let b = lo + (hi - lo) * i as f64 / (POINTS - 1) as f64;
        let mut row = vec![b.to_string()];
        row.extend(fits.iter().map(|f| f.model.pdf(b).to_string()));
        rows.push(row);
    }
    write_rows(out, &header, &rows)
}

pub fn returns_hist_csv(u: &ReturnSeries, out: &mut Vec<u8>) -> Result<()> {
    histogram_values(&u.values, Binning::FreedmanDiaconis)?.write_csv(out)
}

pub fn amended_fits(u: &ReturnSeries, fits: &[FittedModel]) -> MarginalSummary {
    let mut done = Vec::new();
    let mut failed = Vec::new();
    for f in fits {
        let kind = f.model.kind();
        if kind == ModelKind::Mixed {
            continue;
        }
        match amended_fit(&u.values, kind, Some(&f.model)) {
            Ok(a) => done.push(a),
            Err(e) => failed.push(FailedFit {
                kind,
                error: e.to_string(),
            }),
        }
    }
    MarginalSummary {
        skipped: false,
        fits: done,
        failed,
    }
}

/// `u,<Kind>,<Kind>_amended...` integrated marginals on a symmetric grid.
/// Densities whose quadrature fails are left out and recorded in `failed`.
pub fn marginals_csv(
    u: &ReturnSeries,
    fits: &[FittedModel],
    amended: &[AmendedFit],
    failed: &mut Vec<FailedFit>,
    out: &mut Vec<u8>,
) -> Result<()> {
    let reach = u.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let grid = symmetric_grid(reach.clamp(5.0, 50.0), 401);
    let mut header = vec!["u".to_string()];
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut candidates: Vec<(String, ModelKind, &superstat::distfit::DistributionModel)> = fits
        .iter()
        .map(|f| (f.model.kind().name().to_string(), f.model.kind(), &f.model))
        .collect();
    candidates.extend(
        amended
            .iter()
            .map(|a| (format!("{}_amended", a.kind.name()), a.kind, &a.amended)),
    );
    for (name, kind, model) in candidates {
        match integrate_marginal(model, &grid) {
            Ok(m) => {
                header.push(name);
                columns.push(m.values);
            }
            Err(e) => failed.push(FailedFit {
                kind,
                error: format!("marginal {name}: {e}"),
            }),
        }
    }
    let rows: Vec<Vec<String>> = grid
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let mut row = vec![x.to_string()];
            row.extend(columns.iter().map(|c| c[i].to_string()));
            row
        })
        .collect();
    write_rows(out, &header, &rows)
}

pub struct Correlations {
    pub returns: CorrelationFunction,
    pub beta: CorrelationFunction,
    pub summary: CorrelationSummary,
}

pub fn correlations(loaded: &Loaded, betas: &BetaSeries, opts: &CorrOpts) -> Result<Correlations> {
    if opts.max_lag == 0 {
        return Err(Error::InvalidArgument("max-lag must be positive".into()));
    }
    let u = &loaded.u.values;
    let lag_u = opts.max_lag.min(u.len().saturating_sub(2));
    let lag_b = opts.max_lag.min(betas.len() / 2);
    let c_u = autocorrelation_with(u, lag_u, opts.estimator)?;
    let c_b = autocorrelation_with(&betas.betas, lag_b, opts.estimator)?;

    let period = opts.period.or_else(|| match loaded.series.resolution {
        Resolution::Intraday => {
            session_period(betas.window_size, loaded.series.median_session_length())
        }
        Resolution::Daily => None,
    });
    let returns = decay_entry(&c_u, None);
    let beta = decay_entry(&c_b, period);
    Ok(Correlations {
        returns: c_u,
        beta: c_b,
        summary: CorrelationSummary {
            estimator: opts.estimator,
            returns,
            beta,
        },
    })
}

fn decay_entry(corr: &CorrelationFunction, period: Option<usize>) -> SeriesCorrelation {
    let mut note = None;
    let mut used_period = None;
    let mut target = corr.clone();
    if let Some(p) = period {
        match deseasonalize(corr, p) {
            Ok(d) => {
                target = d;
                used_period = Some(p);
            }
            Err(e) => note = Some(format!("not deseasonalized: {e}")),
        }
    }
    let decay = match fit_decay(&target, &DecayForm::ALL) {
        Ok(d) => Some(d),
        Err(e) => {
            note = Some(match note {
                Some(n) => format!("{n}; no decay fit: {e}"),
                None => format!("no decay fit: {e}"),
            });
            None
        }
    };
    SeriesCorrelation {
        max_lag: corr.max_lag(),
        sample_size: corr.sample_size,
        period: used_period,
        decay,
        note,
    }
}

/// One row per fitted correlation in the layout of a per-share decay table.
pub fn decay_summary_csv(
    source: &str,
    sector: &str,
    resolution: Resolution,
    summary: &CorrelationSummary,
    out: &mut Vec<u8>,
) -> Result<()> {
    let header: Vec<String> = [
        "share",
        "sector",
        "resolution",
        "series",
        "form",
        "gamma",
        "alpha",
        "fit_start",
        "fit_end",
        "residual",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let res = match resolution {
        Resolution::Daily => "daily",
        Resolution::Intraday => "intraday",
    };
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut rows = Vec::new();
    for (name, entry) in [("returns", &summary.returns), ("beta", &summary.beta)] {
        if let Some(d) = &entry.decay {
            rows.push(vec![
                source.to_string(),
                sector.to_string(),
                res.to_string(),
                name.to_string(),
                format!("{:?}", d.form),
                opt(d.rate_gamma),
                opt(d.exponent_alpha),
                d.fit_range.0.to_string(),
                d.fit_range.1.to_string(),
                d.residual.to_string(),
            ]);
        }
    }
    write_rows(out, &header, &rows)
}

pub fn returns_csv(u: &ReturnSeries, out: &mut Vec<u8>) -> Result<()> {
    let header = vec!["index".to_string(), "u".to_string()];
    let rows: Vec<Vec<String>> = u
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| vec![i.to_string(), v.to_string()])
        .collect();
    write_rows(out, &header, &rows)
}

pub fn betas_csv(betas: &BetaSeries, out: &mut Vec<u8>) -> Result<()> {
    let header = vec!["k".to_string(), "beta".to_string()];
    let rows: Vec<Vec<String>> = betas
        .betas
        .iter()
        .enumerate()
        .map(|(i, v)| vec![i.to_string(), v.to_string()])
        .collect();
    write_rows(out, &header, &rows)
}

fn write_rows<W: Write>(out: W, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| Error::Serialization(e.to_string()))?;
    Ok(())
}
