//! Batch front end: every subcommand runs its whole computation in memory
//! and writes its artifacts only once nothing can fail any more.

pub mod args;
pub mod output;
pub mod pipeline;
pub mod report;

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use clap::Parser;
use serde::Serialize;

use superstat::distfit::KappaOptions;
use superstat::ingest::{self, load_csv, IngestConfig};
use superstat::synth::{
    kappa_scan, simulate, simulate_multiscale, MultiScaleConfig, ScanOptions, SynthConfig,
};
use superstat::{Error, Result};

use args::{AnalyzeArgs, Cli, Command, CorrArgs, FitArgs, KappaScanArgs, SimulateArgs, StageArgs};
use output::{exit, exit_code, io_error, Artifacts};
use report::{AnalysisReport, MarginalSummary, REPORT_VERSION};

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                exit::USAGE
            } else {
                exit::OK
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Analyze(a) => analyze(&a).map(|_| ()),
        Command::Simulate(a) => simulate_cmd(&a),
        Command::KappaScan(a) => kappa_scan_cmd(&a),
        Command::Returns(a) => returns_cmd(&a),
        Command::Window(a) => window_cmd(&a),
        Command::Betas(a) => betas_cmd(&a),
        Command::Fit(a) => fit_cmd(&a),
        Command::Corr(a) => corr_cmd(&a),
    }
}

fn finish(artifacts: Artifacts, dir: &Path) -> Result<()> {
    let written = artifacts.commit(dir)?;
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

pub fn analyze(a: &AnalyzeArgs) -> Result<AnalysisReport> {
    let mut fit_opts = a.fit.clone();
    if !a.kappa_taus.is_empty() && fit_opts.kappa.is_none() {
        fit_opts.kappa = Some(KappaOptions::default().step);
    }
    let loaded = pipeline::load(&a.stage)?;
    let w = pipeline::window(&a.stage, &loaded.u)?;
    let fits = pipeline::fit_all(&w.betas, &fit_opts)?;
    let mut marginal = if a.no_amended {
        MarginalSummary {
            skipped: true,
            fits: Vec::new(),
            failed: Vec::new(),
        }
    } else {
        pipeline::amended_fits(&loaded.u, &fits.summary.models)
    };
    let corr = pipeline::correlations(&loaded, &w.betas, &a.corr)?;

    let mut files = Artifacts::default();
    if let Some(scan) = &w.scan {
        files.csv("kurtosis_scan.csv", |o| scan.write_csv(o))?;
    }
    files.csv("beta_hist.csv", |o| {
        pipeline::beta_hist_csv(&w.betas, a.stage.bins, o)
    })?;
    files.csv("beta_fits.csv", |o| {
        pipeline::beta_fits_csv(&w.betas, &fits.summary.models, o)
    })?;
    files.csv("returns_hist.csv", |o| {
        pipeline::returns_hist_csv(&loaded.u, o)
    })?;
    let mut failed = std::mem::take(&mut marginal.failed);
    files.csv("marginals.csv", |o| {
        pipeline::marginals_csv(
            &loaded.u,
            &fits.summary.models,
            &marginal.fits,
            &mut failed,
            o,
        )
    })?;
    marginal.failed = failed;
    files.csv("corr_u.csv", |o| corr.returns.write_csv(o))?;
    files.csv("corr_beta.csv", |o| corr.beta.write_csv(o))?;
    files.csv("decay_summary.csv", |o| {
        pipeline::decay_summary_csv(
            &loaded.summary.source,
            &a.corr.sector,
            loaded.series.resolution,
            &corr.summary,
            o,
        )
    })?;

    let mut kappa = fits
        .kappa
        .as_ref()
        .map(|k| pipeline::kappa_summary(k, &fits.kappa_options));
    if !a.kappa_taus.is_empty() {
        let opts = ScanOptions {
            window_grid: a.stage.window_grid.0.clone(),
            shifts: a.stage.shifts.clone(),
            kappa: fits.kappa_options.clone(),
            overlapping: false,
        };
        let scan = kappa_scan(&loaded.series, &a.kappa_taus, &opts)?;
        files.csv("kappa_scan.csv", |o| scan.write_csv(o))?;
        if let Some(k) = kappa.as_mut() {
            k.scan = Some(scan);
        }
    }

    let report = AnalysisReport {
        report_version: REPORT_VERSION.to_string(),
        generated_at: a.timestamp.clone(),
        input_summary: loaded.summary.clone(),
        window: w.summary.clone(),
        beta_stats: pipeline::beta_stats(&w.betas),
        fits: fits.summary,
        marginal_fits: marginal,
        correlations: corr.summary,
        kappa,
    };
    files.json("report.json", &report)?;
    println!(
        "T = {:.2} ± {:.2}, {} betas, beta0 = {:.6}, preferred {}",
        report.window.window,
        report.window.uncertainty,
        report.beta_stats.count,
        report.beta_stats.beta0,
        report.fits.preferred.name()
    );
    finish(files, &a.stage.out.out_dir)?;
    Ok(report)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_error(path, e))
}

fn echo<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn simulate_cmd(a: &SimulateArgs) -> Result<()> {
    let mut files = Artifacts::default();
    if a.multiscale {
        if a.kappa.is_some() {
            return Err(Error::InvalidArgument(
                "--kappa does not apply to the two-scale generator".into(),
            ));
        }
        let mut cfg = match &a.config {
            Some(p) => MultiScaleConfig::from_json(&read_text(p)?)?,
            None => MultiScaleConfig::default(),
        };
        if let Some(seed) = a.seed {
            cfg.walk.seed = seed;
            cfg.level.seed = seed.wrapping_add(1);
        }
        if let Some(t) = a.ticks {
            cfg.walk.total_ticks = t;
            cfg.level.total_ticks = t;
        }
        cfg.walk = cfg.walk.resolved();
        cfg.level = cfg.level.resolved();
        let series = simulate_multiscale(&cfg)?;
        files.csv("prices.csv", |o| ingest::write_csv(&series, o))?;
        files.json("config.json", &cfg)?;
        echo(&cfg)?;
    } else {
        let mut cfg = match &a.config {
            Some(p) => SynthConfig::from_json(&read_text(p)?)?,
            None => SynthConfig::default(),
        };
        if let Some(seed) = a.seed {
            cfg.seed = seed;
        }
        if let Some(t) = a.ticks {
            cfg.total_ticks = t;
        }
        if let Some(k) = a.kappa {
            cfg.kappa = k;
        }
        let out = simulate(&cfg)?;
        files.csv("prices.csv", |o| ingest::write_csv(&out.price_series(), o))?;
        files.csv("returns.csv", |o| out.write_returns(o))?;
        files.csv("beta_truth.csv", |o| out.write_beta_truth(o))?;
        files.json("config.json", &out.model_truth)?;
        echo(&out.model_truth)?;
    }
    finish(files, &a.out.out_dir)
}

fn kappa_scan_cmd(a: &KappaScanArgs) -> Result<()> {
    let config = IngestConfig {
        resolution: a.resolution.map(Into::into),
        source_label: None,
    };
    let series = load_csv(&a.input, &config)?;
    let opts = ScanOptions {
        window_grid: a.window_grid.0.clone(),
        shifts: a.shifts.clone(),
        kappa: KappaOptions {
            n_dof: a.n_dof,
            step: a.kappa,
            ..KappaOptions::default()
        },
        overlapping: a.overlapping,
    };
    let scan = kappa_scan(&series, &a.tau, &opts)?;
    let mut files = Artifacts::default();
    files.csv("kappa_scan.csv", |o| scan.write_csv(o))?;
    files.json("kappa_scan.json", &scan)?;
    for r in &scan.rows {
        println!(
            "tau {:>5}  kappa {:.4}  ks {:.5}  T {}",
            r.tau, r.kappa, r.ks, r.window
        );
    }
    match (&scan.fit, &scan.note) {
        (Some(f), _) => println!(
            "kappa = {:.4} {} {:.4}·log(tau)",
            f.intercept,
            if f.slope < 0.0 { '-' } else { '+' },
            f.slope.abs()
        ),
        (None, Some(note)) => println!("{note}"),
        (None, None) => {}
    }
    finish(files, &a.out.out_dir)
}

fn returns_cmd(a: &StageArgs) -> Result<()> {
    let loaded = pipeline::load(a)?;
    let mut files = Artifacts::default();
    files.csv("returns.csv", |o| pipeline::returns_csv(&loaded.u, o))?;
    files.csv("returns_hist.csv", |o| {
        pipeline::returns_hist_csv(&loaded.u, o)
    })?;
    files.json("returns.json", &loaded.summary)?;
    println!(
        "{} returns at tau = {} ({} dropped at session boundaries)",
        loaded.u.len(),
        a.tau,
        loaded.u.dropped_count
    );
    finish(files, &a.out.out_dir)
}

fn window_cmd(a: &StageArgs) -> Result<()> {
    let loaded = pipeline::load(a)?;
    let w = pipeline::window(a, &loaded.u)?;
    let mut files = Artifacts::default();
    if let Some(scan) = &w.scan {
        files.csv("kurtosis_scan.csv", |o| scan.write_csv(o))?;
    }
    files.json("window.json", &w.summary)?;
    println!("T = {:.2} ± {:.2}", w.summary.window, w.summary.uncertainty);
    finish(files, &a.out.out_dir)
}

fn betas_cmd(a: &StageArgs) -> Result<()> {
    let loaded = pipeline::load(a)?;
    let w = pipeline::window(a, &loaded.u)?;
    let mut files = Artifacts::default();
    files.csv("betas.csv", |o| pipeline::betas_csv(&w.betas, o))?;
    files.csv("beta_hist.csv", |o| {
        pipeline::beta_hist_csv(&w.betas, a.bins, o)
    })?;
    files.json("betas.json", &pipeline::beta_stats(&w.betas))?;
    println!(
        "{} betas at T = {}, beta0 = {:.6}",
        w.betas.len(),
        w.betas.window_size,
        w.betas.beta0
    );
    finish(files, &a.out.out_dir)
}

#[derive(Serialize)]
struct FitOutput<'a> {
    beta_stats: report::BetaStats,
    fits: &'a report::FitSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    kappa: Option<report::KappaSummary>,
}

fn fit_cmd(a: &FitArgs) -> Result<()> {
    let loaded = pipeline::load(&a.stage)?;
    let w = pipeline::window(&a.stage, &loaded.u)?;
    let fits = pipeline::fit_all(&w.betas, &a.fit)?;
    let mut files = Artifacts::default();
    files.csv("beta_hist.csv", |o| {
        pipeline::beta_hist_csv(&w.betas, a.stage.bins, o)
    })?;
    files.csv("beta_fits.csv", |o| {
        pipeline::beta_fits_csv(&w.betas, &fits.summary.models, o)
    })?;
    files.json(
        "fits.json",
        &FitOutput {
            beta_stats: pipeline::beta_stats(&w.betas),
            fits: &fits.summary,
            kappa: fits
                .kappa
                .as_ref()
                .map(|k| pipeline::kappa_summary(k, &fits.kappa_options)),
        },
    )?;
    for m in &fits.summary.models {
        let params: Vec<String> = m
            .model
            .params()
            .iter()
            .map(|(n, v)| format!("{n} = {v:.6}"))
            .collect();
        println!(
            "{:<9} {}  KS {:.5}",
            m.model.kind().name(),
            params.join(", "),
            m.fit_stats.ks_statistic
        );
    }
    println!("preferred {}", fits.summary.preferred.name());
    finish(files, &a.stage.out.out_dir)
}

fn corr_cmd(a: &CorrArgs) -> Result<()> {
    let loaded = pipeline::load(&a.stage)?;
    let w = pipeline::window(&a.stage, &loaded.u)?;
    let corr = pipeline::correlations(&loaded, &w.betas, &a.corr)?;
    let mut files = Artifacts::default();
    files.csv("corr_u.csv", |o| corr.returns.write_csv(o))?;
    files.csv("corr_beta.csv", |o| corr.beta.write_csv(o))?;
    files.csv("decay_summary.csv", |o| {
        pipeline::decay_summary_csv(
            &loaded.summary.source,
            &a.corr.sector,
            loaded.series.resolution,
            &corr.summary,
            o,
        )
    })?;
    files.json("correlations.json", &corr.summary)?;
    for (name, entry) in [
        ("returns", &corr.summary.returns),
        ("beta", &corr.summary.beta),
    ] {
        match (&entry.decay, &entry.note) {
            (Some(d), _) => println!(
                "{name}: {:?}, gamma = {}, alpha = {}, lags {}..={}",
                d.form,
                d.rate_gamma.map_or("-".into(), |g| format!("{g:.5}")),
                d.exponent_alpha.map_or("-".into(), |x| format!("{x:.5}")),
                d.fit_range.0,
                d.fit_range.1
            ),
            (None, Some(n)) => println!("{name}: {n}"),
            (None, None) => {}
        }
    }
    finish(files, &a.stage.out.out_dir)
}
