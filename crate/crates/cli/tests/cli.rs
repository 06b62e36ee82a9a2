use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use superstat::distfit::ModelKind;
use superstat_cli::report::AnalysisReport;
use tempfile::TempDir;

fn superstat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_superstat"))
        .args(args)
        .env_remove("SUPERSTAT_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = superstat(args);
    assert!(
        out.status.success(),
        "superstat {} failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Simulates `ticks` ticks at mixing weight `kappa` and returns the price file.
fn simulated(dir: &TempDir, kappa: &str, ticks: &str) -> PathBuf {
    let out = dir.path().join(format!("sim-{kappa}"));
    ok(&[
        "simulate",
        "--seed",
        "5",
        "--ticks",
        ticks,
        "--kappa",
        kappa,
        "--out-dir",
        s(&out),
    ]);
    out.join("prices.csv")
}

fn analyze(input: &Path, out: &Path, extra: &[&str]) -> AnalysisReport {
    let mut args = vec!["analyze", s(input), "--out-dir", s(out)];
    args.extend_from_slice(extra);
    ok(&args);
    let text = fs::read_to_string(out.join("report.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn has_null(v: &Value) -> bool {
    match v {
        Value::Null => true,
        Value::Array(a) => a.iter().any(has_null),
        Value::Object(m) => m.values().any(has_null),
        _ => false,
    }
}

#[test]
fn report_follows_the_schema() {
    let dir = TempDir::new().unwrap();
    let prices = simulated(&dir, "0.5", "100000");
    let out = dir.path().join("report");
    let report = analyze(
        &prices,
        &out,
        &[
            "--kappa",
            "0.05",
            "--models",
            "chi2,invchi2,lognormal,mixed",
            "--kappa-taus",
            "1,2",
        ],
    );
    let schema: Value = serde_json::from_str(include_str!("../schema/report.schema.json")).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let value: Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let errors: Vec<String> = validator
        .iter_errors(&value)
        .map(|e| format!("{} at {}", e, e.instance_path))
        .collect();
    assert!(errors.is_empty(), "{errors:#?}");
    assert!(!has_null(&value));
    assert!(value.get("generated_at").is_none());

    let preferred = report
        .preferred_fit()
        .expect("preferred fit is among the models");
    let best = report
        .fits
        .models
        .iter()
        .map(|m| m.fit_stats.ks_statistic)
        .fold(f64::INFINITY, f64::min);
    assert_eq!(preferred.fit_stats.ks_statistic, best);
    let kappa = report.kappa.as_ref().expect("kappa section");
    assert_eq!(kappa.scan.as_ref().unwrap().rows.len(), 2);

    // a deliberately broken report is rejected
    let mut broken = value.clone();
    broken["fits"]["models"][0]["fit_stats"]["ks_statistic"] = Value::from(2.0);
    assert!(!validator.is_valid(&broken));
    let mut broken = value;
    broken["window"]["extra"] = Value::from(1);
    assert!(!validator.is_valid(&broken));
}

#[test]
fn timestamp_is_recorded_only_on_request() {
    let dir = TempDir::new().unwrap();
    let prices = simulated(&dir, "0.5", "40000");
    let report = analyze(
        &prices,
        &dir.path().join("r"),
        &["--no-amended", "--timestamp", "2026-01-01T00:00:00Z"],
    );
    assert_eq!(report.generated_at.as_deref(), Some("2026-01-01T00:00:00Z"));
    assert!(report.marginal_fits.skipped);
}

#[test]
fn chi2_data_prefers_chi2_and_lognormal_data_prefers_lognormal() {
    let dir = TempDir::new().unwrap();
    for (kappa, want) in [("0", ModelKind::Chi2), ("1", ModelKind::LogNormal)] {
        let prices = simulated(&dir, kappa, "400000");
        let report = analyze(
            &prices,
            &dir.path().join(format!("r{kappa}")),
            &["--no-amended"],
        );
        assert_eq!(report.fits.preferred, want, "kappa {kappa}");
    }
}

#[test]
fn missing_input_is_an_io_error_and_writes_nothing() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let missing = dir.path().join("nope.csv");
    for cmd in [
        "analyze",
        "returns",
        "window",
        "betas",
        "fit",
        "corr",
        "kappa-scan",
    ] {
        let o = superstat(&[cmd, s(&missing), "--out-dir", s(&out)]);
        assert_eq!(o.status.code(), Some(3), "{cmd}");
        assert!(!out.exists(), "{cmd} created the output directory");
    }
}

#[test]
fn failing_analysis_leaves_no_partial_output() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("flat.csv");
    let mut text = String::from("timestamp,price\n");
    for i in 0..500 {
        let date = format!(
            "{}-{:02}-{:02}",
            2000 + i / 336,
            (i / 28) % 12 + 1,
            i % 28 + 1
        );
        text.push_str(&format!("{date},10\n"));
    }
    fs::write(&input, text).unwrap();
    let out = dir.path().join("out");
    let o = superstat(&["analyze", s(&input), "--out-dir", s(&out)]);
    assert_eq!(o.status.code(), Some(4));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("variance"), "{stderr}");
    assert!(!out.exists());
}

fn intraday_csv(dir: &TempDir) -> PathBuf {
    let path = dir.path().join("intraday.csv");
    let mut text = String::from("timestamp,price\n");
    let mut p = 50.0f64;
    for day in 1..=20 {
        for minute in 0..300 {
            // deterministic wiggle
            p *= 1.0 + 0.001 * (((day * 300 + minute) * 7919 % 13) as f64 - 6.0) / 6.0;
            text.push_str(&format!(
                "2021-03-{day:02} {:02}:{:02},{p:.6}\n",
                9 + (30 + minute) / 60,
                (30 + minute) % 60
            ));
        }
    }
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn overnight_returns_are_dropped_for_intraday_input() {
    let dir = TempDir::new().unwrap();
    let input = intraday_csv(&dir);
    let out = dir.path().join("r");
    ok(&["returns", s(&input), "--tau", "1", "--out-dir", s(&out)]);
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(out.join("returns.json")).unwrap()).unwrap();
    assert_eq!(summary["resolution"], "intraday");
    assert_eq!(summary["dropped_overnight"], 19);
    assert_eq!(summary["returns"], 20 * 300 - 20);

    let out = dir.path().join("r3");
    ok(&["returns", s(&input), "--tau", "3", "--out-dir", s(&out)]);
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(out.join("returns.json")).unwrap()).unwrap();
    assert_eq!(summary["dropped_overnight"], 19 * 3);
}

#[test]
fn single_tau_scan_reports_a_note() {
    let dir = TempDir::new().unwrap();
    let prices = simulated(&dir, "0.5", "100000");
    let out = dir.path().join("scan");
    let o = ok(&[
        "kappa-scan",
        s(&prices),
        "--tau",
        "1",
        "--kappa",
        "0.1",
        "--out-dir",
        s(&out),
    ]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("no log-tau fit"), "{stdout}");
    let scan: Value =
        serde_json::from_str(&fs::read_to_string(out.join("kappa_scan.json")).unwrap()).unwrap();
    assert!(scan.get("fit").is_none());
    assert!(scan["note"].is_string());
    let csv = fs::read_to_string(out.join("kappa_scan.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("tau,kappa,ks"));
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn usage_and_config_errors_have_their_own_codes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    assert_eq!(superstat(&["analyze"]).status.code(), Some(2));
    assert_eq!(superstat(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        superstat(&["window", "x.csv", "--window-grid", "9:3:1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(superstat(&["--help"]).status.code(), Some(0));

    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"kappa": 2.0}"#).unwrap();
    let o = superstat(&["simulate", s(&cfg), "--out-dir", s(&out)]);
    assert_eq!(o.status.code(), Some(6));
    fs::write(&cfg, r#"{"kapa": 0.5}"#).unwrap();
    assert_eq!(
        superstat(&["simulate", s(&cfg), "--out-dir", s(&out)])
            .status
            .code(),
        Some(6)
    );
    assert!(!out.exists());
}

#[test]
fn simulate_echoes_the_resolved_config() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sim");
    let o = ok(&[
        "simulate",
        "--seed",
        "9",
        "--ticks",
        "1000",
        "--out-dir",
        s(&out),
    ]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    let json_end = stdout.find("\nwrote").unwrap();
    let echoed: Value = serde_json::from_str(&stdout[..json_end]).unwrap();
    let saved: Value =
        serde_json::from_str(&fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(echoed, saved);
    assert_eq!(saved["seed"], 9);
    assert!(saved["noise_sigma"].is_number());
    let prices = fs::read_to_string(out.join("prices.csv")).unwrap();
    assert_eq!(prices.lines().count(), 1 + 1001);
    let truth = fs::read_to_string(out.join("beta_truth.csv")).unwrap();
    assert_eq!(truth.lines().count(), 1 + 1000);
}

#[test]
fn stage_commands_write_their_artifacts() {
    let dir = TempDir::new().unwrap();
    let prices = simulated(&dir, "0.3", "60000");
    let cases: [(&str, &[&str]); 5] = [
        (
            "returns",
            &["returns.csv", "returns_hist.csv", "returns.json"],
        ),
        ("window", &["kurtosis_scan.csv", "window.json"]),
        ("betas", &["betas.csv", "beta_hist.csv", "betas.json"]),
        ("fit", &["beta_hist.csv", "beta_fits.csv", "fits.json"]),
        (
            "corr",
            &[
                "corr_u.csv",
                "corr_beta.csv",
                "decay_summary.csv",
                "correlations.json",
            ],
        ),
    ];
    for (cmd, files) in cases {
        let out = dir.path().join(cmd);
        ok(&[cmd, s(&prices), "--out-dir", s(&out)]);
        let mut written: Vec<String> = fs::read_dir(&out)
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        written.sort();
        let mut want: Vec<String> = files.iter().map(|f| f.to_string()).collect();
        want.sort();
        assert_eq!(written, want, "{cmd}");
    }
}

#[test]
fn out_dir_can_come_from_the_environment() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("env-out");
    let o = Command::new(env!("CARGO_BIN_EXE_superstat"))
        .args(["simulate", "--ticks", "500"])
        .env("SUPERSTAT_OUT_DIR", &out)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(out.join("prices.csv").is_file());
}
