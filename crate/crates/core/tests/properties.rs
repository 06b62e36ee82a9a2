use proptest::prelude::*;

use superstat::correlation::{autocorrelation, autocorrelation_with, Estimator};
use superstat::distfit::{
    fit_mle, histogram_values, Binning, DistributionModel, MixedParams, ModelKind,
};
use superstat::ingest::{assign_sessions, PriceRecord, PriceSeries, Resolution};
use superstat::marginal::{marginal_pdf, student_t_marginal};
use superstat::returns::{log_returns, normalize, RawReturns};
use superstat::windowing::{extract_betas, window_kurtosis};

fn series(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, len)
}

fn nonconstant(xs: &[f64]) -> bool {
    xs.iter().any(|&x| (x - xs[0]).abs() > 1e-6)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn kurtosis_is_scale_invariant(
        xs in series(40..400),
        c in prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3],
        dt in 4usize..40,
    ) {
        let windows_ok = xs.chunks(dt).all(|w| w.iter().any(|&v| v.abs() > 1e-9));
        prop_assume!(windows_ok);
        let scaled: Vec<f64> = xs.iter().map(|x| c * x).collect();
        let a = window_kurtosis(&xs, dt, 0).unwrap();
        let b = window_kurtosis(&scaled, dt, 0).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (p, q) in a.iter().zip(&b) {
            prop_assert!(close(*p, *q, 1e-9), "{} vs {}", p, q);
            prop_assert!(*p >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn autocorrelation_is_shift_invariant(xs in series(20..300), c in -100.0f64..100.0) {
        let max_lag = xs.len() / 3;
        let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
        let a = autocorrelation(&xs, max_lag).unwrap();
        let b = autocorrelation(&shifted, max_lag).unwrap();
        for (p, q) in a.values.iter().zip(&b.values) {
            prop_assert!((p - q).abs() <= 1e-9, "{} vs {}", p, q);
        }
    }

    #[test]
    fn autocorrelation_scales_quadratically(xs in series(20..300), c in prop_oneof![-50.0f64..-0.02, 0.02f64..50.0]) {
        prop_assume!(nonconstant(&xs));
        let max_lag = xs.len() / 3;
        let scaled: Vec<f64> = xs.iter().map(|x| c * x).collect();
        let a = autocorrelation(&xs, max_lag).unwrap();
        let b = autocorrelation(&scaled, max_lag).unwrap();
        let scale = a.values[0];
        for (p, q) in a.values.iter().zip(&b.values) {
            prop_assert!((c * c * p - q).abs() <= 1e-9 * c * c * scale);
        }
        for (p, q) in a.normalized.iter().zip(&b.normalized) {
            prop_assert!((p - q).abs() <= 1e-9);
        }
    }

    #[test]
    fn lag_zero_is_biased_variance(xs in series(3..500)) {
        let c = autocorrelation(&xs, 1).unwrap();
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
        prop_assert!((c.values[0] - var).abs() <= 1e-12 * var.max(1.0));
    }

    #[test]
    fn normalized_correlation_is_bounded(xs in series(400..1500), est in prop_oneof![Just(Estimator::GlobalMean), Just(Estimator::Literal), Just(Estimator::PerLagMeans)]) {
        prop_assume!(nonconstant(&xs));
        let c = autocorrelation_with(&xs, 20, est).unwrap();
        prop_assert_eq!(c.normalized[0], 1.0);
        if est == Estimator::PerLagMeans {
            // Pearson form is bounded for any length
            for v in &c.normalized {
                prop_assert!(v.abs() <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn normalization_is_exact(xs in prop::collection::vec(-1.0f64..1.0, 2..2000), loc in -1e3f64..1e3, scale in 1e-4f64..1e2) {
        prop_assume!(nonconstant(&xs));
        let raw = RawReturns::from_values(xs.iter().map(|x| loc + scale * x).collect());
        let u = normalize(&raw).unwrap();
        let n = u.values.len() as f64;
        let m = u.values.iter().sum::<f64>() / n;
        let v = u.values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
        prop_assert!(m.abs() <= 1e-10, "mean {}", m);
        prop_assert!((v - 1.0).abs() <= 1e-10, "variance {}", v);
        prop_assert!(u.raw_std > 0.0);
    }

    #[test]
    fn normalization_is_affine_invariant(xs in prop::collection::vec(-1.0f64..1.0, 2..500), a in 1e-3f64..1e3, b in -1e3f64..1e3) {
        prop_assume!(nonconstant(&xs));
        let base = normalize(&RawReturns::from_values(xs.clone())).unwrap();
        let moved = normalize(&RawReturns::from_values(xs.iter().map(|x| a * x + b).collect())).unwrap();
        for (p, q) in base.values.iter().zip(&moved.values) {
            prop_assert!((p - q).abs() <= 1e-8, "{} vs {}", p, q);
        }
    }

    #[test]
    fn histogram_has_unit_mass(xs in prop::collection::vec(0.01f64..100.0, 2..2000), bins in prop_oneof![Just(Binning::FreedmanDiaconis), Just(Binning::LogFreedmanDiaconis), (1usize..200).prop_map(Binning::Fixed), (1usize..200).prop_map(Binning::LogFixed)]) {
        let h = histogram_values(&xs, bins).unwrap();
        prop_assert!((h.total_mass() - 1.0).abs() <= 1e-9);
        prop_assert_eq!(h.count, xs.len());
    }

    #[test]
    fn betas_follow_the_window_count(xs in prop::collection::vec(-3.0f64..3.0, 8..2000), t in 4usize..60) {
        prop_assume!(xs.len() >= t);
        match extract_betas(&xs, t) {
            Ok(b) => {
                prop_assert_eq!(b.len(), xs.len() / t);
                prop_assert!(b.betas.iter().all(|&x| x > 0.0));
                let mean = b.betas.iter().sum::<f64>() / b.len() as f64;
                prop_assert!(close(b.beta0, mean, 1e-12));
            }
            Err(e) => prop_assert!(matches!(e, superstat::Error::DegenerateWindow { .. }), "{}", e),
        }
    }

    #[test]
    fn fit_is_order_invariant(mut xs in prop::collection::vec(0.05f64..20.0, 40..300), seed in any::<u64>()) {
        let a = fit_mle(&xs, ModelKind::LogNormal, true).unwrap();
        let mut s = seed;
        for i in (1..xs.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            xs.swap(i, (s >> 33) as usize % (i + 1));
        }
        let b = fit_mle(&xs, ModelKind::LogNormal, true).unwrap();
        let (pa, pb) = (a.model.params(), b.model.params());
        for ((_, x), (_, y)) in pa.iter().zip(&pb) {
            prop_assert!(close(*x, *y, 1e-9));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn chi2_marginal_is_student_t(d1 in 0.1f64..20.0, beta0 in 0.1f64..10.0, u in -10.0f64..10.0) {
        let m = DistributionModel::chi2(d1, beta0);
        let q = marginal_pdf(&m, u).unwrap();
        let t = student_t_marginal(u, d1, beta0);
        prop_assert!(close(q, t, 1e-6), "d1 {} beta0 {} u {}: {} vs {}", d1, beta0, u, q, t);
    }

    #[test]
    fn marginals_are_symmetric_and_decreasing(
        kind in prop_oneof![Just(ModelKind::Chi2), Just(ModelKind::InvChi2), Just(ModelKind::LogNormal), Just(ModelKind::Mixed)],
        shape in 0.3f64..8.0,
        beta0 in 0.2f64..5.0,
        u in 0.0f64..8.0,
    ) {
        let m = match kind {
            ModelKind::Chi2 => DistributionModel::chi2(shape, beta0),
            ModelKind::InvChi2 => DistributionModel::inv_chi2(shape, beta0),
            ModelKind::LogNormal => DistributionModel::lognormal_with_mean(shape / 4.0, beta0),
            ModelKind::Mixed => DistributionModel::Mixed(MixedParams::equal_means(0.5, 4, shape / 4.0, beta0)),
        };
        let p = marginal_pdf(&m, u).unwrap();
        prop_assert_eq!(p, marginal_pdf(&m, -u).unwrap());
        let further = marginal_pdf(&m, u + 0.25).unwrap();
        prop_assert!(further < p, "{:?}: p({}) = {} but p({}) = {}", m, u, p, u + 0.25, further);
    }

    #[test]
    fn model_means_match_beta0(shape in 0.3f64..30.0, beta0 in 0.05f64..20.0, kappa in 0.0f64..1.0) {
        prop_assert!(close(DistributionModel::chi2(shape, beta0).mean(), beta0, 1e-12));
        prop_assert!(close(DistributionModel::inv_chi2(shape + 2.0, beta0).mean(), beta0, 1e-12));
        prop_assert!(close(DistributionModel::lognormal_with_mean(shape / 10.0, beta0).mean(), beta0, 1e-12));
        let mixed = MixedParams::equal_means(kappa, 4, shape / 10.0, beta0);
        prop_assert!(close(DistributionModel::Mixed(mixed).mean(), beta0, 1e-12));
    }
}

fn intraday(days: &[(u32, usize)]) -> PriceSeries {
    let mut records = Vec::new();
    let mut price = 10.0;
    for &(day, n) in days {
        let date = chrono::NaiveDate::from_ymd_opt(2024, 1, day).unwrap();
        for m in 0..n {
            price *= 1.0 + 0.001 * ((m * 7 + day as usize) % 5) as f64 - 0.002;
            records.push(PriceRecord {
                timestamp: date.and_hms_opt(9, 30, 0).unwrap()
                    + chrono::Duration::minutes(m as i64),
                price,
                session_id: 0,
            });
        }
    }
    assign_sessions(PriceSeries {
        records,
        resolution: Resolution::Intraday,
        source_label: "test".into(),
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn session_bookkeeping(lengths in prop::collection::vec(1usize..30, 1..12), tau in 1usize..6) {
        let days: Vec<(u32, usize)> = lengths.iter().enumerate().map(|(i, &n)| (i as u32 + 1, n)).collect();
        let s = intraday(&days);
        prop_assert_eq!(s.session_boundaries(), days.len() - 1);
        prop_assert_eq!(&assign_sessions(s.clone()), &s);

        let n = s.len();
        prop_assume!(n > tau);
        let straddling = (0..n - tau).filter(|&i| s.records[i].session_id != s.records[i + tau].session_id).count();
        let r = log_returns(&s, tau).unwrap();
        prop_assert_eq!(r.dropped_count, straddling);
        prop_assert_eq!(r.values.len() + straddling, n - tau);
        if tau == 1 {
            prop_assert_eq!(r.dropped_count, s.session_boundaries());
        }
        // direct lag-τ returns agree with the lag-1 returns summed over the same pairs
        let one = log_returns(&s, 1).unwrap();
        let prices = s.prices();
        for (v, &i) in r.values.iter().zip(&r.start_index) {
            prop_assert!((v - (prices[i + tau] / prices[i]).ln()).abs() < 1e-12);
            if let Ok(k) = one.start_index.binary_search(&i) {
                if tau == 1 {
                    prop_assert_eq!(one.values[k], *v);
                }
            }
        }
    }
}
