//! One-sample Kolmogorov–Smirnov statistic and asymptotic p-value.

/// Sup-distance between the empirical CDF of `sorted` (ascending) and `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = cdf(x);
            let above = (i + 1) as f64 / n - c;
            let below = c - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// Same as [`ks_statistic`] for CDF values already evaluated at each sorted sample.
pub fn ks_statistic_from_cdf(cdf_values: &[f64]) -> f64 {
    let n = cdf_values.len() as f64;
    cdf_values
        .iter()
        .enumerate()
        .map(|(i, &c)| ((i + 1) as f64 / n - c).max(c - i as f64 / n))
        .fold(0.0, f64::max)
}

/// Kolmogorov survival function Q(λ) = 2 Σ (−1)^{k−1} exp(−2k²λ²).
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = sign * (-2.0 * kf * kf * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 * sum.abs().max(1e-300) {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic p-value with Stephens' finite-sample correction.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    kolmogorov_q((sn + 0.12 + 0.11 / sn) * d)
}
