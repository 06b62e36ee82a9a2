pub mod ks;
pub mod optimize;
pub mod quad;

/// Arithmetic mean; `NaN` for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population (1/N) variance.
pub fn population_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

/// Linear-interpolated quantile of an ascending slice (type 7).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Monotone-agnostic cubic Hermite interpolant on a uniform grid.
#[derive(Debug, Clone)]
pub struct UniformCubic {
    start: f64,
    step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl UniformCubic {
    pub fn new(start: f64, step: f64, values: Vec<f64>) -> Self {
        let n = values.len();
        let mut slopes = vec![0.0; n];
        for i in 0..n {
            slopes[i] = if n < 2 {
                0.0
            } else if i == 0 {
                (values[1] - values[0]) / step
            } else if i == n - 1 {
                (values[n - 1] - values[n - 2]) / step
            } else {
                (values[i + 1] - values[i - 1]) / (2.0 * step)
            };
        }
        Self {
            start,
            step,
            values,
            slopes,
        }
    }

    pub fn end(&self) -> f64 {
        self.start + self.step * (self.values.len() - 1) as f64
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.start && x <= self.end()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        let pos = ((x - self.start) / self.step).clamp(0.0, (n - 1) as f64);
        let i = (pos.floor() as usize).min(n.saturating_sub(2));
        let t = pos - i as f64;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i] * self.step, self.slopes[i + 1] * self.step);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_reproduces_smooth_function() {
        let step = 0.01;
        let values: Vec<f64> = (0..=300).map(|i| (i as f64 * step).sin()).collect();
        let spline = UniformCubic::new(0.0, step, values);
        for k in 0..100 {
            let x = 0.0137 + k as f64 * 0.0291;
            assert!((spline.eval(x) - x.sin()).abs() < 1e-6);
        }
    }

    #[test]
    fn quantiles() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&xs, 0.0), 1.0);
        assert_eq!(quantile_sorted(&xs, 1.0), 4.0);
        assert!((quantile_sorted(&xs, 0.5) - 2.5).abs() < 1e-15);
    }
}
