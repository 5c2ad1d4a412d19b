//! Binomial confidence intervals, sample summaries and log-log fits.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

/// Quantile of the Beta(a, b) distribution by bisection on the regularized
/// incomplete beta function.
pub fn beta_quantile(a: f64, b: f64, prob: f64) -> f64 {
    if prob <= 0.0 {
        return 0.0;
    }
    if prob >= 1.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_reg(a, b, mid) < prob {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Two-sided Clopper–Pearson interval at confidence `level` for `k`
/// successes out of `n`.
pub fn clopper_pearson(k: u64, n: u64, level: f64) -> (f64, f64) {
    assert!(n > 0 && k <= n, "clopper_pearson needs 0 <= k <= n, n > 0");
    let alpha = 1.0 - level;
    let (kf, nf) = (k as f64, n as f64);
    let lo = if k == 0 { 0.0 } else { beta_quantile(kf, nf - kf + 1.0, alpha / 2.0) };
    let hi = if k == n { 1.0 } else { beta_quantile(kf + 1.0, nf - kf, 1.0 - alpha / 2.0) };
    (lo, hi)
}

/// One-sided lower Clopper–Pearson bound.
pub fn clopper_pearson_lower(k: u64, n: u64, level: f64) -> f64 {
    assert!(n > 0 && k <= n);
    if k == 0 {
        return 0.0;
    }
    beta_quantile(k as f64, (n - k) as f64 + 1.0, 1.0 - level)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SampleSummary {
    pub n: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub max: f64,
    /// Normal-approximation 95% interval on the mean.
    pub ci: (f64, f64),
}

pub fn summarize(values: &[f64]) -> SampleSummary {
    let n = values.len();
    if n == 0 {
        return SampleSummary {
            n,
            mean: f64::NAN,
            std_dev: f64::NAN,
            max: f64::NAN,
            ci: (f64::NAN, f64::NAN),
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let sd = var.sqrt();
    let half = 1.959963984540054 * sd / (n as f64).sqrt();
    SampleSummary {
        n,
        mean,
        std_dev: sd,
        max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        ci: (mean - half, mean + half),
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Ordinary least squares `y ≈ slope x + intercept`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> LineFit {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    LineFit {
        slope,
        intercept: my - slope * mx,
    }
}

/// Slope of `log y` against `log x`, skipping non-positive entries.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .unzip();
    (lx.len() >= 2).then(|| least_squares(&lx, &ly).slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn all_successes_closed_form() {
        assert_abs_diff_eq!(clopper_pearson_lower(10, 10, 0.95), 0.05f64.powf(0.1), epsilon = 1e-12);
        assert_abs_diff_eq!(clopper_pearson_lower(10, 10, 0.95), 0.741, epsilon = 5e-4);
        let (lo, hi) = clopper_pearson(500, 500, 0.95);
        assert_abs_diff_eq!(lo, 0.025f64.powf(1.0 / 500.0), epsilon = 1e-12);
        assert_eq!(hi, 1.0);
        let (lo, hi) = clopper_pearson(0, 20, 0.95);
        assert_eq!(lo, 0.0);
        assert_abs_diff_eq!(hi, 1.0 - 0.025f64.powf(1.0 / 20.0), epsilon = 1e-12);
    }

    #[test]
    fn interval_contains_estimate() {
        for n in [1u64, 7, 50] {
            for k in 0..=n {
                let (lo, hi) = clopper_pearson(k, n, 0.95);
                let p = k as f64 / n as f64;
                assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0);
            }
        }
    }

    #[test]
    fn tabulated_value() {
        // k = 3, n = 10: standard tables give (0.0667, 0.6525)
        let (lo, hi) = clopper_pearson(3, 10, 0.95);
        assert_abs_diff_eq!(lo, 0.06673951, epsilon = 1e-7);
        assert_abs_diff_eq!(hi, 0.65245285, epsilon = 1e-7);
    }

    #[test]
    fn fits() {
        let xs: Vec<f64> = (1..10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-2.0)).collect();
        assert_abs_diff_eq!(log_log_slope(&xs, &ys).unwrap(), -2.0, epsilon = 1e-12);
        let s = summarize(&[1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.max, 3.0);
        assert_abs_diff_eq!(s.std_dev, 1.0, epsilon = 1e-15);
    }
}
