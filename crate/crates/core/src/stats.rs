//! Sample statistics, batch-means standard errors and the one-sample
//! Kolmogorov–Smirnov test against a centered normal law.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Number of contiguous batches used for Monte Carlo standard errors.
pub const DEFAULT_BATCHES: usize = 20;

/// Significance level of the normality gate.
pub const KS_ALPHA: f64 = 0.01;

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample covariance.
pub fn covariance(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let (mx, my) = (mean(x), mean(y));
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>()
        / (x.len() as f64 - 1.0)
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    covariance(x, x)
}

fn central_moment(x: &[f64], m: f64, p: i32) -> f64 {
    x.iter().map(|v| (v - m).powi(p)).sum::<f64>() / x.len() as f64
}

/// `m₃ / m₂^{3/2}` from biased central moments; 0 for constant data.
pub fn skewness(x: &[f64]) -> f64 {
    let m = mean(x);
    let m2 = central_moment(x, m, 2);
    if m2 == 0.0 {
        return 0.0;
    }
    central_moment(x, m, 3) / m2.powf(1.5)
}

/// `m₄ / m₂² - 3`; 0 for constant data.
pub fn excess_kurtosis(x: &[f64]) -> f64 {
    let m = mean(x);
    let m2 = central_moment(x, m, 2);
    if m2 == 0.0 {
        return 0.0;
    }
    central_moment(x, m, 4) / (m2 * m2) - 3.0
}

/// Jarque–Bera statistic `M/6 (S² + K²/4)`.
pub fn jarque_bera(x: &[f64]) -> f64 {
    let s = skewness(x);
    let k = excess_kurtosis(x);
    x.len() as f64 / 6.0 * (s * s + k * k / 4.0)
}

/// A point estimate with its batch-means standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchEstimate {
    pub value: f64,
    pub se: f64,
}

impl BatchEstimate {
    /// `|value - target| ≤ k·se`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.se
    }
}

/// Applies `stat` to the full index range and to `batches` contiguous slices;
/// the standard error is the spread of the batch values over `√batches`.
pub fn batch_means<S: Fn(Range<usize>) -> f64>(
    count: usize,
    batches: usize,
    stat: S,
) -> Result<BatchEstimate> {
    if batches < 2 || count < 2 * batches {
        return Err(Error::Argument(format!(
            "{count} samples cannot form {batches} batches of size ≥ 2"
        )));
    }
    let per: Vec<f64> = (0..batches)
        .map(|b| stat(b * count / batches..(b + 1) * count / batches))
        .collect();
    let spread = variance(&per).max(0.0).sqrt();
    Ok(BatchEstimate {
        value: stat(0..count),
        se: spread / (batches as f64).sqrt(),
    })
}

/// `P(X ≤ x)` for `X ~ N(0, var)`, `var > 0`.
pub fn normal_cdf(x: f64, var: f64) -> f64 {
    0.5 * erfc(-x / (2.0 * var).sqrt())
}

/// Asymptotic Kolmogorov survival function `P(K > t)`.
pub fn kolmogorov_survival(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t < 1.0 {
        // theta-function form, fast for small t
        let s: f64 = (1..=20)
            .map(|j| {
                let odd = (2 * j - 1) as f64;
                (-odd * odd * std::f64::consts::PI.powi(2) / (8.0 * t * t)).exp()
            })
            .sum();
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / t * s).clamp(0.0, 1.0);
    }
    let s: f64 = (1..=100)
        .map(|j| {
            let j = j as f64;
            let sign = if j as u64 % 2 == 1 { 1.0 } else { -1.0 };
            sign * (-2.0 * j * j * t * t).exp()
        })
        .sum();
    (2.0 * s).clamp(0.0, 1.0)
}

/// `sup_x |F_M(x) - Φ_σ(x)|` for `σ² = var > 0`.
pub fn ks_statistic(values: &[f64], var: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal_cdf(x, var);
            (f - i as f64 / m).max((i + 1) as f64 / m - f)
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsOutcome {
    pub statistic: f64,
    pub p_value: f64,
    pub pass: bool,
    /// `false` below 500 samples, where the asymptotic law is a poor guide.
    pub reliable: bool,
    pub diagnostic: Option<String>,
}

/// Tests `values ~ N(0, reference_variance)` at level [`KS_ALPHA`].
///
/// With `reference_variance = 0` the reference is the point mass at 0: data
/// that is zero to within 1e-12 passes and anything else fails.
pub fn normality_test(values: &[f64], reference_variance: f64) -> Result<KsOutcome> {
    if values.is_empty() {
        return Err(Error::Argument("normality test on an empty sample".into()));
    }
    if !(reference_variance >= 0.0) || !reference_variance.is_finite() {
        return Err(Error::Argument(format!(
            "reference variance must be finite and nonnegative, got {reference_variance}"
        )));
    }
    let reliable = values.len() >= 500;
    if reference_variance == 0.0 {
        let spread = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let pass = spread <= 1e-12;
        return Ok(KsOutcome {
            statistic: if pass { 0.0 } else { 1.0 },
            p_value: if pass { 1.0 } else { 0.0 },
            pass,
            reliable,
            diagnostic: (!pass).then(|| {
                format!("reference law is degenerate but the data spreads to |x| = {spread:e}")
            }),
        });
    }
    let d = ks_statistic(values, reference_variance);
    let p = kolmogorov_survival((values.len() as f64).sqrt() * d);
    Ok(KsOutcome {
        statistic: d,
        p_value: p,
        pass: p >= KS_ALPHA,
        reliable,
        diagnostic: None,
    })
}
