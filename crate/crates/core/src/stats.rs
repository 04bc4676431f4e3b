//! Small statistical helpers: binomial intervals and Kolmogorov-Smirnov tests.

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `k` successes out of `n` trials.
///
/// With `k = 0` the upper bound is the rule-of-three value `3 / n`.
pub fn wilson_interval(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    if k == 0 {
        return (0.0, (3.0 / n as f64).min(1.0));
    }
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = Z95 * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Asymptotic Kolmogorov distribution tail `P(K > lambda)`.
pub fn kolmogorov_pvalue(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let j = j as f64;
        let term = (-2.0 * j * j * lambda * lambda).exp();
        sum += if j as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample statistic `sup |F_n - F|` against a continuous CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// One-sample KS test: returns `(statistic, p-value)`.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> (f64, f64) {
    let d = ks_statistic(samples, cdf);
    let n = samples.len() as f64;
    let sn = n.sqrt();
    (d, kolmogorov_pvalue((sn + 0.12 + 0.11 / sn) * d))
}

/// Two-sample KS test: returns `(statistic, p-value)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = xs[i].min(ys[j]);
        while i < n && xs[i] <= v {
            i += 1;
        }
        while j < m && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let se = ne.sqrt();
    (d, kolmogorov_pvalue((se + 0.12 + 0.11 / se) * d))
}

/// Mean and standard error of the mean from running sums.
pub fn mean_and_se(sum: f64, sum_sq: f64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let n_f = n as f64;
    let mean = sum / n_f;
    if n < 2 {
        return (mean, f64::INFINITY);
    }
    let var = ((sum_sq - n_f * mean * mean) / (n_f - 1.0)).max(0.0);
    (mean, (var / n_f).sqrt())
}

/// Ordinary least squares `y = a + b x`, returning `(a, b, se_b)` where the
/// slope standard error combines the supplied per-point standard errors.
pub fn weighted_slope(x: &[f64], y: &[f64], se: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let var: f64 = x
        .iter()
        .zip(se)
        .map(|(a, s)| ((a - mx) / sxx).powi(2) * s * s)
        .sum();
    (my - slope * mx, slope, var.sqrt())
}

/// Ordinary least squares slope of `y` on `x` with its standard error under
/// the full covariance matrix `cov` of `y`.
pub fn slope_with_covariance(x: &[f64], y: &[f64], cov: &[Vec<f64>]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let w: Vec<f64> = x.iter().map(|v| (v - mx) / sxx).collect();
    let slope = w.iter().zip(y).map(|(a, b)| a * (b - my)).sum();
    let mut var = 0.0;
    for (i, wi) in w.iter().enumerate() {
        for (j, wj) in w.iter().enumerate() {
            var += wi * wj * cov[i][j];
        }
    }
    (slope, var.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_contains_estimate() {
        for &(k, n) in &[(1u64, 10u64), (5, 100), (99, 100), (100, 100)] {
            let (lo, hi) = wilson_interval(k, n);
            let p = k as f64 / n as f64;
            assert!(lo <= p && p <= hi, "{k}/{n}: [{lo}, {hi}]");
        }
    }

    #[test]
    fn wilson_reference_value() {
        // 10 out of 100: Wilson interval is [0.0552, 0.1744].
        let (lo, hi) = wilson_interval(10, 100);
        assert!((lo - 0.05523).abs() < 1e-4, "{lo}");
        assert!((hi - 0.17437).abs() < 1e-4, "{hi}");
    }

    #[test]
    fn zero_successes_rule_of_three() {
        assert_eq!(wilson_interval(0, 1000), (0.0, 0.003));
    }

    #[test]
    fn kolmogorov_known_quantiles() {
        assert!((kolmogorov_pvalue(1.3581) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_pvalue(1.6276) - 0.01).abs() < 1e-3);
    }

    #[test]
    fn slope_of_line_is_exact() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let (a, b, se) = weighted_slope(&x, &y, &[0.1; 4]);
        assert!((a - 1.0).abs() < 1e-12 && (b - 2.0).abs() < 1e-12);
        assert!((se - 0.1 / 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn two_sample_identical_is_zero() {
        let a = [1.0, 2.0, 3.0];
        let (d, p) = ks_two_sample(&a, &a);
        assert_eq!(d, 0.0);
        assert_eq!(p, 1.0);
    }

    #[test]
    fn covariance_slope_reduces_to_independent_case() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 2.9, 5.1, 7.0];
        let se = [0.1, 0.2, 0.3, 0.4];
        let cov: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| if i == j { se[i] * se[i] } else { 0.0 }).collect())
            .collect();
        let (_, b, s1) = weighted_slope(&x, &y, &se);
        let (b2, s2) = slope_with_covariance(&x, &y, &cov);
        assert!((b - b2).abs() < 1e-14 && (s1 - s2).abs() < 1e-14);
        // Perfectly correlated equal errors shift every point together.
        let cov: Vec<Vec<f64>> = vec![vec![0.04; 4]; 4];
        assert!(slope_with_covariance(&x, &y, &cov).1 < 1e-9);
    }
}
