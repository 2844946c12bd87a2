//! Binomial confidence intervals and summary statistics.

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval `(estimate, lower, upper)` for `successes` out of `trials`.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64, f64) {
    if trials == 0 {
        return (0.0, 0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lower = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let upper = if successes == trials {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (p, lower, upper)
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_counts() {
        assert_eq!(wilson_interval(20, 20, Z95), (1.0, wilson_interval(20, 20, Z95).1, 1.0));
        let (p, lo, _) = wilson_interval(0, 20, Z95);
        assert_eq!((p, lo), (0.0, 0.0));
    }

    #[test]
    fn constant_has_zero_spread() {
        assert_eq!(mean_std(&[2.0, 2.0, 2.0]), (2.0, 0.0));
    }
}
