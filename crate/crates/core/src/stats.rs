//! Small numeric helpers shared by the harness, the tests, and the CLI.

/// Arithmetic mean; 0.0 for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Normalized autocorrelation of `series` at `lag`.
///
/// Mean is removed first; the result is the lag-`lag` autocovariance divided
/// by the variance, so a perfectly periodic series scores 1.0 at its period.
/// Returns 0.0 when the variance vanishes or the lag leaves no overlap.
pub fn autocorrelation(series: &[f64], lag: usize) -> f64 {
    if series.len() <= lag {
        return 0.0;
    }
    let mu = mean(series);
    let var: f64 = series.iter().map(|x| (x - mu) * (x - mu)).sum();
    if var == 0.0 {
        return 0.0;
    }
    let cov: f64 = series[..series.len() - lag]
        .iter()
        .zip(&series[lag..])
        .map(|(a, b)| (a - mu) * (b - mu))
        .sum();
    cov / var
}

/// Cosine similarity of two equal-length vectors.
///
/// Returns 1.0 for two zero vectors (identical profiles) and 0.0 when exactly
/// one of the two is zero.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "cosine_similarity needs equal lengths");
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 && nb == 0.0 {
        return 1.0;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na * nb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn autocorrelation_peaks_at_the_true_period() {
        // Period-8 sawtooth, 64 periods long. The biased estimator divides a
        // (n - lag)-term covariance sum by the n-term variance, so a perfect
        // period scores exactly (n - lag) / n.
        let series: Vec<f64> = (0..512).map(|i| (i % 8) as f64).collect();
        let at_period = autocorrelation(&series, 8);
        assert_relative_eq!(at_period, 504.0 / 512.0);
        for lag in 1..8 {
            assert!(
                autocorrelation(&series, lag) < at_period,
                "lag {lag} should score below the period"
            );
        }
    }

    #[test]
    fn autocorrelation_degenerate_inputs() {
        assert_eq!(autocorrelation(&[1.0, 1.0, 1.0], 1), 0.0);
        assert_eq!(autocorrelation(&[1.0, 2.0], 5), 0.0);
    }

    #[test]
    fn cosine_similarity_basics() {
        assert_relative_eq!(cosine_similarity(&[1.0, 2.0], &[2.0, 4.0]), 1.0);
        assert_relative_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
        assert_eq!(cosine_similarity(&[0.0], &[0.0]), 1.0);
        assert_eq!(cosine_similarity(&[0.0], &[1.0]), 0.0);
    }
}
