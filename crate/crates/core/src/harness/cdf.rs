//! Empirical distribution functions.

use crate::error::HarnessError;

/// Right-continuous empirical CDF of `values` at each threshold of `grid`:
/// the fraction of values `<= t`.
pub fn empirical_cdf(values: &[f64], grid: &[f64]) -> Result<Vec<(f64, f64)>, HarnessError> {
    if values.is_empty() {
        return Err(HarnessError::EmptySample);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(grid
        .iter()
        .map(|&t| (t, sorted.partition_point(|&v| v <= t) as f64 / n))
        .collect())
}

/// `count` evenly spaced thresholds from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}
