use crate::error::{GfiError, Result};

/// Sample quantile with linear interpolation between order statistics.
///
/// With sorted values `v_1..v_n` and `h = (n-1)q + 1`, returns
/// `v_floor(h) + (h - floor(h)) * (v_ceil(h) - v_floor(h))`.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    let sorted = sorted_copy(values)?;
    quantile_sorted(&sorted, q)
}

/// Several quantiles of the same data with a single sort.
pub fn quantiles(values: &[f64], qs: &[f64]) -> Result<Vec<f64>> {
    let sorted = sorted_copy(values)?;
    qs.iter().map(|&q| quantile_sorted(&sorted, q)).collect()
}

fn sorted_copy(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(GfiError::InvalidInput("quantile of an empty list".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(GfiError::InvalidInput("quantile input contains NaN".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN filtered above"));
    Ok(sorted)
}

/// Quantile of data that is already sorted ascending.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(GfiError::InvalidInput(format!(
            "quantile level {q} outside [0, 1]"
        )));
    }
    let n = sorted.len();
    if n == 0 {
        return Err(GfiError::InvalidInput("quantile of an empty list".into()));
    }
    // zero-based position h - 1
    let pos = (n - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

/// Median under the same convention.
pub fn median(values: &[f64]) -> Result<f64> {
    quantile(values, 0.5)
}
