//! Tukey-fence acceptance rule on per-draw losses.

use crate::error::{GfiError, Result};
use crate::numerics::quantile::quantile_sorted;

/// `epsilon = Q3 + 1.5 (Q3 - Q1)` and the flags `loss <= epsilon`.
pub fn acceptance_filter(losses: &[f64]) -> Result<(f64, Vec<bool>)> {
    if losses.len() < 2 {
        return Err(GfiError::InvalidInput(format!(
            "the loss filter needs at least 2 losses, got {}",
            losses.len()
        )));
    }
    if let Some(bad) = losses.iter().find(|l| !l.is_finite()) {
        return Err(GfiError::NonFinite(format!("loss value {bad}")));
    }
    let mut sorted = losses.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25)?;
    let q3 = quantile_sorted(&sorted, 0.75)?;
    let eps = q3 + 1.5 * (q3 - q1);
    Ok((eps, losses.iter().map(|&l| l <= eps).collect()))
}
