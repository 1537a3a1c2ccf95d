//! Penalty selection by K-fold cross-validation.

use rand::seq::SliceRandom;

use crate::error::{GfiError, Result};
use crate::numerics::RandomStream;

/// Models that can score a penalty grid on held-out data.
pub trait CrossValidate {
    /// Mean held-out squared prediction error for every value in `grid`.
    ///
    /// `folds[k]` is the fold of observation `k`; the same split is used for the whole grid.
    fn cv_errors(
        &self,
        grid: &[f64],
        folds: &[usize],
        n_folds: usize,
        stream: &RandomStream,
    ) -> Result<Vec<f64>>;

    /// Number of observations that get assigned to folds.
    fn cv_len(&self) -> usize;

    /// Grid used when the configuration gives none.
    fn default_grid(&self) -> Vec<f64>;
}

/// `points` values spaced evenly in log scale from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) || points == 0 {
        return Err(GfiError::InvalidInput(format!(
            "bad log grid: {points} points from {lo} to {hi}"
        )));
    }
    if points == 1 {
        return Ok(vec![hi]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..points)
        .map(|k| (a + (b - a) * k as f64 / (points - 1) as f64).exp())
        .collect())
}

/// Random balanced fold labels for `n` observations.
pub fn fold_assignment(n: usize, n_folds: usize, stream: &RandomStream) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream.rng());
    let mut folds = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        folds[i] = rank % n_folds;
    }
    folds
}

/// Grid value with the smallest cross-validated error; exact ties go to the larger value.
pub fn cv_lambda<M: CrossValidate + ?Sized>(
    model: &M,
    grid: &[f64],
    n_folds: usize,
    stream: &RandomStream,
) -> Result<f64> {
    if grid.is_empty() {
        return Err(GfiError::InvalidInput("penalty grid is empty".into()));
    }
    if n_folds < 2 || model.cv_len() < n_folds {
        return Err(GfiError::InvalidInput(format!(
            "{n_folds}-fold cross-validation on {} observations",
            model.cv_len()
        )));
    }
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    let folds = fold_assignment(model.cv_len(), n_folds, stream);
    let errors = model.cv_errors(grid, &folds, n_folds, &stream.derive(1))?;
    let mut best = 0;
    for k in 1..grid.len() {
        let (e, b) = (errors[k], errors[best]);
        if e < b || (e == b && grid[k] > grid[best]) || !b.is_finite() {
            best = k;
        }
    }
    if !errors[best].is_finite() {
        return Err(GfiError::NonFinite("cross-validation error".into()));
    }
    Ok(grid[best])
}
