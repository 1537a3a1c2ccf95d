//! Point estimates and percentile intervals from accepted draws.

use serde::{Deserialize, Serialize};

use super::sampler::FiducialSample;
use crate::error::{GfiError, Result};
use crate::numerics::quantile::quantile_sorted;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub point_mean: Vec<f64>,
    pub point_median: Vec<f64>,
    pub levels: Vec<f64>,
    /// `intervals[k][j]` is the level `levels[k]` interval of coordinate `j`.
    pub intervals: Vec<Vec<Interval>>,
}

impl SummaryReport {
    pub fn len(&self) -> usize {
        self.point_mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.point_mean.is_empty()
    }

    pub fn interval(&self, level: f64, coord: usize) -> Option<&Interval> {
        let k = self
            .levels
            .iter()
            .position(|&l| (l - level).abs() < 1e-12)?;
        self.intervals[k].get(coord)
    }
}

/// Summaries of the accepted draws' targets. Needs at least two accepted draws.
pub fn summarize(sample: &FiducialSample, levels: &[f64]) -> Result<SummaryReport> {
    let rows: Vec<&[f64]> = sample.accepted().map(|d| d.targets.as_slice()).collect();
    if rows.len() < 2 {
        return Err(GfiError::InvalidInput(format!(
            "summaries need at least 2 accepted draws, got {}",
            rows.len()
        )));
    }
    summarize_rows(&rows, levels)
}

/// Summaries of arbitrary rows of equal length (one row per draw).
pub fn summarize_values(rows: &[Vec<f64>], levels: &[f64]) -> Result<SummaryReport> {
    let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    summarize_rows(&refs, levels)
}

fn summarize_rows(rows: &[&[f64]], levels: &[f64]) -> Result<SummaryReport> {
    if rows.is_empty() {
        return Err(GfiError::InvalidInput("no draws to summarize".into()));
    }
    for &l in levels {
        if !(l > 0.0 && l < 1.0) {
            return Err(GfiError::InvalidInput(format!(
                "interval level must lie in (0, 1), got {l}"
            )));
        }
    }
    let dim = rows[0].len();
    if rows.iter().any(|r| r.len() != dim) {
        return Err(GfiError::Dimension(
            "draws have differing target lengths".into(),
        ));
    }
    let n = rows.len() as f64;
    let mut point_mean = Vec::with_capacity(dim);
    let mut point_median = Vec::with_capacity(dim);
    let mut intervals = vec![Vec::with_capacity(dim); levels.len()];
    let mut column = vec![0.0; rows.len()];
    for j in 0..dim {
        for (slot, r) in column.iter_mut().zip(rows) {
            *slot = r[j];
        }
        point_mean.push(column.iter().sum::<f64>() / n);
        if column.iter().any(|v| v.is_nan()) {
            return Err(GfiError::NonFinite(format!("target {j} has NaN draws")));
        }
        column.sort_by(f64::total_cmp);
        point_median.push(quantile_sorted(&column, 0.5)?);
        for (k, &l) in levels.iter().enumerate() {
            let a = 1.0 - l;
            intervals[k].push(Interval {
                lower: quantile_sorted(&column, a / 2.0)?,
                upper: quantile_sorted(&column, 1.0 - a / 2.0)?,
            });
        }
    }
    Ok(SummaryReport {
        point_mean,
        point_median,
        levels: levels.to_vec(),
        intervals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_interval_of_1_to_100() {
        let rows: Vec<Vec<f64>> = (1..=100).map(|i| vec![i as f64]).collect();
        let s = summarize_values(&rows, &[0.95]).unwrap();
        let iv = s.interval(0.95, 0).unwrap();
        assert!((iv.lower - 3.475).abs() < 1e-12);
        assert!((iv.upper - 97.525).abs() < 1e-12);
    }

    #[test]
    fn identical_draws_give_zero_width() {
        let rows = vec![vec![2.5, -1.0]; 7];
        let s = summarize_values(&rows, &[0.9, 0.99]).unwrap();
        for k in 0..2 {
            for j in 0..2 {
                assert_eq!(s.intervals[k][j].width(), 0.0);
            }
        }
        assert_eq!(s.point_median, vec![2.5, -1.0]);
    }

    #[test]
    fn symmetric_pair() {
        let s = summarize_values(&[vec![-3.0], vec![3.0]], &[0.5]).unwrap();
        assert_eq!(s.point_mean[0], 0.0);
        assert_eq!(s.point_median[0], 0.0);
    }

    #[test]
    fn bad_level_rejected() {
        assert!(summarize_values(&[vec![1.0]], &[1.0]).is_err());
        assert!(summarize_values(&[], &[0.9]).is_err());
    }
}
