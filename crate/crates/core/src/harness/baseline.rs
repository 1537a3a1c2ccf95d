//! Ordinary least squares on the covariates alone, with known-σ normal intervals.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::engine::{Interval, SummaryReport};
use crate::error::{GfiError, Result};
use crate::network::NetworkDataset;
use crate::numerics::Vector;

/// Point estimate `(X^T X)^-1 X^T Y` and intervals `beta_j +- z sigma sqrt([(X^T X)^-1]_jj)`.
pub fn ols_baseline(data: &NetworkDataset, sigma: f64, levels: &[f64]) -> Result<SummaryReport> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(GfiError::InvalidInput(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let x = &data.x;
    let singular = || GfiError::Singular("covariates are rank deficient".into());
    let chol = x.tr_mul(x).cholesky().ok_or_else(singular)?;
    // roundoff can leave a tiny positive pivot on an exactly singular Gram matrix
    let pivots = chol.l_dirty().diagonal();
    if pivots.min() <= 1e-7 * pivots.max() {
        return Err(singular());
    }
    let beta = chol.solve(&x.tr_mul(&Vector::from_column_slice(&data.y)));
    let inv = chol.inverse();
    let normal = Normal::standard();
    let mut intervals = Vec::with_capacity(levels.len());
    for &level in levels {
        if !(level > 0.0 && level < 1.0) {
            return Err(GfiError::InvalidInput(format!(
                "level must lie in (0, 1), got {level}"
            )));
        }
        let z = normal.inverse_cdf(0.5 + 0.5 * level);
        intervals.push(
            (0..beta.len())
                .map(|j| {
                    let half = z * sigma * inv[(j, j)].sqrt();
                    Interval {
                        lower: beta[j] - half,
                        upper: beta[j] + half,
                    }
                })
                .collect(),
        );
    }
    Ok(SummaryReport {
        point_mean: beta.as_slice().to_vec(),
        point_median: beta.as_slice().to_vec(),
        levels: levels.to_vec(),
        intervals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::DenseMatrix;

    #[test]
    fn orthogonal_design_gives_textbook_half_width() {
        // three nodes with centered columns spanning a 2-dimensional space
        let x = DenseMatrix::from_row_slice(3, 2, &[1.0, 1.0, -1.0, 1.0, 0.0, -2.0]);
        let adj = DenseMatrix::zeros(3, 3);
        let y = vec![2.0, 0.0, -2.0];
        let d = NetworkDataset::new(adj, x, y).unwrap();
        let r = ols_baseline(&d, 2.0, &[0.95]).unwrap();
        // columns are orthogonal: beta_j = x_j . y / |x_j|^2
        assert!((r.point_mean[0] - 1.0).abs() < 1e-12);
        assert!((r.point_mean[1] - 1.0).abs() < 1e-12);
        let z = 1.959963984540054;
        let w0 = r.intervals[0][0].width() / 2.0;
        let w1 = r.intervals[0][1].width() / 2.0;
        assert!((w0 - z * 2.0 / 2f64.sqrt()).abs() < 1e-9);
        assert!((w1 - z * 2.0 / 6f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn rank_deficiency_is_an_error() {
        let x = DenseMatrix::from_row_slice(3, 2, &[1.0, 2.0, -1.0, -2.0, 0.0, 0.0]);
        let d = NetworkDataset {
            adjacency: DenseMatrix::zeros(3, 3),
            x,
            y: vec![0.0; 3],
        };
        assert!(matches!(
            ols_baseline(&d, 1.0, &[0.9]),
            Err(GfiError::Singular(_))
        ));
    }
}
