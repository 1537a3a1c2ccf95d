//! Linear regression `Y = X theta + U` with an optional ridge penalty.

use crate::engine::{log_grid, AdditiveNoiseModel, CrossValidate, FitOutcome, ParamLayout};
use crate::error::{GfiError, Result};
use crate::numerics::linalg::ensure_finite;
use crate::numerics::{solve_spd, DenseMatrix, RandomStream, Vector};

#[derive(Clone, Debug)]
pub struct LinearModel {
    x: DenseMatrix,
    y: Vec<f64>,
    gram: DenseMatrix,
}

impl LinearModel {
    pub fn new(x: DenseMatrix, y: Vec<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(GfiError::Dimension(format!(
                "X has {} rows but y has {} entries",
                x.nrows(),
                y.len()
            )));
        }
        if x.ncols() == 0 || x.nrows() == 0 {
            return Err(GfiError::InvalidInput("empty design".into()));
        }
        ensure_finite(&x, "design")?;
        let gram = x.tr_mul(&x);
        Ok(Self { x, y, gram })
    }

    /// `Y_i = theta + U_i`.
    pub fn location(y: Vec<f64>) -> Result<Self> {
        Self::new(DenseMatrix::from_element(y.len(), 1, 1.0), y)
    }

    pub fn design(&self) -> &DenseMatrix {
        &self.x
    }

    /// Minimizer of `|v - X theta|^2 + lambda |theta|^2`.
    pub fn ridge_solve(&self, v: &[f64], lambda: f64) -> Result<Vec<f64>> {
        let p = self.x.ncols();
        let a = &self.gram + DenseMatrix::identity(p, p) * lambda;
        let b = self.x.tr_mul(&Vector::from_column_slice(v));
        Ok(solve_spd(&a, &b)?.as_slice().to_vec())
    }
}

impl CrossValidate for LinearModel {
    fn cv_len(&self) -> usize {
        self.y.len()
    }

    fn cv_errors(
        &self,
        grid: &[f64],
        folds: &[usize],
        n_folds: usize,
        _stream: &RandomStream,
    ) -> Result<Vec<f64>> {
        let mut sse = vec![0.0; grid.len()];
        for k in 0..n_folds {
            let train: Vec<usize> = (0..folds.len()).filter(|&i| folds[i] != k).collect();
            let test: Vec<usize> = (0..folds.len()).filter(|&i| folds[i] == k).collect();
            let sub = LinearModel::new(
                self.x.select_rows(&train),
                train.iter().map(|&i| self.y[i]).collect(),
            )?;
            let xt = self.x.select_rows(&test);
            for (g, &lambda) in grid.iter().enumerate() {
                let theta = sub.ridge_solve(&sub.y, lambda)?;
                let pred = &xt * Vector::from_vec(theta);
                for (j, &i) in test.iter().enumerate() {
                    sse[g] += (self.y[i] - pred[j]).powi(2);
                }
            }
        }
        Ok(sse.into_iter().map(|s| s / folds.len() as f64).collect())
    }

    /// Eight points from `1e-4 * tr(X^T X)` to `tr(X^T X)`.
    fn default_grid(&self) -> Vec<f64> {
        let top = self.gram.trace().max(f64::MIN_POSITIVE);
        log_grid(1e-4 * top, top, 8).unwrap_or_else(|_| vec![top])
    }
}

impl AdditiveNoiseModel for LinearModel {
    fn noise_len(&self) -> usize {
        self.y.len()
    }

    fn layout(&self) -> ParamLayout {
        ParamLayout::Vector {
            len: self.x.ncols(),
        }
    }

    fn responses(&self) -> &[f64] {
        &self.y
    }

    fn predict(&self, theta: &[f64]) -> Vec<f64> {
        (&self.x * Vector::from_column_slice(theta))
            .as_slice()
            .to_vec()
    }

    fn fit(&self, u_star: &[f64], lambda: f64, _stream: &RandomStream) -> Result<FitOutcome> {
        let v: Vec<f64> = self.y.iter().zip(u_star).map(|(y, u)| y - u).collect();
        Ok(FitOutcome {
            theta: self.ridge_solve(&v, lambda)?,
            converged: true,
            iterations: 1,
        })
    }

    fn penalty_gradient(&self, theta: &[f64], lambda: f64) -> Vec<f64> {
        theta.iter().map(|t| lambda * t).collect()
    }

    fn jacobian(&self, _theta: &[f64]) -> DenseMatrix {
        self.x.clone()
    }

    fn curvature(&self, theta: &[f64], _weights: &[f64]) -> DenseMatrix {
        DenseMatrix::zeros(theta.len(), theta.len())
    }

    fn active_mask(&self, theta: &[f64]) -> Vec<bool> {
        vec![true; theta.len()]
    }

    /// Residual scale of the unpenalized fit with `n - p` degrees of freedom.
    fn estimate_sigma(&self, _lambda: f64, _stream: &RandomStream) -> Result<f64> {
        let (n, p) = self.x.shape();
        if n <= p {
            return Err(GfiError::InvalidInput(
                "need more observations than coefficients".into(),
            ));
        }
        let theta = self.ridge_solve(&self.y, 0.0)?;
        let rss: f64 = self
            .residual(&theta, &vec![0.0; n])
            .iter()
            .map(|r| r * r)
            .sum();
        Ok((rss / (n - p) as f64).sqrt())
    }
}
