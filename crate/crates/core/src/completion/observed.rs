//! Partially observed matrices.

use crate::error::{GfiError, Result};
use crate::numerics::DenseMatrix;

/// Observed entries of an `rows x cols` matrix; unobserved entries read as zero.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservedMatrix {
    pub rows: usize,
    pub cols: usize,
    /// Observed positions; slot `k` of every noise vector refers to `omega[k]`.
    pub omega: Vec<(usize, usize)>,
    pub values: Vec<f64>,
}

impl ObservedMatrix {
    pub fn new(
        rows: usize,
        cols: usize,
        omega: Vec<(usize, usize)>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if omega.is_empty() {
            return Err(GfiError::InvalidInput(
                "at least one entry must be observed".into(),
            ));
        }
        if omega.len() != values.len() {
            return Err(GfiError::Dimension(format!(
                "{} positions for {} values",
                omega.len(),
                values.len()
            )));
        }
        if let Some(&(i, j)) = omega.iter().find(|&&(i, j)| i >= rows || j >= cols) {
            return Err(GfiError::InvalidInput(format!(
                "index ({i}, {j}) outside a {rows}x{cols} matrix"
            )));
        }
        let mut seen = std::collections::HashSet::with_capacity(omega.len());
        if !omega.iter().all(|p| seen.insert(*p)) {
            return Err(GfiError::InvalidInput(
                "observed positions must be distinct".into(),
            ));
        }
        Ok(Self {
            rows,
            cols,
            omega,
            values,
        })
    }

    /// The projection `f(M)` with zeros off the observed set.
    pub fn to_dense(&self) -> DenseMatrix {
        self.scatter(&self.values)
    }

    /// Place per-slot values into a dense matrix.
    pub fn scatter(&self, slot_values: &[f64]) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.rows, self.cols);
        for (&(i, j), &v) in self.omega.iter().zip(slot_values) {
            m[(i, j)] = v;
        }
        m
    }

    pub fn observed_fraction(&self) -> f64 {
        self.omega.len() as f64 / (self.rows * self.cols) as f64
    }

    /// Mask with `true` at observed positions, column-major.
    pub fn observed_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.rows * self.cols];
        for &(i, j) in &self.omega {
            mask[i + self.rows * j] = true;
        }
        mask
    }
}

pub fn project_omega(m: &DenseMatrix, omega: &[(usize, usize)]) -> Result<ObservedMatrix> {
    if let Some(&(i, j)) = omega
        .iter()
        .find(|&&(i, j)| i >= m.nrows() || j >= m.ncols())
    {
        return Err(GfiError::InvalidInput(format!(
            "index ({i}, {j}) outside a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    let values = omega.iter().map(|&(i, j)| m[(i, j)]).collect();
    ObservedMatrix::new(m.nrows(), m.ncols(), omega.to_vec(), values)
}

/// Low-rank factors with `M = A B^T`.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorPair {
    pub a: DenseMatrix,
    pub b: DenseMatrix,
}

impl FactorPair {
    pub fn new(a: DenseMatrix, b: DenseMatrix) -> Result<Self> {
        if a.ncols() != b.ncols() || a.ncols() == 0 {
            return Err(GfiError::Dimension(
                "factors need a common positive rank".into(),
            ));
        }
        Ok(Self { a, b })
    }

    pub fn rank(&self) -> usize {
        self.a.ncols()
    }

    pub fn from_flat(rows: usize, cols: usize, rank: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != (rows + cols) * rank {
            return Err(GfiError::Dimension(format!(
                "factor pair needs {} entries, got {}",
                (rows + cols) * rank,
                flat.len()
            )));
        }
        let a = DenseMatrix::from_column_slice(rows, rank, &flat[..rows * rank]);
        let b = DenseMatrix::from_column_slice(cols, rank, &flat[rows * rank..]);
        Self::new(a, b)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.a
            .as_slice()
            .iter()
            .chain(self.b.as_slice())
            .copied()
            .collect()
    }

    pub fn product(&self) -> DenseMatrix {
        &self.a * self.b.transpose()
    }
}
