//! CP-decomposed coefficient tensors.
//!
//! Tensors are stored flat with the first mode varying fastest, so a 2-way tensor is
//! a column-major matrix. Factor blocks follow the same convention: mode `d` is a
//! `shape[d] x rank` column-major block, and blocks are concatenated in mode order.

use crate::error::{GfiError, Result};
use crate::numerics::DenseMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl DenseTensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.iter().any(|&p| p == 0) {
            return Err(GfiError::InvalidInput(format!(
                "bad tensor shape {shape:?}"
            )));
        }
        if data.len() != shape.iter().product::<usize>() {
            return Err(GfiError::Dimension(format!(
                "tensor of shape {shape:?} needs {} entries, got {}",
                shape.iter().product::<usize>(),
                data.len()
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Entry at a multi-index.
    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[linear_index(&self.shape, idx)]
    }

    /// View a 2-way tensor as a matrix.
    pub fn to_matrix(&self) -> Option<DenseMatrix> {
        (self.shape.len() == 2)
            .then(|| DenseMatrix::from_column_slice(self.shape[0], self.shape[1], &self.data))
    }

    pub fn nonzero_fraction(&self) -> f64 {
        self.data.iter().filter(|v| **v != 0.0).count() as f64 / self.data.len() as f64
    }
}

pub fn linear_index(shape: &[usize], idx: &[usize]) -> usize {
    let mut lin = 0;
    for d in (0..shape.len()).rev() {
        lin = lin * shape[d] + idx[d];
    }
    lin
}

/// `mode_indices(shape)[d][lin]` is the mode-`d` index of flat position `lin`.
pub fn mode_indices(shape: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = shape.iter().product();
    let mut out = vec![Vec::with_capacity(total); shape.len()];
    for lin in 0..total {
        let mut rest = lin;
        for (d, &p) in shape.iter().enumerate() {
            out[d].push(rest % p);
            rest /= p;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct CpFactors {
    pub rank: usize,
    /// One `p_d x rank` matrix per mode; column `r` is the mode-`d` vector of term `r`.
    pub factors: Vec<DenseMatrix>,
}

impl CpFactors {
    pub fn new(factors: Vec<DenseMatrix>) -> Result<Self> {
        let rank = factors.first().map(|f| f.ncols()).unwrap_or(0);
        if rank == 0 || factors.iter().any(|f| f.ncols() != rank || f.nrows() == 0) {
            return Err(GfiError::InvalidInput(
                "CP factors need a common positive rank".into(),
            ));
        }
        Ok(Self { rank, factors })
    }

    pub fn shape(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.nrows()).collect()
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn from_flat(shape: &[usize], rank: usize, flat: &[f64]) -> Result<Self> {
        let need = shape.iter().sum::<usize>() * rank;
        if flat.len() != need {
            return Err(GfiError::Dimension(format!(
                "CP flat vector needs {need} entries, got {}",
                flat.len()
            )));
        }
        let mut off = 0;
        let mut factors = Vec::with_capacity(shape.len());
        for &p in shape {
            factors.push(DenseMatrix::from_column_slice(
                p,
                rank,
                &flat[off..off + p * rank],
            ));
            off += p * rank;
        }
        Self::new(factors)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.factors
            .iter()
            .flat_map(|f| f.as_slice().iter().copied())
            .collect()
    }
}

/// `B = sum_r beta_1^r o ... o beta_D^r`.
pub fn cp_compose(f: &CpFactors) -> DenseTensor {
    let shape = f.shape();
    let idx = mode_indices(&shape);
    let total: usize = shape.iter().product();
    let mut data = vec![0.0; total];
    for (lin, slot) in data.iter_mut().enumerate() {
        let mut s = 0.0;
        for r in 0..f.rank {
            let mut prod = 1.0;
            for (d, fac) in f.factors.iter().enumerate() {
                prod *= fac[(idx[d][lin], r)];
            }
            s += prod;
        }
        *slot = s;
    }
    DenseTensor { shape, data }
}

/// `<X, B>` without materializing `B` as a separate buffer per term.
pub fn tr_predict(x: &DenseTensor, f: &CpFactors) -> Result<f64> {
    let shape = f.shape();
    if x.shape != shape {
        return Err(GfiError::Dimension(format!(
            "predictor shape {:?} does not match coefficient shape {shape:?}",
            x.shape
        )));
    }
    let idx = mode_indices(&shape);
    let mut total = 0.0;
    for r in 0..f.rank {
        for (lin, &v) in x.data.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let mut prod = v;
            for (d, fac) in f.factors.iter().enumerate() {
                prod *= fac[(idx[d][lin], r)];
            }
            total += prod;
        }
    }
    Ok(total)
}
