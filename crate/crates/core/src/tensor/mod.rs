//! Tensor regression with a CP-decomposed, l1-penalized coefficient.

pub mod cp;
pub mod regression;

pub use cp::{cp_compose, tr_predict, CpFactors, DenseTensor};
pub use regression::{
    balance_scales, lasso_cd, soft_threshold, CpFit, CpInit, CpSolverConfig, TensorDataset,
    TensorModel,
};
