//! Numerical kernels shared by the engine and the model plugins.

pub mod linalg;
pub mod quantile;
pub mod rng;
pub mod spectral;

pub use linalg::{
    matrix_sqrt_and_pinv_sqrt, orthonormal_columns, solve_spd, symmetric_eigen, top_singular,
    truncated_pinv, truncated_pinv_detail, DenseMatrix, SvdResult, SymmetricRoot, TruncatedPinv,
    Vector,
};
pub use quantile::{median, quantile, quantiles};
pub use rng::{gaussian, RandomStream};
pub use spectral::{
    truncated_pinv_apply, KrylovOptions, SolveRoute, SymmetricOperator, TruncatedSolve,
};
