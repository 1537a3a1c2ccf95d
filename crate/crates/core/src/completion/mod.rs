//! Low-rank matrix completion with a factorized, ridge-penalized model.

pub mod model;
pub mod observed;

pub use model::{mc_complete, AlsConfig, McHessian, McModel, MissingEntryReport};
pub use observed::{project_omega, FactorPair, ObservedMatrix};
