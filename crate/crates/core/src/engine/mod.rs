//! Model-agnostic fiducial sampler.

pub mod cv;
pub mod filter;
pub mod model;
pub mod sampler;
pub mod summary;

pub use cv::{cv_lambda, fold_assignment, log_grid, CrossValidate};
pub use filter::acceptance_filter;
pub use model::{
    debias_step, hessian_default, AdditiveNoiseModel, FitOutcome, ParamLayout, ParameterPoint,
    SigmaSpec,
};
pub use sampler::{resolve_sigma, run_autogfi, FiducialDraw, FiducialSample, GfiConfig};
pub use summary::{summarize, summarize_values, Interval, SummaryReport};
