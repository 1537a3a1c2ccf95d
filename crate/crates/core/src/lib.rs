pub mod completion;
pub mod engine;
pub mod error;
pub mod harness;
pub mod linear;
pub mod network;
pub mod numerics;
pub mod simgen;
pub mod tensor;

pub use engine::{
    run_autogfi, summarize, AdditiveNoiseModel, FiducialSample, GfiConfig, SigmaSpec,
};
pub use error::{GfiError, Result};
