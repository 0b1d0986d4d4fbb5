//! Parameter estimation for ODE models by generalized profiling: each state
//! is represented by a cubic B-spline, and the ODE parameters are fitted to a
//! penalized likelihood that trades data fidelity against ODE fidelity.

pub mod dataset;
pub mod integrate;
pub mod models;
pub mod noise;
pub mod numerics;
pub mod parallel;
pub mod profiling;
pub mod spline;
pub mod sweep;
pub mod synth;

pub use dataset::Dataset;
pub use models::{FullParameterVector, ModelError, ModelRegistry, ModelSpec};
pub use noise::{NoiseKind, NoiseModel};
pub use numerics::{Bounds, OptimizerOptions};
pub use parallel::Execution;
pub use profiling::{fit, FitConfig, FitResult, GridSpec};
pub use spline::{SplineBasis, Spline};
