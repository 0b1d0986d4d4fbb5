//! Generalized profiling: splines that fit the data are pulled toward
//! solutions of the ODE by alternating a linear spline update with a
//! Nelder–Mead search over the ODE parameters and the noise scale.

mod fit;
mod grid;
mod losses;
mod problem;

pub use fit::{fit, FitConfig, FitError, FitResult, IterationRecord, Warnings};
pub use grid::GridSpec;
pub use losses::{
    first_iteration_weights, penalized_loss, update_weights, DataLoss, WeightState, WeightUpdate,
    WEIGHT_CAP,
};
pub use problem::{Profiler, Samples, StackedSystem};

use thiserror::Error;

use crate::dataset::{Dataset, DatasetError};
use crate::models::{ModelError, ModelSpec};
use crate::noise::{NoiseError, NoiseKind, NoiseModel};
use crate::numerics::{Bounds, Maximum, NumericsError, OptimizerOptions};
use crate::spline::{Spline, SplineError};

/// Default lognormal floor, relative to the largest observation.
pub const DEFAULT_LOGNORMAL_FLOOR: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfilingError {
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("data density is not finite for species {species} at observation {index}")]
    NonFiniteDensity { species: usize, index: usize },
    #[error("stacked system for species {species} is rank deficient (rank {rank} of {cols})")]
    Degenerate { species: usize, rank: usize, cols: usize },
    #[error("dataset has {data} species but model `{model}` has {expected}")]
    SpeciesMismatch {
        model: String,
        expected: usize,
        data: usize,
    },
    #[error("invalid enforcement grid: {0}")]
    Grid(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("loss is not finite: {0}")]
    NonFiniteLoss(&'static str),
}

/// `xi_s(t) = f_s'(t) - rhs_s(t, f(t), theta)` for every species.
pub fn discrepancy(
    splines: &[Spline],
    model: &ModelSpec,
    theta: &[f64],
    t: f64,
) -> Result<Vec<f64>, ProfilingError> {
    model.check_params(theta.len())?;
    model.check_state(splines.len())?;
    let mut state = Vec::with_capacity(splines.len());
    let mut slope = Vec::with_capacity(splines.len());
    for s in splines {
        let (v, d) = s.eval_both(t)?;
        state.push(v);
        slope.push(d);
    }
    let mut rhs = vec![0.0; splines.len()];
    model.rhs_into(t, &state, theta, &mut rhs);
    Ok(slope.iter().zip(&rhs).map(|(d, r)| d - r).collect())
}

/// `l_m = -(1/K) sum_s sum_k xi_s(t_k)^2`.
pub fn model_loss(
    splines: &[Spline],
    model: &ModelSpec,
    theta: &[f64],
    grid: &[f64],
) -> Result<f64, ProfilingError> {
    model.check_params(theta.len())?;
    let samples = Samples::from_splines(splines, grid)?;
    model.check_state(samples.species())?;
    Ok(samples.model_loss(model, theta))
}

/// Sum of observation log-densities about the spline predictions.
pub fn data_loss(splines: &[Spline], dataset: &Dataset, noise: &NoiseModel) -> Result<f64, ProfilingError> {
    let preds = problem::predictions(splines, dataset)?;
    Ok(losses::data_loss(&preds, dataset, noise.kind(), noise.sigma(), DEFAULT_LOGNORMAL_FLOOR)?.value)
}

/// One linear update of every species' coefficients.
pub fn spline_update(
    splines: &[Spline],
    dataset: &Dataset,
    model: &ModelSpec,
    theta: &[f64],
    weights: WeightState,
    grid: &[f64],
) -> Result<Vec<Spline>, ProfilingError> {
    let p = Profiler::new(dataset, model, NoiseKind::Gaussian, grid.to_vec())?;
    p.spline_update(splines, theta, weights)
}

/// The weighted `(J + K) x J` system solved for species `species`.
pub fn stacked_system(
    splines: &[Spline],
    dataset: &Dataset,
    model: &ModelSpec,
    theta: &[f64],
    weights: WeightState,
    grid: &[f64],
    species: usize,
) -> Result<StackedSystem, ProfilingError> {
    let p = Profiler::new(dataset, model, NoiseKind::Gaussian, grid.to_vec())?;
    p.stacked_system(&p.samples(splines)?, theta, weights, species)
}

/// Maximizes `l_m` over the ODE parameters alone.
pub fn optimize_theta_model_only(
    splines: &[Spline],
    model: &ModelSpec,
    grid: &[f64],
    bounds: &Bounds,
    theta0: &[f64],
    opts: &OptimizerOptions,
) -> Result<Maximum, ProfilingError> {
    model.check_params(theta0.len())?;
    let samples = Samples::from_splines(splines, grid)?;
    model.check_state(samples.species())?;
    problem::maximize_model_loss(&samples, model, bounds, theta0, opts, 0)
}

/// Maximizes `w_d l_d + w_m l_m` over `(theta, sigma)`; `start` and `bounds`
/// carry sigma as their last coordinate.
#[allow(clippy::too_many_arguments)]
pub fn optimize_theta_penalized(
    splines: &[Spline],
    dataset: &Dataset,
    model: &ModelSpec,
    noise: NoiseKind,
    weights: WeightState,
    grid: &[f64],
    bounds: &Bounds,
    start: &[f64],
    opts: &OptimizerOptions,
) -> Result<Maximum, ProfilingError> {
    let p = Profiler::new(dataset, model, noise, grid.to_vec())?;
    p.optimize_penalized(splines, weights, bounds, start, opts, 0)
}
