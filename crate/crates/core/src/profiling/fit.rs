use std::fmt;

use serde::{Deserialize, Serialize};

use super::grid::GridSpec;
use super::losses::{first_iteration_weights, update_weights, WeightState};
use super::problem::{maximize_model_loss, Profiler};
use super::{ProfilingError, DEFAULT_LOGNORMAL_FLOOR};
use crate::dataset::Dataset;
use crate::models::{ModelSpec, SIGMA_BOUNDS};
use crate::noise::NoiseKind;
use crate::numerics::{Bounds, OptimizerOptions};
use crate::parallel::Execution;
use crate::spline::Spline;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Penalized cycles after the model-only step.
    pub iterations: usize,
    pub grid: GridSpec,
    pub optimizer: OptimizerOptions,
    /// Starting ODE parameters; the model default when absent.
    pub theta0: Option<Vec<f64>>,
    /// Parameter box; the model default when absent.
    pub bounds: Option<Vec<(f64, f64)>>,
    pub sigma_bounds: (f64, f64),
    /// Smallest log-normal prediction, as a fraction of the largest
    /// observation.
    pub lognormal_floor: f64,
    /// Extra Nelder–Mead runs started from the previous answer, each with a
    /// simplex ten times smaller than the last.
    pub restarts: usize,
    /// Policy for assembling the grid collocation matrices.
    pub execution: Execution,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            iterations: 10,
            grid: GridSpec::Auto,
            optimizer: OptimizerOptions::default(),
            theta0: None,
            bounds: None,
            sigma_bounds: SIGMA_BOUNDS,
            lognormal_floor: DEFAULT_LOGNORMAL_FLOOR,
            restarts: 3,
            execution: Execution::default(),
        }
    }
}

/// One entry of the fit history. Entry 0 is the model-only step on the
/// interpolant; entry `n >= 1` is the `n`-th penalized cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub theta: Vec<f64>,
    /// Not estimated by the model-only step.
    pub sigma: Option<f64>,
    pub weights: WeightState,
    /// Losses the weights were computed from (`l_d` is absent for the
    /// first-iteration rule).
    pub weight_data_loss: Option<f64>,
    pub weight_model_loss: f64,
    /// Losses at this entry's splines, `theta` and `sigma`.
    pub data_loss: Option<f64>,
    pub model_loss: f64,
    pub penalized_loss: Option<f64>,
    /// Grid maximum of `|xi_s|` per species.
    pub max_abs_xi: Vec<f64>,
    pub optimizer_evals: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Warnings {
    /// Weights replaced by the cap because a loss was exactly zero.
    pub weight_caps: usize,
    /// Log-normal predictions raised to the floor at recorded evaluations.
    pub floor_clamps: usize,
    /// Non-positive observations left out of the log-normal likelihood.
    pub skipped_observations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    pub noise: NoiseKind,
    pub species_names: Vec<String>,
    pub param_names: Vec<String>,
    pub grid: Vec<f64>,
    pub interpolant: Vec<Spline>,
    pub splines: Vec<Spline>,
    pub records: Vec<IterationRecord>,
    /// `xi[s][k]` on the grid at the final splines and parameters.
    pub xi_samples: Vec<Vec<f64>>,
    /// Final splines evaluated at the first observation time.
    pub initial_condition_estimates: Vec<f64>,
    pub warnings: Warnings,
    pub config: FitConfig,
}

impl FitResult {
    pub fn theta_history(&self) -> Vec<&[f64]> {
        self.records.iter().map(|r| r.theta.as_slice()).collect()
    }

    pub fn final_record(&self) -> &IterationRecord {
        self.records.last().expect("fit history is never empty")
    }

    pub fn final_theta(&self) -> &[f64] {
        &self.final_record().theta
    }

    pub fn final_sigma(&self) -> f64 {
        self.final_record().sigma.expect("penalized cycles estimate sigma")
    }

    /// Largest `|xi|` over species after the interpolation step and at the end.
    pub fn xi_reduction(&self) -> (f64, f64) {
        let max = |r: &IterationRecord| r.max_abs_xi.iter().fold(0.0f64, |a, b| a.max(*b));
        (max(&self.records[0]), max(self.final_record()))
    }
}

/// A failed fit together with whatever history had been recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct FitError {
    pub error: ProfilingError,
    pub records: Vec<IterationRecord>,
    pub warnings: Warnings,
}

impl fmt::Display for FitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "fit aborted after {} recorded iterations: {}", self.records.len(), self.error)
    }
}

impl std::error::Error for FitError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<ProfilingError> for FitError {
    fn from(error: ProfilingError) -> Self {
        Self {
            error,
            records: Vec::new(),
            warnings: Warnings::default(),
        }
    }
}

/// Runs the full schedule: interpolate, maximize `l_m` alone, then
/// `config.iterations` cycles of spline update, weight update and joint
/// maximization over `(theta, sigma)`.
pub fn fit(
    dataset: &Dataset,
    model: &ModelSpec,
    noise: NoiseKind,
    config: &FitConfig,
) -> Result<FitResult, FitError> {
    let setup = Setup::new(dataset, model, noise, config)?;
    let mut state = State {
        records: Vec::with_capacity(config.iterations + 1),
        warnings: Warnings::default(),
    };
    match run(&setup, &mut state) {
        Ok((interpolant, splines, theta)) => {
            let samples = setup.profiler.samples(&splines).map_err(|e| state.fail(e))?;
            let t0 = dataset.times()[0];
            let initial = splines
                .iter()
                .map(|s| s.eval(t0))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| state.fail(e.into()))?;
            Ok(FitResult {
                model: model.name().to_string(),
                noise,
                species_names: dataset.species_names().to_vec(),
                param_names: model.param_names().to_vec(),
                grid: setup.profiler.grid().to_vec(),
                interpolant,
                xi_samples: samples.discrepancy(model, &theta),
                splines,
                records: state.records,
                initial_condition_estimates: initial,
                warnings: state.warnings,
                config: config.clone(),
            })
        }
        Err(e) => Err(state.fail(e)),
    }
}

struct Setup<'a> {
    profiler: Profiler<'a>,
    bounds: Bounds,
    full_bounds: Bounds,
    theta0: Vec<f64>,
    config: &'a FitConfig,
}

impl<'a> Setup<'a> {
    fn new(
        dataset: &'a Dataset,
        model: &'a ModelSpec,
        noise: NoiseKind,
        config: &'a FitConfig,
    ) -> Result<Self, ProfilingError> {
        if config.iterations == 0 {
            return Err(ProfilingError::Config("iterations must be at least 1".into()));
        }
        let grid = config.grid.resolve(dataset.times())?;
        let profiler = Profiler::with_execution(dataset, model, noise, grid, config.execution)?
            .with_floor(config.lognormal_floor)?;
        let pairs = config.bounds.clone().unwrap_or_else(|| model.param_bounds().to_vec());
        model.check_params(pairs.len())?;
        let bounds = Bounds::from_pairs(&pairs)?;
        let full_bounds = bounds.extended(config.sigma_bounds.0, config.sigma_bounds.1)?;
        let theta0 = config.theta0.clone().unwrap_or_else(|| model.default_theta0().to_vec());
        model.check_params(theta0.len())?;
        if !bounds.contains(&theta0) {
            return Err(ProfilingError::Config("initial parameters lie outside the bounds".into()));
        }
        Ok(Self {
            profiler,
            bounds,
            full_bounds,
            theta0,
            config,
        })
    }
}

struct State {
    records: Vec<IterationRecord>,
    warnings: Warnings,
}

impl State {
    fn fail(&mut self, error: ProfilingError) -> FitError {
        FitError {
            error,
            records: std::mem::take(&mut self.records),
            warnings: self.warnings,
        }
    }
}

type Outcome = (Vec<Spline>, Vec<Spline>, Vec<f64>);

fn run(setup: &Setup<'_>, state: &mut State) -> Result<Outcome, ProfilingError> {
    let p = &setup.profiler;
    let model = p.model();
    let opts = &setup.config.optimizer;
    let restarts = setup.config.restarts;
    let n_params = setup.theta0.len();

    if p.noise() == NoiseKind::LogNormal {
        state.warnings.skipped_observations =
            p.dataset().values().iter().flatten().filter(|y| !(**y > 0.0)).count();
    }

    let interpolant = p.interpolate()?;
    let samples = p.samples(&interpolant)?;
    let first = maximize_model_loss(&samples, model, &setup.bounds, &setup.theta0, opts, restarts)?;
    let mut theta = first.x;
    let l_m = first.value;
    let w = first_iteration_weights(l_m)?;
    state.warnings.weight_caps += w.capped;
    let mut weights = w.weights;
    state.records.push(IterationRecord {
        iteration: 0,
        theta: theta.clone(),
        sigma: None,
        weights,
        weight_data_loss: None,
        weight_model_loss: l_m,
        data_loss: None,
        model_loss: l_m,
        penalized_loss: None,
        max_abs_xi: samples.max_abs_discrepancy(model, &theta),
        optimizer_evals: first.evals,
    });

    let mut splines = interpolant.clone();
    let mut sigma: Option<f64> = None;
    for n in 1..=setup.config.iterations {
        splines = p.spline_update(&splines, &theta, weights)?;
        let preds = p.predictions(&splines)?;
        let s = match sigma {
            Some(s) => s,
            None => {
                let (lo, hi) = setup.config.sigma_bounds;
                p.moment_sigma(&preds)?.clamp(lo, hi)
            }
        };
        let samples = p.samples(&splines)?;
        let dl = p.data_loss(&preds, s)?;
        state.warnings.floor_clamps += dl.clamped;
        let l_m = samples.model_loss(model, &theta);
        let w = update_weights(dl.value, l_m)?;
        state.warnings.weight_caps += w.capped;
        weights = w.weights;

        let mut start = theta.clone();
        start.push(s);
        let best = p.optimize_penalized(&splines, weights, &setup.full_bounds, &start, opts, restarts)?;
        theta = best.x[..n_params].to_vec();
        let new_sigma = best.x[n_params];
        sigma = Some(new_sigma);

        let dl_after = p.data_loss(&preds, new_sigma)?;
        state.warnings.floor_clamps += dl_after.clamped;
        let lm_after = samples.model_loss(model, &theta);
        state.records.push(IterationRecord {
            iteration: n,
            theta: theta.clone(),
            sigma,
            weights,
            weight_data_loss: Some(dl.value),
            weight_model_loss: l_m,
            data_loss: Some(dl_after.value),
            model_loss: lm_after,
            penalized_loss: Some(best.value),
            max_abs_xi: samples.max_abs_discrepancy(model, &theta),
            optimizer_evals: best.evals,
        });
    }
    Ok((interpolant, splines, theta))
}
