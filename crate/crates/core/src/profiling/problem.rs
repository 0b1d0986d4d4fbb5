use nalgebra::{DMatrix, DVector};

use super::losses::{self, DataLoss, WeightState};
use super::{ProfilingError, DEFAULT_LOGNORMAL_FLOOR};
use crate::dataset::Dataset;
use crate::models::ModelSpec;
use crate::noise::NoiseKind;
use crate::numerics::{nelder_mead_max, weighted_least_squares_solve, Bounds, Maximum, NumericsError, OptimizerOptions};
use crate::parallel::Execution;
use crate::spline::{Spline, SplineBasis};

/// Spline values and slopes for all species on the enforcement grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    grid: Vec<f64>,
    species: usize,
    /// `values[k * S + s]`
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl Samples {
    /// Direct evaluation, one grid point at a time.
    pub fn from_splines(splines: &[Spline], grid: &[f64]) -> Result<Self, ProfilingError> {
        let species = splines.len();
        let mut values = Vec::with_capacity(grid.len() * species);
        let mut slopes = Vec::with_capacity(grid.len() * species);
        for &t in grid {
            for s in splines {
                let (v, d) = s.eval_both(t)?;
                values.push(v);
                slopes.push(d);
            }
        }
        Ok(Self {
            grid: grid.to_vec(),
            species,
            values,
            slopes,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn species(&self) -> usize {
        self.species
    }

    pub fn value(&self, k: usize, s: usize) -> f64 {
        self.values[k * self.species + s]
    }

    fn state(&self, k: usize) -> &[f64] {
        &self.values[k * self.species..(k + 1) * self.species]
    }

    /// `rhs(t_k, f(t_k), theta)` laid out as `[s][k]`.
    pub fn model_rhs(&self, model: &ModelSpec, theta: &[f64]) -> Vec<Vec<f64>> {
        let s_count = self.species;
        let mut out = vec![Vec::with_capacity(self.grid.len()); s_count];
        let mut buf = vec![0.0; s_count];
        for (k, &t) in self.grid.iter().enumerate() {
            model.rhs_into(t, self.state(k), theta, &mut buf);
            for (col, r) in out.iter_mut().zip(&buf) {
                col.push(*r);
            }
        }
        out
    }

    /// Discrepancy traces `xi[s][k]`.
    pub fn discrepancy(&self, model: &ModelSpec, theta: &[f64]) -> Vec<Vec<f64>> {
        let mut xi = self.model_rhs(model, theta);
        for (s, col) in xi.iter_mut().enumerate() {
            for (k, v) in col.iter_mut().enumerate() {
                *v = self.slopes[k * self.species + s] - *v;
            }
        }
        xi
    }

    pub fn max_abs_discrepancy(&self, model: &ModelSpec, theta: &[f64]) -> Vec<f64> {
        self.discrepancy(model, theta)
            .iter()
            .map(|col| col.iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .collect()
    }

    /// `-(1/K) sum_s sum_k xi^2`.
    pub fn model_loss(&self, model: &ModelSpec, theta: &[f64]) -> f64 {
        let s_count = self.species;
        let mut buf = vec![0.0; s_count];
        let mut acc = 0.0;
        for (k, &t) in self.grid.iter().enumerate() {
            model.rhs_into(t, self.state(k), theta, &mut buf);
            let slopes = &self.slopes[k * s_count..(k + 1) * s_count];
            for (d, r) in slopes.iter().zip(&buf) {
                let xi = d - r;
                acc += xi * xi;
            }
        }
        -acc / self.grid.len() as f64
    }
}

/// A weighted stacked least-squares problem for one species.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

/// One dataset and model with collocation matrices assembled once.
#[derive(Debug, Clone)]
pub struct Profiler<'a> {
    dataset: &'a Dataset,
    model: &'a ModelSpec,
    noise: NoiseKind,
    floor_factor: f64,
    basis: SplineBasis,
    grid: Vec<f64>,
    data_values: DMatrix<f64>,
    grid_values: DMatrix<f64>,
    grid_slopes: DMatrix<f64>,
}

impl<'a> Profiler<'a> {
    pub fn new(
        dataset: &'a Dataset,
        model: &'a ModelSpec,
        noise: NoiseKind,
        grid: Vec<f64>,
    ) -> Result<Self, ProfilingError> {
        Self::with_execution(dataset, model, noise, grid, Execution::Sequential)
    }

    pub fn with_execution(
        dataset: &'a Dataset,
        model: &'a ModelSpec,
        noise: NoiseKind,
        grid: Vec<f64>,
        exec: Execution,
    ) -> Result<Self, ProfilingError> {
        if dataset.species_count() != model.dimension() {
            return Err(ProfilingError::SpeciesMismatch {
                model: model.name().to_string(),
                expected: model.dimension(),
                data: dataset.species_count(),
            });
        }
        if grid.is_empty() {
            return Err(ProfilingError::Grid("empty enforcement grid".into()));
        }
        let basis = SplineBasis::from_data_times(dataset.times())?;
        let data_values = basis.collocation_with(dataset.times(), Execution::Sequential)?.values;
        let on_grid = basis.collocation_with(&grid, exec)?;
        Ok(Self {
            dataset,
            model,
            noise,
            floor_factor: DEFAULT_LOGNORMAL_FLOOR,
            basis,
            grid,
            data_values,
            grid_values: on_grid.values,
            grid_slopes: on_grid.derivatives,
        })
    }

    pub fn with_floor(mut self, floor_factor: f64) -> Result<Self, ProfilingError> {
        if !(floor_factor > 0.0) || !floor_factor.is_finite() {
            return Err(ProfilingError::Config(format!(
                "lognormal floor must be positive, got {floor_factor}"
            )));
        }
        self.floor_factor = floor_factor;
        Ok(self)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn basis(&self) -> &SplineBasis {
        &self.basis
    }

    pub fn dataset(&self) -> &Dataset {
        self.dataset
    }

    pub fn model(&self) -> &ModelSpec {
        self.model
    }

    pub fn noise(&self) -> NoiseKind {
        self.noise
    }

    /// Exact interpolant of each species.
    pub fn interpolate(&self) -> Result<Vec<Spline>, ProfilingError> {
        let lu = self.data_values.clone().lu();
        (0..self.dataset.species_count())
            .map(|s| {
                let y = DVector::from_column_slice(self.dataset.species(s));
                let c = lu.solve(&y).ok_or(crate::spline::SplineError::DegenerateGrid)?;
                Ok(Spline::new(self.basis.clone(), c.as_slice().to_vec())?)
            })
            .collect()
    }

    fn check_splines(&self, splines: &[Spline]) -> Result<(), ProfilingError> {
        self.model.check_state(splines.len())?;
        if splines.iter().any(|s| s.basis() != &self.basis) {
            return Err(ProfilingError::Config(
                "splines must use the basis built from the data times".into(),
            ));
        }
        Ok(())
    }

    pub fn samples(&self, splines: &[Spline]) -> Result<Samples, ProfilingError> {
        self.check_splines(splines)?;
        let s_count = splines.len();
        let k_count = self.grid.len();
        let mut values = vec![0.0; k_count * s_count];
        let mut slopes = vec![0.0; k_count * s_count];
        for (s, sp) in splines.iter().enumerate() {
            let c = DVector::from_column_slice(sp.coefficients());
            let v = &self.grid_values * &c;
            let d = &self.grid_slopes * &c;
            for k in 0..k_count {
                values[k * s_count + s] = v[k];
                slopes[k * s_count + s] = d[k];
            }
        }
        Ok(Samples {
            grid: self.grid.clone(),
            species: s_count,
            values,
            slopes,
        })
    }

    /// Spline values at the observation times, `[s][j]`.
    pub fn predictions(&self, splines: &[Spline]) -> Result<Vec<Vec<f64>>, ProfilingError> {
        self.check_splines(splines)?;
        Ok(splines
            .iter()
            .map(|sp| {
                let c = DVector::from_column_slice(sp.coefficients());
                (&self.data_values * c).as_slice().to_vec()
            })
            .collect())
    }

    pub fn data_loss(&self, preds: &[Vec<f64>], sigma: f64) -> Result<DataLoss, ProfilingError> {
        losses::data_loss(preds, self.dataset, self.noise, sigma, self.floor_factor)
    }

    /// Moment estimate of the noise scale from the residuals of `preds`.
    pub fn moment_sigma(&self, preds: &[Vec<f64>]) -> Result<f64, ProfilingError> {
        losses::moment_sigma(preds, self.dataset, self.noise, self.floor_factor)
    }

    pub fn stacked_system(
        &self,
        samples: &Samples,
        theta: &[f64],
        w: WeightState,
        species: usize,
    ) -> Result<StackedSystem, ProfilingError> {
        self.model.check_params(theta.len())?;
        if species >= self.dataset.species_count() {
            return Err(ProfilingError::Config(format!("no species with index {species}")));
        }
        let b = samples.model_rhs(self.model, theta);
        Ok(self.assemble(&b[species], w, species))
    }

    fn assemble(&self, model_rhs: &[f64], w: WeightState, species: usize) -> StackedSystem {
        let j = self.data_values.nrows();
        let k = self.grid.len();
        let cols = self.basis.len();
        let mut matrix = DMatrix::zeros(j + k, cols);
        matrix.view_mut((0, 0), (j, cols)).copy_from(&(&self.data_values * w.w_d));
        matrix.view_mut((j, 0), (k, cols)).copy_from(&(&self.grid_slopes * w.w_m));
        let mut rhs = DVector::zeros(j + k);
        for (i, y) in self.dataset.species(species).iter().enumerate() {
            rhs[i] = w.w_d * y;
        }
        for (i, r) in model_rhs.iter().enumerate() {
            rhs[j + i] = w.w_m * r;
        }
        StackedSystem { matrix, rhs }
    }

    /// Solves every species' stacked system, the model rows using the right
    /// side evaluated on `splines`.
    pub fn spline_update(
        &self,
        splines: &[Spline],
        theta: &[f64],
        w: WeightState,
    ) -> Result<Vec<Spline>, ProfilingError> {
        self.model.check_params(theta.len())?;
        let samples = self.samples(splines)?;
        let b = samples.model_rhs(self.model, theta);
        let j = self.data_values.nrows();
        let k = self.grid.len();
        let cols = self.basis.len();
        let mut unweighted = DMatrix::zeros(j + k, cols);
        unweighted.view_mut((0, 0), (j, cols)).copy_from(&self.data_values);
        unweighted.view_mut((j, 0), (k, cols)).copy_from(&self.grid_slopes);
        let mut row_weights = vec![w.w_d; j];
        row_weights.resize(j + k, w.w_m);
        b.iter()
            .enumerate()
            .map(|(s, bs)| {
                let mut rhs = DVector::zeros(j + k);
                rhs.rows_mut(0, j).copy_from_slice(self.dataset.species(s));
                rhs.rows_mut(j, k).copy_from_slice(bs);
                let c = weighted_least_squares_solve(&unweighted, &row_weights, &rhs).map_err(|e| match e {
                    NumericsError::RankDeficient { rank, cols } => {
                        ProfilingError::Degenerate { species: s, rank, cols }
                    }
                    other => other.into(),
                })?;
                if c.iter().any(|v| !v.is_finite()) {
                    return Err(ProfilingError::NonFiniteLoss("spline coefficients"));
                }
                Ok(Spline::new(self.basis.clone(), c.as_slice().to_vec())?)
            })
            .collect()
    }

    /// Maximizes `w_d l_d + w_m l_m` over `x = (theta, sigma)` with the
    /// splines held fixed.
    pub fn optimize_penalized(
        &self,
        splines: &[Spline],
        w: WeightState,
        bounds: &Bounds,
        start: &[f64],
        opts: &OptimizerOptions,
        restarts: usize,
    ) -> Result<Maximum, ProfilingError> {
        let n = self.model.param_names().len();
        if start.len() != n + 1 || bounds.dim() != n + 1 {
            return Err(ProfilingError::Config(format!(
                "penalized search needs {} coordinates (parameters and sigma)",
                n + 1
            )));
        }
        let samples = self.samples(splines)?;
        let preds = self.predictions(splines)?;
        let objective = |x: &[f64]| {
            let l_d = match self.data_loss(&preds, x[n]) {
                Ok(d) => d.value,
                Err(_) => return f64::NAN,
            };
            let l_m = samples.model_loss(self.model, &x[..n]);
            losses::penalized_loss(l_d, l_m, w)
        };
        maximize(objective, start, bounds, opts, restarts)
    }
}

/// Spline predictions at the observation times for free-standing splines.
pub(crate) fn predictions(splines: &[Spline], dataset: &Dataset) -> Result<Vec<Vec<f64>>, ProfilingError> {
    if splines.len() != dataset.species_count() {
        return Err(ProfilingError::Config(format!(
            "{} splines for {} species",
            splines.len(),
            dataset.species_count()
        )));
    }
    splines
        .iter()
        .map(|s| {
            dataset
                .times()
                .iter()
                .map(|&t| s.eval(t).map_err(ProfilingError::from))
                .collect()
        })
        .collect()
}

pub(crate) fn maximize_model_loss(
    samples: &Samples,
    model: &ModelSpec,
    bounds: &Bounds,
    theta0: &[f64],
    opts: &OptimizerOptions,
    restarts: usize,
) -> Result<Maximum, ProfilingError> {
    maximize(|x: &[f64]| samples.model_loss(model, x), theta0, bounds, opts, restarts)
}

/// Nelder–Mead followed by `restarts` further runs from the best point so
/// far, the `i`-th with an initial simplex `10^-i` times the configured size.
/// Small restart simplices let the search leave a face of the box that a
/// full-size simplex keeps collapsing onto.
pub(crate) fn maximize<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    bounds: &Bounds,
    opts: &OptimizerOptions,
    restarts: usize,
) -> Result<Maximum, ProfilingError> {
    let mut best = nelder_mead_max(&mut f, x0, bounds, opts)?;
    let mut scale = opts.initial_simplex_scale;
    for _ in 0..restarts {
        scale *= 0.1;
        let o = OptimizerOptions {
            initial_simplex_scale: scale,
            ..opts.clone()
        };
        let next = nelder_mead_max(&mut f, &best.x, bounds, &o)?;
        let mut trace = std::mem::take(&mut best.best_trace);
        trace.extend_from_slice(&next.best_trace);
        let evals = best.evals + next.evals;
        let iterations = best.iterations + next.iterations;
        if next.value >= best.value {
            best = next;
        }
        best.best_trace = trace;
        best.evals = evals;
        best.iterations = iterations;
    }
    Ok(best)
}
