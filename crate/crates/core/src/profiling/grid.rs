use serde::{Deserialize, Serialize};

use super::ProfilingError;
use crate::spline::uniform_grid;

/// Points used for synthetic (uniformly sampled) data.
pub const DEFAULT_UNIFORM_K: usize = 1001;

/// The times at which the ODE is enforced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GridSpec {
    /// 1001 uniform points for uniformly spaced data; for non-uniform data
    /// whose times are whole numbers, one point per unit of time.
    #[default]
    Auto,
    Uniform { k: usize },
    Explicit { times: Vec<f64> },
}

impl GridSpec {
    pub fn uniform(k: usize) -> Self {
        GridSpec::Uniform { k }
    }

    /// Concrete enforcement times for data observed at `data_times`.
    pub fn resolve(&self, data_times: &[f64]) -> Result<Vec<f64>, ProfilingError> {
        let (Some(&lo), Some(&hi)) = (data_times.first(), data_times.last()) else {
            return Err(ProfilingError::Grid("no data times".into()));
        };
        let grid = match self {
            GridSpec::Auto => {
                if is_uniform(data_times) {
                    uniform_grid(lo, hi, DEFAULT_UNIFORM_K)
                } else if data_times.iter().all(|t| t.fract() == 0.0) && hi - lo < 1e7 {
                    (0..=(hi - lo) as usize).map(|i| lo + i as f64).collect()
                } else {
                    uniform_grid(lo, hi, DEFAULT_UNIFORM_K)
                }
            }
            GridSpec::Uniform { k } => {
                if *k < 2 {
                    return Err(ProfilingError::Grid(format!("K = {k} is too small")));
                }
                uniform_grid(lo, hi, *k)
            }
            GridSpec::Explicit { times } => times.clone(),
        };
        validate(&grid, data_times.len(), lo, hi)?;
        Ok(grid)
    }
}

fn is_uniform(times: &[f64]) -> bool {
    let n = times.len();
    if n < 3 {
        return true;
    }
    let h = (times[n - 1] - times[0]) / (n - 1) as f64;
    times
        .windows(2)
        .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(1.0))
}

fn validate(grid: &[f64], j: usize, lo: f64, hi: f64) -> Result<(), ProfilingError> {
    if grid.len() < j {
        return Err(ProfilingError::Grid(format!(
            "K = {} is smaller than the {j} observations",
            grid.len()
        )));
    }
    if grid.iter().any(|t| !t.is_finite()) || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ProfilingError::Grid("times must be finite and strictly increasing".into()));
    }
    if grid[0] < lo || grid[grid.len() - 1] > hi {
        return Err(ProfilingError::Grid(format!(
            "grid [{}, {}] leaves the spline span [{lo}, {hi}]",
            grid[0],
            grid[grid.len() - 1]
        )));
    }
    Ok(())
}
