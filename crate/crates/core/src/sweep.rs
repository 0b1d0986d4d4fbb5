//! Repeated simulate-and-fit runs over a list of seeds.

use serde::{Deserialize, Serialize};

use crate::models::{FullParameterVector, ModelSpec};
use crate::noise::NoiseKind;
use crate::parallel::{self, Execution};
use crate::profiling::{fit, FitConfig};
use crate::synth::simulate;

/// Final estimates from one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFit {
    pub seed: u64,
    pub theta: Vec<f64>,
    pub sigma: f64,
    pub initial_state: Vec<f64>,
}

/// Outcome of a sweep, in seed order. Failed fits keep their message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub fits: Vec<SeedFit>,
    pub failures: Vec<(u64, String)>,
}

impl Sweep {
    /// Median of the `i`-th ODE parameter over successful fits.
    pub fn median_theta(&self, i: usize) -> Option<f64> {
        median(&self.fits.iter().map(|f| f.theta[i]).collect::<Vec<_>>())
    }

    pub fn median_sigma(&self) -> Option<f64> {
        median(&self.fits.iter().map(|f| f.sigma).collect::<Vec<_>>())
    }
}

/// Simulates `truth` at `times` for every seed and fits it with `config`.
/// Seeds run under `exec`; the fits themselves use `config.execution`.
pub fn recover(
    model: &ModelSpec,
    truth: &FullParameterVector,
    noise: NoiseKind,
    times: &[f64],
    seeds: &[u64],
    config: &FitConfig,
    exec: Execution,
) -> Sweep {
    let outcomes = parallel::map(exec, seeds, |&seed| {
        let data = simulate(model, truth, noise, times, seed).map_err(|e| e.to_string())?;
        let r = fit(&data, model, noise, config).map_err(|e| e.to_string())?;
        Ok(SeedFit {
            seed,
            theta: r.final_theta().to_vec(),
            sigma: r.final_sigma(),
            initial_state: r.initial_condition_estimates,
        })
    });
    let mut sweep = Sweep {
        fits: Vec::new(),
        failures: Vec::new(),
    };
    for (seed, o) in seeds.iter().zip(outcomes) {
        match o {
            Ok(f) => sweep.fits.push(f),
            Err(msg) => sweep.failures.push((*seed, msg)),
        }
    }
    sweep
}

/// Median, averaging the middle pair for even lengths. NaNs sort last.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use crate::synth::regular_times;

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), Some(2.5));
    }

    #[test]
    fn policies_agree() {
        let m = models::newton();
        let truth = FullParameterVector::new(vec![0.05, 20.0], vec![180.0], 8.0).unwrap();
        let cfg = FitConfig {
            iterations: 2,
            ..FitConfig::default()
        };
        let t = regular_times(100.0, 10.0);
        let a = recover(&m, &truth, NoiseKind::Gaussian, &t, &[1, 2, 3], &cfg, Execution::Sequential);
        let b = recover(&m, &truth, NoiseKind::Gaussian, &t, &[1, 2, 3], &cfg, Execution::Parallel);
        assert_eq!(a, b);
        assert_eq!(a.fits.len(), 3);
        assert_eq!(a.fits[1].seed, 2);
    }
}
