//! Seeded synthetic observations from a model's solution.

use thiserror::Error;

use crate::dataset::{Dataset, DatasetError};
use crate::integrate::{rk4_solve, IntegrateError};
use crate::models::{FullParameterVector, ModelError, ModelSpec};
use crate::noise::{rng_from_seed, NoiseError, NoiseKind, NoiseModel};

/// Largest RK4 step used when a model has no closed form.
pub const RK4_STEP: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Noise-free states at `times`, laid out `[s][j]`.
pub fn clean_states(
    model: &ModelSpec,
    full: &FullParameterVector,
    times: &[f64],
) -> Result<Vec<Vec<f64>>, SynthError> {
    model.check_full(full)?;
    let mut out = vec![Vec::with_capacity(times.len()); model.dimension()];
    if model.has_exact_solution() {
        for &t in times {
            let x = model.exact(t, full).expect("model has a closed form")?;
            for (col, v) in out.iter_mut().zip(x) {
                col.push(v);
            }
        }
    } else {
        // Integrate from the first time; the initial state belongs to it.
        let traj = rk4_solve(model, full, times, RK4_STEP)?;
        for s in 0..model.dimension() {
            out[s] = traj.species(s);
        }
    }
    Ok(out)
}

/// Observations at `times` with noise of scale `full.sigma`.
///
/// Random draws run time-major, species-minor. Under log-normal noise a
/// state that is exactly zero is observed as zero.
pub fn simulate(
    model: &ModelSpec,
    full: &FullParameterVector,
    noise: NoiseKind,
    times: &[f64],
    seed: u64,
) -> Result<Dataset, SynthError> {
    let clean = clean_states(model, full, times)?;
    let nm = NoiseModel::new(noise, full.sigma)?;
    let mut rng = rng_from_seed(seed);
    let mut values = vec![vec![0.0; times.len()]; clean.len()];
    for j in 0..times.len() {
        for (s, col) in clean.iter().enumerate() {
            let c = col[j];
            values[s][j] = if noise == NoiseKind::LogNormal && c == 0.0 {
                0.0
            } else {
                nm.sample(c, &mut rng)?
            };
        }
    }
    let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    let comments = vec![
        format!(" model={}", model.name()),
        format!(" noise={} sigma={}", noise, full.sigma),
        format!(" params={}", join(&full.ode_params)),
        format!(" initial={}", join(&full.initial_state)),
        format!(" seed={seed}"),
    ];
    Ok(Dataset::new(times.to_vec(), values, model.species_names().to_vec())?.with_comments(comments))
}

/// `0, step, 2 step, ..., end` (inclusive when `end` is a multiple of `step`).
pub fn regular_times(end: f64, step: f64) -> Vec<f64> {
    let n = (end / step).round() as usize;
    (0..=n).map(|i| i as f64 * step).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    #[test]
    fn newton_paper_setup_has_eleven_rows() {
        let m = models::newton();
        let f = FullParameterVector::new(vec![0.05, 20.0], vec![180.0], 8.0).unwrap();
        let d = simulate(&m, &f, NoiseKind::Gaussian, &regular_times(100.0, 10.0), 1).unwrap();
        assert_eq!(d.len(), 11);
        assert!(d.comments().iter().any(|c| c == " seed=1"));
        let again = simulate(&m, &f, NoiseKind::Gaussian, &regular_times(100.0, 10.0), 1).unwrap();
        assert_eq!(d.to_csv(), again.to_csv());
    }

    #[test]
    fn logistic_data_rise_to_capacity() {
        let m = models::logistic();
        let f = FullParameterVector::new(vec![0.1, 100.0], vec![5.0], 5.0).unwrap();
        let d = simulate(&m, &f, NoiseKind::Gaussian, &regular_times(100.0, 10.0), 3).unwrap();
        let y = d.species(0);
        assert!((y[0] - 5.0).abs() < 20.0);
        assert!((y[10] - 100.0).abs() < 20.0);
    }

    #[test]
    fn chain2_near_noise_free_matches_closed_form() {
        let m = models::chain2();
        let f = FullParameterVector::new(vec![0.06, 0.04], vec![100.0, 0.0], 1e-12).unwrap();
        let t = regular_times(100.0, 10.0);
        for kind in [NoiseKind::Gaussian, NoiseKind::LogNormal] {
            let d = simulate(&m, &f, kind, &t, 9).unwrap();
            for (j, &tj) in t.iter().enumerate() {
                let ex = models::exact_chain2(tj, &f);
                assert!((d.species(0)[j] - ex[0]).abs() < 1e-6);
                assert!((d.species(1)[j] - ex[1]).abs() < 1e-6);
            }
            if kind == NoiseKind::LogNormal {
                assert_eq!(d.species(1)[0], 0.0);
            }
        }
    }

    #[test]
    fn models_without_closed_form_use_rk4() {
        let m = models::chain3();
        let f = FullParameterVector::new(vec![0.06, 0.04, 0.02], vec![100.0, 0.0, 0.0], 1e-12).unwrap();
        let d = simulate(&m, &f, NoiseKind::Gaussian, &regular_times(50.0, 10.0), 0).unwrap();
        let c1 = d.species(0)[5];
        assert!((c1 - 100.0 * (-0.06f64 * 50.0).exp()).abs() < 1e-6);
    }
}
