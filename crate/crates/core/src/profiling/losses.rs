use serde::{Deserialize, Serialize};

use super::ProfilingError;
use crate::dataset::Dataset;
use crate::noise::{gaussian_log_density, lognormal_log_density, NoiseKind};

/// Largest weight handed out; used in place of `|1/l|` when a loss is zero
/// or so close to it that the reciprocal would swamp the other block of the
/// stacked system.
pub const WEIGHT_CAP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightState {
    pub w_d: f64,
    pub w_m: f64,
}

impl WeightState {
    pub fn new(w_d: f64, w_m: f64) -> Result<Self, ProfilingError> {
        for w in [w_d, w_m] {
            if !(w > 0.0) || !w.is_finite() {
                return Err(ProfilingError::Config(format!("weights must be positive and finite, got {w}")));
            }
        }
        Ok(Self { w_d, w_m })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightUpdate {
    pub weights: WeightState,
    /// How many of the two weights hit [`WEIGHT_CAP`].
    pub capped: usize,
}

fn reciprocal(loss: f64, what: &'static str) -> Result<(f64, usize), ProfilingError> {
    if !loss.is_finite() {
        return Err(ProfilingError::NonFiniteLoss(what));
    }
    if loss.abs() * WEIGHT_CAP <= 1.0 {
        Ok((WEIGHT_CAP, 1))
    } else {
        Ok(((1.0 / loss).abs(), 0))
    }
}

/// `w_d = |1/l_d|`, `w_m = |1/l_m|`.
pub fn update_weights(l_d: f64, l_m: f64) -> Result<WeightUpdate, ProfilingError> {
    let (w_d, a) = reciprocal(l_d, "data loss")?;
    let (w_m, b) = reciprocal(l_m, "model loss")?;
    Ok(WeightUpdate {
        weights: WeightState::new(w_d, w_m)?,
        capped: a + b,
    })
}

/// First-iteration weights: `w_d = 1`, `w_m = |1/l_m|`.
pub fn first_iteration_weights(l_m: f64) -> Result<WeightUpdate, ProfilingError> {
    let (w_m, capped) = reciprocal(l_m, "model loss")?;
    Ok(WeightUpdate {
        weights: WeightState::new(1.0, w_m)?,
        capped,
    })
}

pub fn penalized_loss(l_d: f64, l_m: f64, w: WeightState) -> f64 {
    w.w_d * l_d + w.w_m * l_m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataLoss {
    pub value: f64,
    /// Log-normal predictions raised to the floor.
    pub clamped: usize,
    /// Log-normal observations that are not positive and were left out.
    pub skipped: usize,
}

/// Data log-likelihood given spline predictions `preds[s][j]`.
///
/// `floor_factor` scales the largest observation to give the smallest
/// prediction admitted under log-normal noise.
pub(crate) fn data_loss(
    preds: &[Vec<f64>],
    dataset: &Dataset,
    kind: NoiseKind,
    sigma: f64,
    floor_factor: f64,
) -> Result<DataLoss, ProfilingError> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(crate::noise::NoiseError::InvalidSigma(sigma).into());
    }
    let mut out = DataLoss {
        value: 0.0,
        clamped: 0,
        skipped: 0,
    };
    let floor = floor_factor * max_observation(dataset);
    for (s, (obs, pred)) in dataset.values().iter().zip(preds).enumerate() {
        for (j, (&y, &f)) in obs.iter().zip(pred).enumerate() {
            let term = match kind {
                NoiseKind::Gaussian => gaussian_log_density(y, f, sigma),
                NoiseKind::LogNormal => {
                    if !(y > 0.0) {
                        out.skipped += 1;
                        continue;
                    }
                    let f = if f < floor {
                        out.clamped += 1;
                        floor
                    } else {
                        f
                    };
                    lognormal_log_density(y, f, sigma)
                }
            };
            if !term.is_finite() {
                return Err(ProfilingError::NonFiniteDensity { species: s, index: j });
            }
            out.value += term;
        }
    }
    Ok(out)
}

pub(crate) fn max_observation(dataset: &Dataset) -> f64 {
    dataset
        .values()
        .iter()
        .flatten()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b))
}

/// Starting noise scale: RMS residual (of logs, for log-normal noise).
pub(crate) fn moment_sigma(
    preds: &[Vec<f64>],
    dataset: &Dataset,
    kind: NoiseKind,
    floor_factor: f64,
) -> Result<f64, ProfilingError> {
    let floor = floor_factor * max_observation(dataset);
    let mut sum = 0.0;
    let mut n = 0usize;
    for (obs, pred) in dataset.values().iter().zip(preds) {
        for (&y, &f) in obs.iter().zip(pred) {
            let r = match kind {
                NoiseKind::Gaussian => y - f,
                NoiseKind::LogNormal => {
                    if !(y > 0.0) {
                        continue;
                    }
                    y.ln() - f.max(floor).ln()
                }
            };
            sum += r * r;
            n += 1;
        }
    }
    if n == 0 {
        return Err(ProfilingError::Config("no usable observations for the noise scale".into()));
    }
    let sigma = (sum / n as f64).sqrt();
    if !sigma.is_finite() {
        return Err(ProfilingError::NonFiniteLoss("initial noise scale"));
    }
    Ok(sigma)
}
