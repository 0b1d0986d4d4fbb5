//! Observation noise: sampling for synthetic data and per-point log-densities
//! for the data loss.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Seedable stream used for all synthetic noise. ChaCha output is fixed
/// across platforms and crate versions for a given seed.
pub type NoiseRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> NoiseRng {
    use rand::SeedableRng;
    NoiseRng::seed_from_u64(seed)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("noise scale must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("log-normal noise needs a positive {what}, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error("unknown noise kind `{0}` (expected `gaussian` or `lognormal`)")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    /// `obs = clean + N(0, sigma^2)`
    Gaussian,
    /// `obs = clean * eta`, `eta ~ LogNormal(0, sigma^2)`
    #[serde(rename = "lognormal")]
    LogNormal,
}

impl NoiseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::LogNormal => "lognormal",
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NoiseKind {
    type Err = NoiseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gaussian" => Ok(NoiseKind::Gaussian),
            "lognormal" => Ok(NoiseKind::LogNormal),
            other => Err(NoiseError::UnknownKind(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    kind: NoiseKind,
    sigma: f64,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, sigma: f64) -> Result<Self, NoiseError> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(NoiseError::InvalidSigma(sigma));
        }
        Ok(Self { kind, sigma })
    }

    pub fn gaussian(sigma: f64) -> Result<Self, NoiseError> {
        Self::new(NoiseKind::Gaussian, sigma)
    }

    pub fn lognormal(sigma: f64) -> Result<Self, NoiseError> {
        Self::new(NoiseKind::LogNormal, sigma)
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// One noisy observation of `clean`.
    pub fn sample<R: Rng + ?Sized>(&self, clean: f64, rng: &mut R) -> Result<f64, NoiseError> {
        match self.kind {
            NoiseKind::Gaussian => {
                let n = Normal::new(0.0, self.sigma).map_err(|_| NoiseError::InvalidSigma(self.sigma))?;
                Ok(clean + n.sample(rng))
            }
            NoiseKind::LogNormal => {
                if !(clean > 0.0) {
                    return Err(NoiseError::NonPositive {
                        what: "clean value",
                        value: clean,
                    });
                }
                let ln =
                    LogNormal::new(0.0, self.sigma).map_err(|_| NoiseError::InvalidSigma(self.sigma))?;
                Ok(clean * ln.sample(rng))
            }
        }
    }

    /// `log p(observed | predicted)`.
    ///
    /// The log-normal case is the density of `LogNormal(log(predicted), sigma^2)`
    /// at `observed`, so it carries the `-log(observed)` Jacobian term.
    pub fn log_density(&self, observed: f64, predicted: f64) -> Result<f64, NoiseError> {
        Ok(match self.kind {
            NoiseKind::Gaussian => gaussian_log_density(observed, predicted, self.sigma),
            NoiseKind::LogNormal => {
                if !(observed > 0.0) {
                    return Err(NoiseError::NonPositive {
                        what: "observation",
                        value: observed,
                    });
                }
                if !(predicted > 0.0) {
                    return Err(NoiseError::NonPositive {
                        what: "prediction",
                        value: predicted,
                    });
                }
                lognormal_log_density(observed, predicted, self.sigma)
            }
        })
    }
}

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[inline]
pub(crate) fn gaussian_log_density(x: f64, mean: f64, sigma: f64) -> f64 {
    let z = (x - mean) / sigma;
    -HALF_LN_2PI - sigma.ln() - 0.5 * z * z
}

#[inline]
pub(crate) fn lognormal_log_density(x: f64, median: f64, sigma: f64) -> f64 {
    let lx = x.ln();
    let z = (lx - median.ln()) / sigma;
    -HALF_LN_2PI - sigma.ln() - lx - 0.5 * z * z
}
