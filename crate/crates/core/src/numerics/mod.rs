//! Generic numerical kernels: bound-constrained Nelder–Mead maximization and
//! dense least squares by pivoted Householder QR.

mod lstsq;
mod nelder_mead;

pub use lstsq::{least_squares_solve, numerical_rank, weighted_least_squares_solve};
pub use nelder_mead::{nelder_mead_max, Maximum, OptimizerOptions};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("invalid bounds: {0}")]
    InvalidBounds(String),
    #[error("invalid optimizer options: {0}")]
    InvalidOptions(String),
    #[error("invalid starting point: {0}")]
    InvalidStart(String),
    #[error("matrix has {cols} columns but numerical rank {rank}")]
    RankDeficient { rank: usize, cols: usize },
    #[error("least-squares shape mismatch: {0}")]
    Shape(String),
}

/// Axis-aligned box `lower[i] <= x[i] <= upper[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, NumericsError> {
        if lower.len() != upper.len() {
            return Err(NumericsError::InvalidBounds(format!(
                "{} lower vs {} upper entries",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l < u) || !l.is_finite() || !u.is_finite() {
                return Err(NumericsError::InvalidBounds(format!(
                    "coordinate {i}: need finite lower < upper, got [{l}, {u}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self, NumericsError> {
        Self::new(
            pairs.iter().map(|p| p.0).collect(),
            pairs.iter().map(|p| p.1).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    /// Componentwise clamp onto the box.
    pub fn project(&self, x: &mut [f64]) {
        for ((v, l), u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*l, *u);
        }
    }

    /// Appends one more coordinate.
    pub fn extended(&self, lower: f64, upper: f64) -> Result<Self, NumericsError> {
        let mut lo = self.lower.clone();
        let mut hi = self.upper.clone();
        lo.push(lower);
        hi.push(upper);
        Self::new(lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_validate_and_project() {
        assert!(Bounds::new(vec![0.0], vec![0.0]).is_err());
        assert!(Bounds::new(vec![0.0, 1.0], vec![1.0]).is_err());
        let b = Bounds::from_pairs(&[(0.0, 1.0), (-2.0, 2.0)]).unwrap();
        let mut x = [1.5, -3.0];
        b.project(&mut x);
        assert_eq!(x, [1.0, -2.0]);
        assert!(b.contains(&x));
        assert!(!b.contains(&[0.5]));
        assert_eq!(b.extended(0.0, 9.0).unwrap().dim(), 3);
    }
}
