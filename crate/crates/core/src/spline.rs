//! Clamped B-spline bases built from data grids.
//!
//! Knots sit on the data times: the boundary times are repeated `p + 1`
//! times and, for cubics, the second and second-to-last data times are left
//! out of the interior so that the number of basis functions equals the
//! number of data points. Basis functions are indexed from zero here, so
//! `B_j` with `j in 0..J` is supported on `[t_j, t_{j+p+1})`.
//!
//! Two evaluation paths exist. [`SplineBasis::eval_recursive`] is the literal
//! Cox–de Boor recursion and serves as the reference; [`SplineBasis::active`]
//! computes only the `p + 1` functions that are nonzero on a knot span and is
//! used for matrix assembly.
//!
//! The last knot is covered by treating the final nonempty span as closed,
//! i.e. evaluation at `t = t_m` is the limit from the left.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parallel::{self, Execution};

/// Largest supported degree. Stack buffers are sized from it.
pub const MAX_DEGREE: usize = 3;
const MAX_ORDER: usize = MAX_DEGREE + 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplineError {
    #[error("need at least {required} data points for degree {degree}, got {got}")]
    InsufficientData {
        required: usize,
        degree: usize,
        got: usize,
    },
    #[error("grid must be strictly increasing and finite (offending index {index})")]
    InvalidGrid { index: usize },
    #[error("unsupported spline degree {0}; only cubic knot placement is implemented")]
    UnsupportedDegree(usize),
    #[error("invalid knot vector: {0}")]
    InvalidKnots(String),
    #[error("basis index {index} out of range (basis has {count} functions)")]
    IndexOutOfRange { index: usize, count: usize },
    #[error("t = {t} lies outside the knot span [{lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("collocation matrix is singular; the data grid is degenerate")]
    DegenerateGrid,
}

/// Non-decreasing knot sequence with clamped (multiplicity `p + 1`) ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotVector {
    knots: Vec<f64>,
    degree: usize,
}

impl KnotVector {
    /// Validates an explicit knot sequence.
    pub fn new(knots: Vec<f64>, degree: usize) -> Result<Self, SplineError> {
        if degree > MAX_DEGREE {
            return Err(SplineError::UnsupportedDegree(degree));
        }
        let order = degree + 1;
        if knots.len() < 2 * order {
            return Err(SplineError::InvalidKnots(format!(
                "{} knots is fewer than 2 * order = {}",
                knots.len(),
                2 * order
            )));
        }
        if knots.iter().any(|k| !k.is_finite()) {
            return Err(SplineError::InvalidKnots("non-finite knot".into()));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(SplineError::InvalidKnots("knots decrease".into()));
        }
        let first = knots[0];
        let last = knots[knots.len() - 1];
        if !(first < last) {
            return Err(SplineError::InvalidKnots("empty knot span".into()));
        }
        let lead = knots.iter().take_while(|&&k| k == first).count();
        let tail = knots.iter().rev().take_while(|&&k| k == last).count();
        if lead != order || tail != order {
            return Err(SplineError::InvalidKnots(format!(
                "boundary multiplicities ({lead}, {tail}) must both equal the order {order}"
            )));
        }
        let interior = &knots[lead..knots.len() - tail];
        let mut run = 1;
        for w in interior.windows(2) {
            run = if w[0] == w[1] { run + 1 } else { 1 };
            if run > degree {
                return Err(SplineError::InvalidKnots(
                    "interior knot multiplicity exceeds the degree".into(),
                ));
            }
        }
        Ok(Self { knots, degree })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn order(&self) -> usize {
        self.degree + 1
    }

    /// Number of basis functions `J = m + 1 - (p + 1)`.
    pub fn basis_count(&self) -> usize {
        self.knots.len() - self.order()
    }

    /// `(first knot, last knot)`.
    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    pub fn contains(&self, t: f64) -> bool {
        let (lo, hi) = self.domain();
        t >= lo && t <= hi
    }

    fn check_domain(&self, t: f64) -> Result<(), SplineError> {
        if self.contains(t) {
            Ok(())
        } else {
            let (lo, hi) = self.domain();
            Err(SplineError::OutOfDomain { t, lo, hi })
        }
    }

    /// Index `mu` with `t_mu <= t < t_{mu+1}` and `t_mu < t_{mu+1}`; the last
    /// nonempty span when `t` is the right endpoint.
    fn find_span(&self, t: f64) -> usize {
        let p = self.degree;
        let n = self.basis_count();
        let (_, hi) = self.domain();
        if t >= hi {
            let mut mu = n - 1;
            while self.knots[mu] == self.knots[mu + 1] {
                mu -= 1;
            }
            return mu;
        }
        // Largest mu in [p, n-1] with t_mu <= t.
        let (mut lo_i, mut hi_i) = (p, n);
        while hi_i - lo_i > 1 {
            let mid = (lo_i + hi_i) / 2;
            if self.knots[mid] <= t {
                lo_i = mid;
            } else {
                hi_i = mid;
            }
        }
        lo_i
    }
}

/// Knots for interpolating data on `times` with a clamped spline of `degree`.
///
/// Only cubics are supported: the interior knots are the data times with the
/// first, second, second-to-last and last entries removed.
pub fn build_knots(times: &[f64], degree: usize) -> Result<KnotVector, SplineError> {
    if degree != 3 {
        return Err(SplineError::UnsupportedDegree(degree));
    }
    let order = degree + 1;
    if times.len() < order {
        return Err(SplineError::InsufficientData {
            required: order,
            degree,
            got: times.len(),
        });
    }
    validate_grid(times)?;
    let j = times.len();
    let mut knots = Vec::with_capacity(j + order);
    knots.extend(std::iter::repeat_n(times[0], order));
    knots.extend_from_slice(&times[2..j - 2]);
    knots.extend(std::iter::repeat_n(times[j - 1], order));
    KnotVector::new(knots, degree)
}

pub(crate) fn validate_grid(times: &[f64]) -> Result<(), SplineError> {
    if let Some(index) = times.iter().position(|t| !t.is_finite()) {
        return Err(SplineError::InvalidGrid { index });
    }
    if let Some(index) = times.windows(2).position(|w| w[1] <= w[0]) {
        return Err(SplineError::InvalidGrid { index: index + 1 });
    }
    Ok(())
}

/// Nonzero basis values (and first derivatives) on one knot span.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActiveBasis {
    /// Index of the first nonzero function; entries cover `first..=first + p`.
    pub first: usize,
    pub values: [f64; MAX_ORDER],
    pub derivatives: [f64; MAX_ORDER],
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineBasis {
    knots: KnotVector,
}

impl SplineBasis {
    pub fn new(knots: KnotVector) -> Self {
        Self { knots }
    }

    /// Cubic basis whose knots come from [`build_knots`].
    pub fn from_data_times(times: &[f64]) -> Result<Self, SplineError> {
        Ok(Self::new(build_knots(times, 3)?))
    }

    pub fn knot_vector(&self) -> &KnotVector {
        &self.knots
    }

    pub fn degree(&self) -> usize {
        self.knots.degree
    }

    pub fn len(&self) -> usize {
        self.knots.basis_count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn domain(&self) -> (f64, f64) {
        self.knots.domain()
    }

    fn check_index(&self, j: usize) -> Result<(), SplineError> {
        if j < self.len() {
            Ok(())
        } else {
            Err(SplineError::IndexOutOfRange {
                index: j,
                count: self.len(),
            })
        }
    }

    /// `B_j(t)` by the literal Cox–de Boor recursion.
    pub fn eval(&self, j: usize, t: f64) -> Result<f64, SplineError> {
        self.check_index(j)?;
        self.knots.check_domain(t)?;
        Ok(self.eval_recursive(j, self.degree(), t))
    }

    /// `dB_j/dt` from the degree `p - 1` functions of the recursion.
    pub fn eval_deriv(&self, j: usize, t: f64) -> Result<f64, SplineError> {
        self.check_index(j)?;
        self.knots.check_domain(t)?;
        let p = self.degree();
        if p == 0 {
            return Ok(0.0);
        }
        let k = &self.knots.knots;
        let pf = p as f64;
        let left = ratio(pf, k[j + p] - k[j]) * self.eval_recursive(j, p - 1, t);
        let right = ratio(pf, k[j + p + 1] - k[j + 1]) * self.eval_recursive(j + 1, p - 1, t);
        Ok(left - right)
    }

    /// `B_{j,p}(t)` with zero-denominator terms dropped. No range checks.
    pub fn eval_recursive(&self, j: usize, p: usize, t: f64) -> f64 {
        let k = &self.knots.knots;
        if p == 0 {
            return self.indicator(j, t);
        }
        let mut out = 0.0;
        let d1 = k[j + p] - k[j];
        if d1 != 0.0 {
            out += (t - k[j]) / d1 * self.eval_recursive(j, p - 1, t);
        }
        let d2 = k[j + p + 1] - k[j + 1];
        if d2 != 0.0 {
            out += (k[j + p + 1] - t) / d2 * self.eval_recursive(j + 1, p - 1, t);
        }
        out
    }

    fn indicator(&self, j: usize, t: f64) -> f64 {
        let k = &self.knots.knots;
        let (_, hi) = self.domain();
        if k[j] <= t && t < k[j + 1] {
            return 1.0;
        }
        // Closed final span.
        if t == hi && k[j] < k[j + 1] && k[j + 1] == hi {
            return 1.0;
        }
        0.0
    }

    /// The `p + 1` functions that can be nonzero at `t`, with derivatives.
    pub fn active(&self, t: f64) -> Result<ActiveBasis, SplineError> {
        self.knots.check_domain(t)?;
        Ok(self.active_unchecked(t))
    }

    fn active_unchecked(&self, t: f64) -> ActiveBasis {
        let p = self.degree();
        let k = &self.knots.knots;
        let span = self.knots.find_span(t);

        // ndu[r][c]: degree-r functions N_{span-r+c, r}(t), c in 0..=r.
        let mut ndu = [[0.0f64; MAX_ORDER]; MAX_ORDER];
        let mut left = [0.0f64; MAX_ORDER];
        let mut right = [0.0f64; MAX_ORDER];
        ndu[0][0] = 1.0;
        for d in 1..=p {
            left[d] = t - k[span + 1 - d];
            right[d] = k[span + d] - t;
            let mut saved = 0.0;
            for r in 0..d {
                let denom = right[r + 1] + left[d - r];
                let temp = if denom == 0.0 { 0.0 } else { ndu[d - 1][r] / denom };
                ndu[d][r] = saved + right[r + 1] * temp;
                saved = left[d - r] * temp;
            }
            ndu[d][d] = saved;
        }

        let mut values = [0.0f64; MAX_ORDER];
        values[..=p].copy_from_slice(&ndu[p][..=p]);

        let mut derivatives = [0.0f64; MAX_ORDER];
        if p > 0 {
            let pf = p as f64;
            let first = span - p;
            // N'_{i,p} = p (N_{i,p-1}/(t_{i+p}-t_i) - N_{i+1,p-1}/(t_{i+p+1}-t_{i+1}))
            // lower[c] = N_{span-p+1+c, p-1}, c in 0..p.
            let lower = &ndu[p - 1];
            for (c, d) in derivatives.iter_mut().enumerate().take(p + 1) {
                let i = first + c;
                let a = if c >= 1 { lower[c - 1] } else { 0.0 };
                let b = if c < p { lower[c] } else { 0.0 };
                *d = ratio(pf, k[i + p] - k[i]) * a - ratio(pf, k[i + p + 1] - k[i + 1]) * b;
            }
        }

        ActiveBasis {
            first: span - p,
            values,
            derivatives,
            len: p + 1,
        }
    }

    /// Collocation matrices at `eval_times`.
    pub fn collocation(&self, eval_times: &[f64]) -> Result<CollocationMatrices, SplineError> {
        self.collocation_with(eval_times, Execution::default())
    }

    pub fn collocation_with(
        &self,
        eval_times: &[f64],
        exec: Execution,
    ) -> Result<CollocationMatrices, SplineError> {
        for &t in eval_times {
            self.knots.check_domain(t)?;
        }
        let rows = parallel::map(exec, eval_times, |&t| self.active_unchecked(t));
        let (i, j) = (eval_times.len(), self.len());
        let mut values = DMatrix::zeros(i, j);
        let mut derivatives = DMatrix::zeros(i, j);
        for (r, act) in rows.iter().enumerate() {
            for c in 0..act.len {
                values[(r, act.first + c)] = act.values[c];
                derivatives[(r, act.first + c)] = act.derivatives[c];
            }
        }
        Ok(CollocationMatrices {
            values,
            derivatives,
            eval_times: eval_times.to_vec(),
        })
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// `A[i][j] = B_j(t_i)` and `A'[i][j] = B_j'(t_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationMatrices {
    pub values: DMatrix<f64>,
    pub derivatives: DMatrix<f64>,
    pub eval_times: Vec<f64>,
}

/// `f(t) = sum_j c_j B_j(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spline {
    basis: SplineBasis,
    coefficients: Vec<f64>,
}

impl Spline {
    pub fn new(basis: SplineBasis, coefficients: Vec<f64>) -> Result<Self, SplineError> {
        if coefficients.len() != basis.len() {
            return Err(SplineError::LengthMismatch {
                expected: basis.len(),
                got: coefficients.len(),
            });
        }
        Ok(Self {
            basis,
            coefficients,
        })
    }

    /// Spline through `(times[j], values[j])`, solving the square collocation
    /// system on `basis`.
    pub fn interpolate(
        times: &[f64],
        values: &[f64],
        basis: &SplineBasis,
    ) -> Result<Self, SplineError> {
        if times.len() != basis.len() {
            return Err(SplineError::LengthMismatch {
                expected: basis.len(),
                got: times.len(),
            });
        }
        if values.len() != times.len() {
            return Err(SplineError::LengthMismatch {
                expected: times.len(),
                got: values.len(),
            });
        }
        validate_grid(times)?;
        let a = basis.collocation_with(times, Execution::Sequential)?.values;
        let rhs = DVector::from_column_slice(values);
        let coef = a.lu().solve(&rhs).ok_or(SplineError::DegenerateGrid)?;
        if coef.iter().any(|c| !c.is_finite()) {
            return Err(SplineError::DegenerateGrid);
        }
        Self::new(basis.clone(), coef.as_slice().to_vec())
    }

    pub fn basis(&self) -> &SplineBasis {
        &self.basis
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn eval(&self, t: f64) -> Result<f64, SplineError> {
        let act = self.basis.active(t)?;
        Ok(self.dot(&act.values, act.first, act.len))
    }

    pub fn eval_deriv(&self, t: f64) -> Result<f64, SplineError> {
        let act = self.basis.active(t)?;
        Ok(self.dot(&act.derivatives, act.first, act.len))
    }

    /// `(f(t), f'(t))`.
    pub fn eval_both(&self, t: f64) -> Result<(f64, f64), SplineError> {
        let act = self.basis.active(t)?;
        Ok((
            self.dot(&act.values, act.first, act.len),
            self.dot(&act.derivatives, act.first, act.len),
        ))
    }

    fn dot(&self, w: &[f64; MAX_ORDER], first: usize, len: usize) -> f64 {
        w[..len]
            .iter()
            .zip(&self.coefficients[first..first + len])
            .map(|(a, b)| a * b)
            .sum()
    }
}

/// `count` evenly spaced points from `start` to `end` inclusive.
pub fn uniform_grid(start: f64, end: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (end - start) / (count - 1) as f64;
            (0..count)
                .map(|k| {
                    if k == count - 1 {
                        end
                    } else {
                        start + step * k as f64
                    }
                })
                .collect()
        }
    }
}
