use std::cell::Cell;

use serde::{Deserialize, Serialize};

use super::{Bounds, NumericsError};

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerOptions {
    pub max_evals: usize,
    /// Simplex size at which to stop, per coordinate and relative to
    /// `1 + |x_best|`.
    pub x_tol: f64,
    /// Spread of objective values across the simplex at which to stop.
    pub f_tol: f64,
    /// Initial edge length as a fraction of each box width.
    pub initial_simplex_scale: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            max_evals: 10_000,
            x_tol: 1e-8,
            f_tol: 1e-10,
            initial_simplex_scale: 0.1,
        }
    }
}

impl OptimizerOptions {
    fn validate(&self, dim: usize) -> Result<(), NumericsError> {
        if self.max_evals < dim + 2 {
            return Err(NumericsError::InvalidOptions(format!(
                "max_evals {} must be at least dimension + 2 = {}",
                self.max_evals,
                dim + 2
            )));
        }
        if !(self.x_tol > 0.0) || !(self.f_tol > 0.0) {
            return Err(NumericsError::InvalidOptions("tolerances must be positive".into()));
        }
        if !(self.initial_simplex_scale > 0.0 && self.initial_simplex_scale <= 0.5) {
            return Err(NumericsError::InvalidOptions(
                "initial_simplex_scale must lie in (0, 0.5]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Maximum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub iterations: usize,
    /// Whether the tolerances (rather than `max_evals`) ended the search.
    pub converged: bool,
    /// Best vertex value after each iteration.
    pub best_trace: Vec<f64>,
}

/// Maximizes `objective` over `bounds` starting from `x0`.
///
/// Every trial point is clamped onto the box before it is evaluated.
/// Non-finite objective values count as `-inf`. Vertex ties are broken in
/// favour of the lower slot index, so runs are fully deterministic.
pub fn nelder_mead_max<F>(
    mut objective: F,
    x0: &[f64],
    bounds: &Bounds,
    opts: &OptimizerOptions,
) -> Result<Maximum, NumericsError>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    if n == 0 || n != bounds.dim() {
        return Err(NumericsError::InvalidStart(format!(
            "start has {n} coordinates, box has {}",
            bounds.dim()
        )));
    }
    opts.validate(n)?;
    if !bounds.contains(x0) {
        return Err(NumericsError::InvalidStart("start lies outside the box".into()));
    }

    let evals = Cell::new(0usize);
    let mut eval = |x: &[f64]| {
        evals.set(evals.get() + 1);
        let v = objective(x);
        if v.is_finite() {
            v
        } else {
            f64::NEG_INFINITY
        }
    };

    let f0 = eval(x0);
    if f0 == f64::NEG_INFINITY {
        return Err(NumericsError::InvalidStart("objective is not finite at the start".into()));
    }

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut values: Vec<f64> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    values.push(f0);
    for i in 0..n {
        let (lo, hi) = (bounds.lower()[i], bounds.upper()[i]);
        let step = opts.initial_simplex_scale * (hi - lo);
        let mut v = x0.to_vec();
        v[i] = if x0[i] + step <= hi { x0[i] + step } else { x0[i] - step };
        bounds.project(&mut v);
        values.push(eval(&v));
        simplex.push(v);
    }

    let mut order: Vec<usize> = (0..=n).collect();
    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut best_trace = Vec::new();
    let mut iterations = 0usize;
    let mut converged = false;

    loop {
        // Descending by value; the stable sort keeps lower slots first on ties.
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
        let (best, worst, second_worst) = (order[0], order[n], order[n - 1]);
        best_trace.push(values[best]);

        if has_converged(&simplex, &values, best, opts) {
            converged = true;
            break;
        }
        if evals.get() >= opts.max_evals {
            break;
        }
        iterations += 1;

        centroid.fill(0.0);
        for &i in &order[..n] {
            for (c, x) in centroid.iter_mut().zip(&simplex[i]) {
                *c += x;
            }
        }
        for c in centroid.iter_mut() {
            *c /= n as f64;
        }

        let along = |coef: f64, from: &[f64], out: &mut Vec<f64>| {
            for d in 0..n {
                out[d] = centroid[d] + coef * (from[d] - centroid[d]);
            }
            bounds.project(out);
        };

        // Reflection through the centroid.
        let mut reflected = vec![0.0; n];
        along(-REFLECT, &simplex[worst], &mut reflected);
        let fr = eval(&reflected);

        if fr > values[best] {
            along(EXPAND, &reflected, &mut trial);
            let fe = eval(&trial);
            if fe > fr {
                simplex[worst].copy_from_slice(&trial);
                values[worst] = fe;
            } else {
                simplex[worst] = reflected;
                values[worst] = fr;
            }
            continue;
        }
        if fr > values[second_worst] {
            simplex[worst] = reflected;
            values[worst] = fr;
            continue;
        }

        let accepted = if fr > values[worst] {
            // outside contraction
            along(CONTRACT, &reflected, &mut trial);
            let fc = eval(&trial);
            (fc >= fr).then_some(fc)
        } else {
            // inside contraction
            along(CONTRACT, &simplex[worst].clone(), &mut trial);
            let fc = eval(&trial);
            (fc > values[worst]).then_some(fc)
        };
        if let Some(fc) = accepted {
            simplex[worst].copy_from_slice(&trial);
            values[worst] = fc;
            continue;
        }

        let anchor = simplex[best].clone();
        for i in 0..=n {
            if i == best {
                continue;
            }
            for d in 0..n {
                simplex[i][d] = anchor[d] + SHRINK * (simplex[i][d] - anchor[d]);
            }
            bounds.project(&mut simplex[i]);
            values[i] = eval(&simplex[i]);
        }
    }

    let best = order[0];
    Ok(Maximum {
        x: simplex[best].clone(),
        value: values[best],
        evals: evals.get(),
        iterations,
        converged,
        best_trace,
    })
}

fn has_converged(simplex: &[Vec<f64>], values: &[f64], best: usize, opts: &OptimizerOptions) -> bool {
    let fb = values[best];
    let f_ok = values.iter().all(|v| (fb - v).abs() <= opts.f_tol);
    if !f_ok {
        return false;
    }
    let xb = &simplex[best];
    simplex.iter().all(|v| {
        v.iter()
            .zip(xb)
            .all(|(a, b)| (a - b).abs() <= opts.x_tol * (1.0 + b.abs()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> OptimizerOptions {
        OptimizerOptions::default()
    }

    #[test]
    fn interior_maximum() {
        let b = Bounds::from_pairs(&[(0.0, 5.0)]).unwrap();
        let m = nelder_mead_max(|x| -(x[0] - 2.0).powi(2), &[4.0], &b, &opts()).unwrap();
        assert!((m.x[0] - 2.0).abs() < 1e-5, "{:?}", m.x);
        assert!(m.converged);
    }

    #[test]
    fn boundary_maximum() {
        let b = Bounds::from_pairs(&[(3.0, 5.0)]).unwrap();
        let m = nelder_mead_max(|x| -(x[0] - 2.0).powi(2), &[4.0], &b, &opts()).unwrap();
        assert!((m.x[0] - 3.0).abs() < 1e-5, "{:?}", m.x);
    }

    #[test]
    fn negated_rosenbrock() {
        let b = Bounds::from_pairs(&[(-5.0, 5.0), (-5.0, 5.0)]).unwrap();
        let f = |x: &[f64]| -((x[0] - 1.0).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2));
        let m = nelder_mead_max(f, &[-1.2, 1.0], &b, &opts()).unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-3 && (m.x[1] - 1.0).abs() < 1e-3, "{:?}", m.x);
        assert!(m.value.abs() < 1e-6);
        // Grid search near (1, 1) finds nothing better than the returned point
        // by more than the tolerance.
        let mut grid_best = f64::NEG_INFINITY;
        for i in -50..=50 {
            for j in -50..=50 {
                let p = [1.0 + i as f64 * 1e-3, 1.0 + j as f64 * 1e-3];
                grid_best = grid_best.max(f(&p));
            }
        }
        assert!(m.value >= grid_best - 1e-6);
    }

    #[test]
    fn start_value_never_beaten_by_result() {
        let b = Bounds::from_pairs(&[(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        let f = |x: &[f64]| (3.0 * x[0]).sin() * (2.0 * x[1]).cos();
        let f0 = f(&[0.3, -0.2]);
        let m = nelder_mead_max(f, &[0.3, -0.2], &b, &opts()).unwrap();
        assert!(m.value >= f0);
        assert!(m.best_trace.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn non_finite_start_is_rejected() {
        let b = Bounds::from_pairs(&[(0.0, 1.0)]).unwrap();
        assert!(matches!(
            nelder_mead_max(|_| f64::NAN, &[0.5], &b, &opts()),
            Err(NumericsError::InvalidStart(_))
        ));
        assert!(nelder_mead_max(|x| x[0], &[2.0], &b, &opts()).is_err());
        let tight = OptimizerOptions {
            max_evals: 2,
            ..opts()
        };
        assert!(matches!(
            nelder_mead_max(|x| x[0], &[0.5], &b, &tight),
            Err(NumericsError::InvalidOptions(_))
        ));
    }

    #[test]
    fn non_finite_vertices_are_skipped() {
        let b = Bounds::from_pairs(&[(-3.0, 3.0)]).unwrap();
        let f = |x: &[f64]| if x[0] > 1.5 { f64::NAN } else { -(x[0] - 1.0).powi(2) };
        let m = nelder_mead_max(f, &[-2.0], &b, &opts()).unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn respects_eval_budget() {
        let b = Bounds::from_pairs(&[(-5.0, 5.0), (-5.0, 5.0)]).unwrap();
        let o = OptimizerOptions {
            max_evals: 20,
            ..opts()
        };
        let f = |x: &[f64]| -((x[0] - 1.0).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2));
        let m = nelder_mead_max(f, &[-1.2, 1.0], &b, &o).unwrap();
        assert!(!m.converged);
        assert!(m.evals <= 20 + 2);
    }
}
