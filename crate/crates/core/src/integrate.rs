//! Fixed-step classical Runge–Kutta integration, used to cross-check the
//! closed-form solutions and to simulate models that have none.

use thiserror::Error;

use crate::models::{FullParameterVector, ModelError, ModelSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrateError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("output grid must be non-empty and strictly increasing")]
    InvalidGrid,
    #[error("step size must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("state became non-finite at t = {t}")]
    Diverged { t: f64 },
}

/// States at each output time, `states[i]` belonging to `times[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    /// Values of one species along the grid.
    pub fn species(&self, s: usize) -> Vec<f64> {
        self.states.iter().map(|x| x[s]).collect()
    }
}

/// Integrates from `t_grid[0]` with the model's initial state, reporting the
/// state at every grid time. Each gap is covered by equal substeps no longer
/// than `max_step`.
pub fn rk4_solve(
    model: &ModelSpec,
    full: &FullParameterVector,
    t_grid: &[f64],
    max_step: f64,
) -> Result<Trajectory, IntegrateError> {
    model.check_full(full)?;
    if !(max_step > 0.0) || !max_step.is_finite() {
        return Err(IntegrateError::InvalidStep(max_step));
    }
    if t_grid.is_empty() || t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(IntegrateError::InvalidGrid);
    }

    let s = model.dimension();
    let p = &full.ode_params;
    let mut x = full.initial_state.clone();
    let mut t = t_grid[0];
    let mut states = Vec::with_capacity(t_grid.len());
    states.push(x.clone());

    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; s], vec![0.0; s], vec![0.0; s], vec![0.0; s]);
    let mut tmp = vec![0.0; s];

    for &target in &t_grid[1..] {
        let n = ((target - t) / max_step).ceil().max(1.0) as usize;
        let h = (target - t) / n as f64;
        let t_start = t;
        for i in 0..n {
            let ti = t_start + h * i as f64;
            model.rhs_into(ti, &x, p, &mut k1);
            for d in 0..s {
                tmp[d] = x[d] + 0.5 * h * k1[d];
            }
            model.rhs_into(ti + 0.5 * h, &tmp, p, &mut k2);
            for d in 0..s {
                tmp[d] = x[d] + 0.5 * h * k2[d];
            }
            model.rhs_into(ti + 0.5 * h, &tmp, p, &mut k3);
            for d in 0..s {
                tmp[d] = x[d] + h * k3[d];
            }
            model.rhs_into(ti + h, &tmp, p, &mut k4);
            for d in 0..s {
                x[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(IntegrateError::Diverged { t: ti + h });
            }
        }
        t = target;
        states.push(x.clone());
    }

    Ok(Trajectory {
        times: t_grid.to_vec(),
        states,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{self, exact_chain2, exact_newton};
    use std::sync::Arc;

    #[test]
    fn newton_matches_closed_form() {
        let m = models::newton();
        let f = FullParameterVector::new(vec![0.05, 20.0], vec![180.0], 8.0).unwrap();
        let grid: Vec<f64> = (0..=100).map(f64::from).collect();
        let traj = rk4_solve(&m, &f, &grid, 0.01).unwrap();
        for (t, x) in grid.iter().zip(&traj.states) {
            assert!((x[0] - exact_newton(*t, &f)).abs() < 1e-8);
        }
    }

    #[test]
    fn chain2_matches_closed_form() {
        let m = models::chain2();
        let f = FullParameterVector::new(vec![0.06, 0.04], vec![100.0, 0.0], 0.1).unwrap();
        let grid: Vec<f64> = (0..=100).map(f64::from).collect();
        let traj = rk4_solve(&m, &f, &grid, 0.01).unwrap();
        for (t, x) in grid.iter().zip(&traj.states) {
            let ex = exact_chain2(*t, &f);
            assert!((x[0] - ex[0]).abs() < 1e-8);
            assert!((x[1] - ex[1]).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_rhs_gives_constant_trajectory() {
        let m = ModelSpec::new(
            "still",
            vec!["x".into(), "y".into()],
            vec![],
            vec![],
            vec![],
            Arc::new(|_, _, _, out| out.fill(0.0)),
        )
        .unwrap();
        let f = FullParameterVector::new(vec![], vec![3.5, -1.0], 1.0).unwrap();
        let traj = rk4_solve(&m, &f, &[0.0, 1.0, 7.5], 0.1).unwrap();
        assert!(traj.states.iter().all(|x| x == &vec![3.5, -1.0]));
    }

    #[test]
    fn fourth_order_convergence() {
        let m = models::logistic();
        let f = FullParameterVector::new(vec![0.1, 100.0], vec![5.0], 1.0).unwrap();
        let err = |h: f64| {
            let traj = rk4_solve(&m, &f, &[0.0, 50.0], h).unwrap();
            (traj.states[1][0] - models::exact_logistic(50.0, &f)).abs()
        };
        let ratio = err(1.0) / err(0.5);
        assert!((ratio - 16.0).abs() < 1.5, "ratio {ratio}");
    }

    #[test]
    fn divergence_is_reported() {
        let m = ModelSpec::new(
            "blowup",
            vec!["x".into()],
            vec![],
            vec![],
            vec![],
            Arc::new(|_, x, _, out| out[0] = x[0] * x[0]),
        )
        .unwrap();
        let f = FullParameterVector::new(vec![], vec![1.0], 1.0).unwrap();
        assert!(matches!(
            rk4_solve(&m, &f, &[0.0, 5.0], 0.01),
            Err(IntegrateError::Diverged { .. })
        ));
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = models::newton();
        let f = FullParameterVector::new(vec![0.05, 20.0], vec![180.0], 8.0).unwrap();
        assert!(rk4_solve(&m, &f, &[0.0, 0.0], 0.1).is_err());
        assert!(rk4_solve(&m, &f, &[0.0, 1.0], 0.0).is_err());
        let bad = FullParameterVector::new(vec![0.05], vec![180.0], 8.0).unwrap();
        assert!(rk4_solve(&m, &bad, &[0.0, 1.0], 0.1).is_err());
    }
}
