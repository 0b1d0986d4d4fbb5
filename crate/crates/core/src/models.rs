//! ODE right-hand sides, closed-form solutions and the model registry.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("model `{model}` expects {expected} {what}, got {got}")]
    Dimension {
        model: String,
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("unknown model `{0}`")]
    Unknown(String),
}

/// `rhs(t, state, params, out)` writes `dstate/dt` into `out`.
pub type RhsFn = dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync;
/// `exact(t, params, initial_state)` returns the state at `t`.
pub type ExactFn = dyn Fn(f64, &[f64], &[f64]) -> Vec<f64> + Send + Sync;

/// ODE parameters plus the quantities a traditional fit would also need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullParameterVector {
    pub ode_params: Vec<f64>,
    pub initial_state: Vec<f64>,
    pub sigma: f64,
}

impl FullParameterVector {
    pub fn new(
        ode_params: Vec<f64>,
        initial_state: Vec<f64>,
        sigma: f64,
    ) -> Result<Self, ModelError> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(ModelError::Invalid(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self {
            ode_params,
            initial_state,
            sigma,
        })
    }
}

/// A dimension-`S` ODE system `dx/dt = rhs(t, x, theta)`.
#[derive(Clone)]
pub struct ModelSpec {
    name: String,
    species_names: Vec<String>,
    param_names: Vec<String>,
    param_bounds: Vec<(f64, f64)>,
    default_theta0: Vec<f64>,
    rhs: Arc<RhsFn>,
    exact: Option<Arc<ExactFn>>,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("species_names", &self.species_names)
            .field("param_names", &self.param_names)
            .field("param_bounds", &self.param_bounds)
            .field("has_exact", &self.exact.is_some())
            .finish()
    }
}

impl ModelSpec {
    /// A user-defined model. `default_theta0` must lie inside the bounds.
    pub fn new(
        name: impl Into<String>,
        species_names: Vec<String>,
        param_names: Vec<String>,
        param_bounds: Vec<(f64, f64)>,
        default_theta0: Vec<f64>,
        rhs: Arc<RhsFn>,
    ) -> Result<Self, ModelError> {
        let name = name.into();
        if species_names.is_empty() {
            return Err(ModelError::Invalid(format!("{name}: no species")));
        }
        if param_bounds.len() != param_names.len() {
            return Err(ModelError::Dimension {
                model: name,
                what: "parameter bounds",
                expected: param_names.len(),
                got: param_bounds.len(),
            });
        }
        if default_theta0.len() != param_names.len() {
            return Err(ModelError::Dimension {
                model: name,
                what: "initial parameters",
                expected: param_names.len(),
                got: default_theta0.len(),
            });
        }
        for (i, &(lo, hi)) in param_bounds.iter().enumerate() {
            if !(lo < hi) {
                return Err(ModelError::Invalid(format!(
                    "{name}: bounds for `{}` must satisfy lower < upper",
                    param_names[i]
                )));
            }
            if !(default_theta0[i] >= lo && default_theta0[i] <= hi) {
                return Err(ModelError::Invalid(format!(
                    "{name}: default value for `{}` lies outside its bounds",
                    param_names[i]
                )));
            }
        }
        Ok(Self {
            name,
            species_names,
            param_names,
            param_bounds,
            default_theta0,
            rhs,
            exact: None,
        })
    }

    pub fn with_exact_solution(mut self, exact: Arc<ExactFn>) -> Self {
        self.exact = Some(exact);
        self
    }

    pub fn with_bounds(self, bounds: Vec<(f64, f64)>) -> Result<Self, ModelError> {
        let theta0 = self
            .default_theta0
            .iter()
            .zip(&bounds)
            .map(|(x, (lo, hi))| x.clamp(*lo, *hi))
            .collect();
        Self::new(
            self.name,
            self.species_names,
            self.param_names,
            bounds,
            theta0,
            self.rhs,
        )
        .map(|m| Self {
            exact: self.exact,
            ..m
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of state variables `S`.
    pub fn dimension(&self) -> usize {
        self.species_names.len()
    }

    pub fn species_names(&self) -> &[String] {
        &self.species_names
    }

    pub fn param_names(&self) -> &[String] {
        &self.param_names
    }

    pub fn param_bounds(&self) -> &[(f64, f64)] {
        &self.param_bounds
    }

    pub fn default_theta0(&self) -> &[f64] {
        &self.default_theta0
    }

    pub fn has_exact_solution(&self) -> bool {
        self.exact.is_some()
    }

    /// Evaluates the right-hand side into `out` without allocation.
    #[inline]
    pub fn rhs_into(&self, t: f64, state: &[f64], params: &[f64], out: &mut [f64]) {
        (self.rhs)(t, state, params, out)
    }

    pub fn rhs(&self, t: f64, state: &[f64], params: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_state(state.len())?;
        self.check_params(params.len())?;
        let mut out = vec![0.0; self.dimension()];
        self.rhs_into(t, state, params, &mut out);
        Ok(out)
    }

    pub fn exact(&self, t: f64, full: &FullParameterVector) -> Option<Result<Vec<f64>, ModelError>> {
        let exact = self.exact.as_ref()?;
        Some(
            self.check_full(full)
                .map(|_| exact(t, &full.ode_params, &full.initial_state)),
        )
    }

    pub fn check_params(&self, got: usize) -> Result<(), ModelError> {
        if got != self.param_names.len() {
            return Err(ModelError::Dimension {
                model: self.name.clone(),
                what: "ODE parameters",
                expected: self.param_names.len(),
                got,
            });
        }
        Ok(())
    }

    pub fn check_state(&self, got: usize) -> Result<(), ModelError> {
        if got != self.dimension() {
            return Err(ModelError::Dimension {
                model: self.name.clone(),
                what: "state variables",
                expected: self.dimension(),
                got,
            });
        }
        Ok(())
    }

    pub fn check_full(&self, full: &FullParameterVector) -> Result<(), ModelError> {
        self.check_params(full.ode_params.len())?;
        self.check_state(full.initial_state.len())
    }
}

/// Newton cooling: `-alpha (T - T_a)`.
pub fn rhs_newton(_t: f64, temp: f64, alpha: f64, ambient: f64) -> f64 {
    -alpha * (temp - ambient)
}

/// Logistic growth: `lambda C (1 - C / kappa)`.
pub fn rhs_logistic(_t: f64, c: f64, lambda: f64, kappa: f64) -> f64 {
    lambda * c * (1.0 - c / kappa)
}

/// Sequential first-order decay chain with one rate per species.
pub fn rhs_chain(_t: f64, state: &[f64], rates: &[f64]) -> Result<Vec<f64>, ModelError> {
    if state.len() != rates.len() || state.is_empty() {
        return Err(ModelError::Dimension {
            model: format!("chain{}", rates.len()),
            what: "state variables",
            expected: rates.len(),
            got: state.len(),
        });
    }
    let mut out = vec![0.0; state.len()];
    chain_into(state, rates, &mut out);
    Ok(out)
}

#[inline]
fn chain_into(state: &[f64], rates: &[f64], out: &mut [f64]) {
    let mut inflow = 0.0;
    for i in 0..state.len() {
        let outflow = rates[i] * state[i];
        out[i] = inflow - outflow;
        inflow = outflow;
    }
}

/// `(T(0) - T_a) e^{-alpha t} + T_a` with params `(alpha, T_a)`.
pub fn exact_newton(t: f64, full: &FullParameterVector) -> f64 {
    let (alpha, ambient) = (full.ode_params[0], full.ode_params[1]);
    (full.initial_state[0] - ambient) * (-alpha * t).exp() + ambient
}

/// `kappa C0 / (C0 + (kappa - C0) e^{-lambda t})` with params `(lambda, kappa)`.
pub fn exact_logistic(t: f64, full: &FullParameterVector) -> f64 {
    let (lambda, kappa) = (full.ode_params[0], full.ode_params[1]);
    let c0 = full.initial_state[0];
    kappa * c0 / (c0 + (kappa - c0) * (-lambda * t).exp())
}

/// Two-species chain in a single formula that stays accurate as `r1 -> r2`:
/// `C2 = e^{-r2 t} (C2(0) + r1 C1(0) t phi(-(r1 - r2) t))`, `phi(x) = (e^x - 1)/x`.
pub fn exact_chain2(t: f64, full: &FullParameterVector) -> [f64; 2] {
    let (r1, r2) = (full.ode_params[0], full.ode_params[1]);
    let (c10, c20) = (full.initial_state[0], full.initial_state[1]);
    let c1 = c10 * (-r1 * t).exp();
    let c2 = (-r2 * t).exp() * (c20 + r1 * c10 * t * exprel(-(r1 - r2) * t));
    [c1, c2]
}

/// `(e^x - 1) / x`, with the removable singularity at zero filled in.
pub fn exprel(x: f64) -> f64 {
    if x.abs() < 1e-5 {
        1.0 + x * (0.5 + x * (1.0 / 6.0 + x / 24.0))
    } else {
        x.exp_m1() / x
    }
}

pub const NEWTON: &str = "newton";
pub const LOGISTIC: &str = "logistic";
pub const CHAIN2: &str = "chain2";
pub const CHAIN3: &str = "chain3";

/// Default box for rate-like parameters.
pub const RATE_BOUNDS: (f64, f64) = (1e-6, 10.0);
pub const AMBIENT_BOUNDS: (f64, f64) = (-273.15, 1000.0);
pub const CAPACITY_BOUNDS: (f64, f64) = (1e-3, 1e5);
pub const SIGMA_BOUNDS: (f64, f64) = (1e-6, 1e3);

fn names(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

pub fn newton() -> ModelSpec {
    ModelSpec::new(
        NEWTON,
        names(&["T"]),
        names(&["alpha", "T_a"]),
        vec![RATE_BOUNDS, AMBIENT_BOUNDS],
        vec![0.1, 0.0],
        Arc::new(|t, x, p, out| out[0] = rhs_newton(t, x[0], p[0], p[1])),
    )
    .expect("builtin model is valid")
    .with_exact_solution(Arc::new(|t, p, x0| {
        let full = FullParameterVector {
            ode_params: p.to_vec(),
            initial_state: x0.to_vec(),
            sigma: 1.0,
        };
        vec![exact_newton(t, &full)]
    }))
}

pub fn logistic() -> ModelSpec {
    ModelSpec::new(
        LOGISTIC,
        names(&["C"]),
        names(&["lambda", "kappa"]),
        vec![RATE_BOUNDS, CAPACITY_BOUNDS],
        vec![0.1, 1.0],
        Arc::new(|t, x, p, out| out[0] = rhs_logistic(t, x[0], p[0], p[1])),
    )
    .expect("builtin model is valid")
    .with_exact_solution(Arc::new(|t, p, x0| {
        let full = FullParameterVector {
            ode_params: p.to_vec(),
            initial_state: x0.to_vec(),
            sigma: 1.0,
        };
        vec![exact_logistic(t, &full)]
    }))
}

pub fn chain2() -> ModelSpec {
    ModelSpec::new(
        CHAIN2,
        names(&["C1", "C2"]),
        names(&["r1", "r2"]),
        vec![RATE_BOUNDS; 2],
        vec![0.1; 2],
        Arc::new(|_, x, p, out| chain_into(x, p, out)),
    )
    .expect("builtin model is valid")
    .with_exact_solution(Arc::new(|t, p, x0| {
        let full = FullParameterVector {
            ode_params: p.to_vec(),
            initial_state: x0.to_vec(),
            sigma: 1.0,
        };
        exact_chain2(t, &full).to_vec()
    }))
}

/// Three-species chain. No closed form is registered; use RK4.
pub fn chain3() -> ModelSpec {
    ModelSpec::new(
        CHAIN3,
        names(&["C1", "C2", "C3"]),
        names(&["r1", "r2", "r3"]),
        vec![RATE_BOUNDS; 3],
        vec![0.1; 3],
        Arc::new(|_, x, p, out| chain_into(x, p, out)),
    )
    .expect("builtin model is valid")
}

/// Models addressable by name.
#[derive(Debug, Clone)]
pub struct ModelRegistry {
    models: BTreeMap<String, ModelSpec>,
}

impl Default for ModelRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl ModelRegistry {
    pub fn empty() -> Self {
        Self {
            models: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        for m in [newton(), logistic(), chain2(), chain3()] {
            reg.register(m);
        }
        reg
    }

    /// Adds or replaces a model under its own name.
    pub fn register(&mut self, model: ModelSpec) {
        self.models.insert(model.name().to_string(), model);
    }

    pub fn get(&self, name: &str) -> Result<&ModelSpec, ModelError> {
        self.models
            .get(name)
            .ok_or_else(|| ModelError::Unknown(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.models.keys().map(String::as_str)
    }
}

/// Looks up a built-in model.
pub fn builtin(name: &str) -> Result<ModelSpec, ModelError> {
    ModelRegistry::with_builtins().get(name).cloned()
}
