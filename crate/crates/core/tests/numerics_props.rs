use std::cell::RefCell;

use genprof::numerics::{least_squares_solve, nelder_mead_max, Bounds, OptimizerOptions};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A tilted quadratic bowl with its peak at `c`, possibly outside the box.
fn bowl(c: Vec<f64>, tilt: f64) -> impl Fn(&[f64]) -> f64 {
    move |x: &[f64]| {
        let mut v = 0.0;
        for (i, (xi, ci)) in x.iter().zip(&c).enumerate() {
            v -= (1.0 + i as f64) * (xi - ci).powi(2);
        }
        v + tilt * x[0] * x.last().unwrap()
    }
}

fn opts() -> OptimizerOptions {
    OptimizerOptions {
        max_evals: 2000,
        ..OptimizerOptions::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn best_value_never_drops(c in prop::collection::vec(-8.0f64..8.0, 2..5), tilt in -0.4f64..0.4) {
        let n = c.len();
        let bounds = Bounds::new(vec![-5.0; n], vec![5.0; n]).unwrap();
        let f = bowl(c, tilt);
        let x0 = vec![0.5; n];
        let start = f(&x0);
        let m = nelder_mead_max(&f, &x0, &bounds, &opts()).unwrap();
        prop_assert!(m.best_trace.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!(m.value >= start);
        prop_assert!(bounds.contains(&m.x));
    }

    #[test]
    fn every_evaluation_is_feasible(c in prop::collection::vec(-20.0f64..20.0, 1..4), lo in -3.0f64..0.0, width in 0.5f64..6.0) {
        let n = c.len();
        let bounds = Bounds::new(vec![lo; n], vec![lo + width; n]).unwrap();
        let seen = RefCell::new(Vec::new());
        let f = bowl(c, 0.0);
        let x0 = vec![lo + 0.3 * width; n];
        nelder_mead_max(|x: &[f64]| { seen.borrow_mut().push(x.to_vec()); f(x) }, &x0, &bounds, &opts()).unwrap();
        for x in seen.borrow().iter() {
            prop_assert!(bounds.contains(x), "{:?}", x);
        }
    }

    #[test]
    fn positive_rescaling_keeps_the_argmax(c in prop::collection::vec(-4.0f64..4.0, 2..4), k in prop::sample::select(vec![0.5, 2.0, 4.0, 1024.0])) {
        // Powers of two keep every comparison identical bit for bit.
        let n = c.len();
        let bounds = Bounds::new(vec![-5.0; n], vec![5.0; n]).unwrap();
        let f = bowl(c, 0.1);
        let x0 = vec![1.0; n];
        let a = nelder_mead_max(&f, &x0, &bounds, &opts()).unwrap();
        let b = nelder_mead_max(|x: &[f64]| k * f(x), &x0, &bounds, &opts()).unwrap();
        prop_assert_eq!(a.x, b.x);
        prop_assert_eq!(a.evals, b.evals);
    }

    #[test]
    fn least_squares_is_locally_optimal(seed in any::<u64>(), rows in 6usize..40, cols in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(rows, cols, |i, j| rng.random_range(-1.0..1.0) + if i == j { 2.0 } else { 0.0 });
        let rhs = DVector::from_fn(rows, |_, _| rng.random_range(-10.0..10.0));
        let x = least_squares_solve(&m, &rhs).unwrap();
        let r0 = (&m * &x - &rhs).norm();
        for _ in 0..20 {
            let mut d = DVector::from_fn(cols, |_, _| rng.random_range(-1.0..1.0));
            d *= 1e-4 / d.norm();
            let r = (&m * (&x + &d) - &rhs).norm();
            prop_assert!(r >= r0 - 1e-12 * r0.max(1.0));
        }
    }
}

#[test]
fn normal_equation_residual_on_random_tall_system() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = DMatrix::from_fn(50, 5, |_, _| rng.random_range(-1.0..1.0));
    let rhs = DVector::from_fn(50, |_, _| rng.random_range(-1.0..1.0));
    let x = least_squares_solve(&m, &rhs).unwrap();
    let ne = m.transpose() * (&m * x - &rhs);
    assert!(ne.norm() <= 1e-8 * rhs.norm());
}

#[test]
fn boundary_and_interior_quadratics() {
    let f = |x: &[f64]| -(x[0] - 2.0).powi(2);
    let inside = nelder_mead_max(f, &[4.0], &Bounds::new(vec![0.0], vec![5.0]).unwrap(), &opts()).unwrap();
    assert!((inside.x[0] - 2.0).abs() < 1e-5);
    let edge = nelder_mead_max(f, &[4.0], &Bounds::new(vec![3.0], vec![5.0]).unwrap(), &opts()).unwrap();
    assert!((edge.x[0] - 3.0).abs() < 1e-5);
}
