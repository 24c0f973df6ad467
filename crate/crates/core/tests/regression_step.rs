mod common;

use nalgebra::DMatrix;
use nlbiplot::error::FitError;
use nlbiplot::model::penalized_variable_log_likelihood;
use nlbiplot::mstep::{fit_variable_report, penalized_gradient, penalized_hessian};
use nlbiplot::{fit_variable, Baseline, RidgeConfig, ScoreMatrix, VariableParams};
use proptest::prelude::*;
use rand::Rng;

/// Random one-variable problem: indicator block, scores, parameters.
fn instance(seed: u64, rows: usize, k: usize, dims: usize) -> (DMatrix<f64>, ScoreMatrix, VariableParams) {
    let mut rng = common::rng(seed);
    let codes: Vec<usize> = (0..rows).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect();
    let g = DMatrix::from_fn(rows, k, |i, c| f64::from(u8::from(codes[i] == c)));
    let a = ScoreMatrix::new(DMatrix::from_fn(rows, dims, |_, _| common::standard_normal(&mut rng)));
    let p = common::random_params(&mut rng, k, dims, 1.0, Baseline::Last);
    (g, a, p)
}

fn objective(g: &DMatrix<f64>, a: &ScoreMatrix, theta: &[f64], k: usize, dims: usize, lambda: f64) -> f64 {
    let p = VariableParams::from_flat(theta, k, dims, Baseline::Last);
    penalized_variable_log_likelihood(g.columns(0, k), a, &p, lambda)
}

#[test]
fn gradient_matches_central_differences() {
    let h = 1e-5;
    for seed in 0..40 {
        let k = 2 + (seed as usize % 4);
        let (g, a, p) = instance(seed, 25, k, 2);
        let grad = penalized_gradient(g.columns(0, k), &a, &p, 0.1);
        let theta = p.to_flat();
        for c in 0..theta.len() {
            let (mut up, mut down) = (theta.clone(), theta.clone());
            up[c] += h;
            down[c] -= h;
            let fd = (objective(&g, &a, &up, k, 2, 0.1) - objective(&g, &a, &down, k, 2, 0.1)) / (2.0 * h);
            let rel = (grad[c] - fd).abs() / fd.abs().max(1.0);
            assert!(rel < 1e-6, "seed {seed} coord {c}: {} vs {fd}", grad[c]);
        }
    }
}

#[test]
fn hessian_matches_differences_of_the_gradient() {
    let h = 1e-5;
    let (g, a, p) = instance(99, 30, 4, 2);
    let hess = penalized_hessian(g.columns(0, 4), &a, &p, 0.1);
    let theta = p.to_flat();
    for c in 0..theta.len() {
        let (mut up, mut down) = (theta.clone(), theta.clone());
        up[c] += h;
        down[c] -= h;
        let gu = penalized_gradient(g.columns(0, 4), &a, &VariableParams::from_flat(&up, 4, 2, Baseline::Last), 0.1);
        let gd = penalized_gradient(g.columns(0, 4), &a, &VariableParams::from_flat(&down, 4, 2, Baseline::Last), 0.1);
        for r in 0..theta.len() {
            let fd = (gu[r] - gd[r]) / (2.0 * h);
            assert!((hess[(r, c)] - fd).abs() < 1e-6 * fd.abs().max(1.0));
        }
    }
    let eig = hess.symmetric_eigen().eigenvalues;
    assert!(eig.iter().all(|&e| e < 0.0), "negative definite");
}

#[test]
fn fitted_parameters_are_stationary() {
    let (g, a, _) = instance(5, 40, 3, 2);
    let cfg = RidgeConfig::default();
    let p = fit_variable(g.columns(0, 3), &a, &cfg, Baseline::Last).unwrap();
    let grad = penalized_gradient(g.columns(0, 3), &a, &p, cfg.lambda);
    assert!(grad.iter().map(|x| x * x).sum::<f64>().sqrt() < 1e-6);
}

#[test]
fn ridge_shrinks_parameter_norm() {
    let (g, a, _) = instance(6, 40, 4, 2);
    let norms: Vec<f64> = [0.01, 0.1, 1.0, 10.0]
        .iter()
        .map(|&l| {
            fit_variable(g.columns(0, 4), &a, &RidgeConfig::with_lambda(l), Baseline::Last)
                .unwrap()
                .squared_norm()
        })
        .collect();
    assert!(norms.windows(2).all(|w| w[1] < w[0]), "{norms:?}");
}

#[test]
fn slopes_of_an_unrelated_variable_are_small() {
    let mut rng = common::rng(7);
    let rows = 400;
    let codes: Vec<usize> = (0..rows).map(|_| rng.random_range(0..3)).collect();
    let g = DMatrix::from_fn(rows, 3, |i, c| f64::from(u8::from(codes[i] == c)));
    let a = ScoreMatrix::new(DMatrix::from_fn(rows, 2, |_, _| common::standard_normal(&mut rng)));
    let p = fit_variable(g.columns(0, 3), &a, &RidgeConfig::default(), Baseline::Last).unwrap();
    assert!(p.slopes().iter().all(|b| b.abs() < 0.3), "{}", p.slopes());
}

#[test]
fn separated_data_without_penalty_fails() {
    let rows = 20;
    let a = ScoreMatrix::new(DMatrix::from_fn(rows, 1, |i, _| i as f64 - 9.5));
    let g = DMatrix::from_fn(rows, 2, |i, c| f64::from(u8::from((i < 10) == (c == 0))));
    let err = fit_variable(g.columns(0, 2), &a, &RidgeConfig::with_lambda(0.0), Baseline::Last).unwrap_err();
    assert!(matches!(err, FitError::Separation { .. } | FitError::NonConvergence { .. }), "{err:?}");
    let p = fit_variable(g.columns(0, 2), &a, &RidgeConfig::with_lambda(0.1), Baseline::Last).unwrap();
    assert!(p.is_finite());
}

#[test]
fn shape_mismatch_is_reported() {
    let (g, _, _) = instance(8, 10, 3, 2);
    let a = ScoreMatrix::zeros(9, 2);
    assert!(matches!(
        fit_variable(g.columns(0, 3), &a, &RidgeConfig::default(), Baseline::Last),
        Err(FitError::DimensionMismatch(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn newton_objective_never_decreases(seed in any::<u64>(), k in 2usize..6, lambda in 0.01f64..2.0) {
        let (g, a, _) = instance(seed, 30, k, 2);
        let report = fit_variable_report(g.columns(0, k), &a, &RidgeConfig::with_lambda(lambda), Baseline::Last).unwrap();
        prop_assert!(report.objective_trace.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }

    #[test]
    fn category_relabelling_permutes_estimates(seed in any::<u64>()) {
        // Swap the two non-baseline categories of a 3-level variable.
        let (g, a, _) = instance(seed, 30, 3, 2);
        let mut swapped = g.clone();
        swapped.swap_columns(0, 1);
        let cfg = RidgeConfig::default();
        let p = fit_variable(g.columns(0, 3), &a, &cfg, Baseline::Last).unwrap();
        let q = fit_variable(swapped.columns(0, 3), &a, &cfg, Baseline::Last).unwrap();
        for (c, d) in [(0usize, 1usize), (1, 0)] {
            prop_assert!((p.intercept(c) - q.intercept(d)).abs() < 1e-7);
            for s in 0..2 {
                prop_assert!((p.slope(c, s) - q.slope(d, s)).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn row_order_does_not_matter(seed in any::<u64>()) {
        let (g, a, _) = instance(seed, 25, 4, 2);
        let n = g.nrows();
        let rev_g = DMatrix::from_fn(n, 4, |i, c| g[(n - 1 - i, c)]);
        let rev_a = ScoreMatrix::new(DMatrix::from_fn(n, 2, |i, s| a.as_matrix()[(n - 1 - i, s)]));
        let cfg = RidgeConfig::default();
        let p = fit_variable(g.columns(0, 4), &a, &cfg, Baseline::Last).unwrap();
        let q = fit_variable(rev_g.columns(0, 4), &rev_a, &cfg, Baseline::Last).unwrap();
        for (x, y) in p.to_flat().iter().zip(q.to_flat()) {
            prop_assert!((x - y).abs() < 1e-8);
        }
    }
}
