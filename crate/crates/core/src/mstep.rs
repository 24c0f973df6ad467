//! Ridge-penalized multinomial logistic regression of one variable on fixed
//! row scores, fitted by Newton-Raphson with step halving.

use nalgebra::{DMatrix, DMatrixView, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::ScoreMatrix;
use crate::error::FitError;
use crate::model::{softmax, Baseline, VariableParams, PROB_FLOOR};

/// Below this curvature per observation an unpenalized fit is treated as
/// separated.
const SEPARATION_CURVATURE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RidgeConfig {
    pub lambda: f64,
    pub max_newton_iters: usize,
    pub grad_tol: f64,
    pub step_halving_max: usize,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            max_newton_iters: 50,
            grad_tol: 1e-8,
            step_halving_max: 20,
        }
    }
}

impl RidgeConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), FitError> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(FitError::InvalidConfig(format!("ridge penalty must be >= 0, got {}", self.lambda)));
        }
        if !(self.grad_tol > 0.0) || self.max_newton_iters == 0 {
            return Err(FitError::InvalidConfig("Newton tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of a Newton-Raphson fit.
#[derive(Debug, Clone)]
pub struct NewtonReport {
    pub params: VariableParams,
    pub iterations: usize,
    pub grad_norm: f64,
    /// Penalized objective at the start and after every accepted step.
    pub objective_trace: Vec<f64>,
}

/// Regression problem of one variable: responses `g_j` (rows may hold
/// fractional counts) against the design `[1, A]`.
struct Problem<'a> {
    g: DMatrixView<'a, f64>,
    a: &'a DMatrix<f64>,
    n_cat: usize,
    baseline: Baseline,
    lambda: f64,
}

struct Evaluation {
    objective: f64,
    gradient: DVector<f64>,
    hessian: Option<DMatrix<f64>>,
}

impl Problem<'_> {
    fn dims(&self) -> usize {
        self.a.ncols()
    }

    fn n_params(&self) -> usize {
        (self.n_cat - 1) * (self.dims() + 1)
    }

    fn evaluate(&self, params: &VariableParams, with_hessian: bool) -> Evaluation {
        let s = self.dims();
        let width = s + 1;
        let n_free = self.n_cat - 1;
        let np = self.n_params();
        let mut grad = DVector::zeros(np);
        let mut hess = with_hessian.then(|| DMatrix::zeros(np, np));
        let mut objective = 0.0;
        let mut x = vec![1.0; width];
        let mut point = vec![0.0; s];
        let floor = PROB_FLOOR.ln();

        for i in 0..self.a.nrows() {
            for d in 0..s {
                point[d] = self.a[(i, d)];
                x[d + 1] = point[d];
            }
            let eta = params.linear_predictor(&point);
            let max = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + eta.iter().map(|&e| (e - max).exp()).sum::<f64>().ln();
            let p = softmax(&eta);
            let n_i: f64 = (0..self.n_cat).map(|k| self.g[(i, k)]).sum();
            for k in 0..self.n_cat {
                let g = self.g[(i, k)];
                if g != 0.0 {
                    objective += g * (eta[k] - lse).max(floor);
                }
            }
            for r in 0..n_free {
                let c = params.category_of_row(r);
                let resid = self.g[(i, c)] - n_i * p[c];
                for (u, &xu) in x.iter().enumerate() {
                    grad[r * width + u] += resid * xu;
                }
                if let Some(h) = hess.as_mut() {
                    for r2 in 0..n_free {
                        let c2 = params.category_of_row(r2);
                        let w = n_i * p[c] * (if c == c2 { 1.0 } else { 0.0 } - p[c2]);
                        if w == 0.0 {
                            continue;
                        }
                        for (u, &xu) in x.iter().enumerate() {
                            for (v, &xv) in x.iter().enumerate() {
                                h[(r * width + u, r2 * width + v)] -= w * xu * xv;
                            }
                        }
                    }
                }
            }
        }

        if self.lambda > 0.0 {
            let theta = DVector::from_vec(params.to_flat());
            objective -= self.lambda * theta.norm_squared();
            grad -= &theta * (2.0 * self.lambda);
            if let Some(h) = hess.as_mut() {
                for d in 0..np {
                    h[(d, d)] -= 2.0 * self.lambda;
                }
            }
        }
        Evaluation {
            objective,
            gradient: grad,
            hessian: hess,
        }
    }

    fn params_from(&self, theta: &DVector<f64>) -> VariableParams {
        VariableParams::from_flat(theta.as_slice(), self.n_cat, self.dims(), self.baseline)
    }

    fn total_weight(&self) -> f64 {
        self.g.sum().max(1.0)
    }

    fn check_curvature(&self, hessian: &DMatrix<f64>) -> Result<(), FitError> {
        if self.lambda > 0.0 {
            return Ok(());
        }
        let neg = -hessian / self.total_weight();
        let min_eig = SymmetricEigen::new(neg)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eig < SEPARATION_CURVATURE {
            Err(FitError::Separation { curvature: min_eig })
        } else {
            Ok(())
        }
    }
}

fn check_shapes(g_j: &DMatrixView<'_, f64>, scores: &ScoreMatrix) -> Result<(), FitError> {
    if g_j.nrows() != scores.n_rows() {
        return Err(FitError::DimensionMismatch(format!(
            "{} indicator rows but {} score rows",
            g_j.nrows(),
            scores.n_rows()
        )));
    }
    if g_j.ncols() < 2 {
        return Err(FitError::DimensionMismatch("indicator block needs at least two categories".into()));
    }
    if scores.as_matrix().iter().any(|x| !x.is_finite()) {
        return Err(FitError::DimensionMismatch("scores must be finite".into()));
    }
    Ok(())
}

/// Gradient of the penalized log-likelihood with respect to the flat
/// parameter vector (`VariableParams::to_flat` layout).
pub fn penalized_gradient(
    g_j: DMatrixView<'_, f64>,
    scores: &ScoreMatrix,
    params: &VariableParams,
    lambda: f64,
) -> Vec<f64> {
    let problem = Problem {
        g: g_j,
        a: scores.as_matrix(),
        n_cat: params.n_categories(),
        baseline: params.baseline(),
        lambda,
    };
    problem.evaluate(params, false).gradient.as_slice().to_vec()
}

/// Hessian of the penalized log-likelihood (negative definite for `lambda > 0`).
pub fn penalized_hessian(
    g_j: DMatrixView<'_, f64>,
    scores: &ScoreMatrix,
    params: &VariableParams,
    lambda: f64,
) -> DMatrix<f64> {
    let problem = Problem {
        g: g_j,
        a: scores.as_matrix(),
        n_cat: params.n_categories(),
        baseline: params.baseline(),
        lambda,
    };
    problem.evaluate(params, true).hessian.unwrap()
}

/// Fits one variable's parameters on fixed scores.
pub fn fit_variable(
    g_j: DMatrixView<'_, f64>,
    scores: &ScoreMatrix,
    cfg: &RidgeConfig,
    baseline: Baseline,
) -> Result<VariableParams, FitError> {
    fit_variable_report(g_j, scores, cfg, baseline).map(|r| r.params)
}

/// Like [`fit_variable`] but also returns the iteration history.
pub fn fit_variable_report(
    g_j: DMatrixView<'_, f64>,
    scores: &ScoreMatrix,
    cfg: &RidgeConfig,
    baseline: Baseline,
) -> Result<NewtonReport, FitError> {
    cfg.validate()?;
    check_shapes(&g_j, scores)?;
    let problem = Problem {
        g: g_j,
        a: scores.as_matrix(),
        n_cat: g_j.ncols(),
        baseline,
        lambda: cfg.lambda,
    };
    let mut theta = DVector::zeros(problem.n_params());
    let mut current = problem.params_from(&theta);
    let mut eval = problem.evaluate(&current, true);
    let mut trace = vec![eval.objective];

    for iter in 0..cfg.max_newton_iters {
        let grad_norm = eval.gradient.amax();
        let hessian = eval.hessian.take().unwrap();
        if grad_norm < cfg.grad_tol {
            problem.check_curvature(&hessian)?;
            return Ok(NewtonReport {
                params: current,
                iterations: iter,
                grad_norm,
                objective_trace: trace,
            });
        }
        let neg = -hessian.clone();
        let step = match neg.cholesky() {
            Some(chol) => chol.solve(&eval.gradient),
            None => {
                problem.check_curvature(&hessian)?;
                return Err(FitError::NonConvergence {
                    iterations: iter,
                    grad_norm,
                });
            }
        };

        let tiny = 1e-12 * (1.0 + eval.objective.abs());
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.step_halving_max {
            let cand_theta = &theta + &step * t;
            let cand = problem.params_from(&cand_theta);
            let cand_eval = problem.evaluate(&cand, true);
            let better = cand_eval.objective >= eval.objective;
            let level = cand_eval.objective >= eval.objective - tiny
                && cand_eval.gradient.amax() < grad_norm;
            if cand_eval.objective.is_finite() && (better || level) {
                accepted = Some((cand_theta, cand, cand_eval));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((th, p, e)) => {
                theta = th;
                current = p;
                eval = e;
                trace.push(eval.objective);
            }
            None => {
                return Err(FitError::NonConvergence {
                    iterations: iter,
                    grad_norm,
                })
            }
        }
        if cfg.lambda == 0.0 && theta.amax() > 1e4 {
            return Err(FitError::Separation { curvature: 0.0 });
        }
    }
    let grad_norm = eval.gradient.amax();
    if grad_norm < cfg.grad_tol {
        problem.check_curvature(eval.hessian.as_ref().unwrap())?;
        return Ok(NewtonReport {
            params: current,
            iterations: cfg.max_newton_iters,
            grad_norm,
            objective_trace: trace,
        });
    }
    if let Some(h) = eval.hessian.as_ref() {
        problem.check_curvature(h)?;
    }
    Err(FitError::NonConvergence {
        iterations: cfg.max_newton_iters,
        grad_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::penalized_variable_log_likelihood;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn one_hot(codes: &[usize], k: usize) -> DMatrix<f64> {
        DMatrix::from_fn(codes.len(), k, |i, c| if codes[i] == c { 1.0 } else { 0.0 })
    }

    #[test]
    fn gradient_at_zero_ignores_penalty() {
        let g = one_hot(&[0, 1, 2, 1], 3);
        let a = ScoreMatrix::new(DMatrix::from_row_slice(4, 1, &[0.1, -0.4, 1.0, 2.0]));
        let p = VariableParams::zeros(3, 1, Baseline::Last);
        assert_eq!(
            penalized_gradient(g.columns(0, 3), &a, &p, 0.0),
            penalized_gradient(g.columns(0, 3), &a, &p, 3.0)
        );
    }

    #[test]
    fn null_model_recovers_log_frequency_ratios() {
        // Categories balanced within each score value, so slopes vanish.
        let scores: Vec<f64> = (0..12).map(|i| [-1.0, 0.0, 1.0][i / 4]).collect();
        let codes: Vec<usize> = (0..12).map(|i| [0, 0, 1, 2][i % 4]).collect();
        let g = one_hot(&codes, 3);
        let a = ScoreMatrix::new(DMatrix::from_column_slice(12, 1, &scores));
        let fit = fit_variable(g.columns(0, 3), &a, &RidgeConfig::with_lambda(0.0), Baseline::Last).unwrap();
        assert!(fit.slopes().amax() < 1e-8);
        assert!((fit.intercepts()[0] - 2.0f64.ln()).abs() < 1e-8);
        assert!(fit.intercepts()[1].abs() < 1e-8);
    }

    fn separable() -> (DMatrix<f64>, ScoreMatrix) {
        // Three categories occupying disjoint sectors of the plane.
        let pts = [
            (2.0, 0.1),
            (2.5, -0.3),
            (3.0, 0.4),
            (-1.0, 2.0),
            (-1.4, 2.6),
            (-0.8, 3.1),
            (-1.0, -2.0),
            (-1.5, -2.4),
            (-0.7, -3.0),
        ];
        let codes = [0, 0, 0, 1, 1, 1, 2, 2, 2];
        let a = DMatrix::from_fn(9, 2, |i, s| if s == 0 { pts[i].0 } else { pts[i].1 });
        (one_hot(&codes, 3), ScoreMatrix::new(a))
    }

    #[test]
    fn separated_data_needs_a_penalty() {
        let (g, a) = separable();
        let unpenalized = fit_variable(g.columns(0, 3), &a, &RidgeConfig::with_lambda(0.0), Baseline::Last);
        assert!(
            matches!(unpenalized, Err(FitError::Separation { .. }) | Err(FitError::NonConvergence { .. })),
            "{unpenalized:?}"
        );
        let ridge = fit_variable(g.columns(0, 3), &a, &RidgeConfig::with_lambda(0.1), Baseline::Last).unwrap();
        assert!(ridge.is_finite());
        // The penalized objective is bounded above by zero.
        let obj = penalized_variable_log_likelihood(g.columns(0, 3), &a, &ridge, 0.1);
        assert!(obj < 0.0 && obj.is_finite());
        assert!(ridge.squared_norm() < 10.0 / 0.1);
    }

    fn random_instance(rng: &mut ChaCha8Rng, n: usize, k: usize, s: usize) -> (DMatrix<f64>, ScoreMatrix) {
        let a = DMatrix::from_fn(n, s, |_, _| rng.random_range(-2.0..2.0));
        let codes: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        (one_hot(&codes, k), ScoreMatrix::new(a))
    }

    #[test]
    fn optimum_has_vanishing_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (g, a) = random_instance(&mut rng, 30, 3, 2);
        let cfg = RidgeConfig::with_lambda(0.1);
        let report = fit_variable_report(g.columns(0, 3), &a, &cfg, Baseline::Last).unwrap();
        let grad = penalized_gradient(g.columns(0, 3), &a, &report.params, 0.1);
        assert!(grad.iter().all(|x| x.abs() < 1e-8));
        // Central differences of the objective agree at the optimum too.
        let theta = report.params.to_flat();
        for d in 0..theta.len() {
            let f = |h: f64| {
                let mut t = theta.clone();
                t[d] += h;
                let p = VariableParams::from_flat(&t, 3, 2, Baseline::Last);
                penalized_variable_log_likelihood(g.columns(0, 3), &a, &p, 0.1)
            };
            let fd = (f(1e-5) - f(-1e-5)) / 2e-5;
            assert!(fd.abs() < 1e-6, "component {d}: {fd}");
        }
    }

    #[test]
    fn objective_never_decreases() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let (g, a) = random_instance(&mut rng, 25, 4, 2);
            let report = fit_variable_report(g.columns(0, 4), &a, &RidgeConfig::default(), Baseline::Last).unwrap();
            for w in report.objective_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-12 * (1.0 + w[0].abs()), "{:?}", report.objective_trace);
            }
        }
    }

    #[test]
    fn penalized_hessian_is_negative_definite() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (g, a) = random_instance(&mut rng, 10, 4, 2);
        let p = VariableParams::from_flat(&(0..9).map(|_| rng.random_range(-3.0..3.0)).collect::<Vec<_>>(), 4, 2, Baseline::Last);
        let h = penalized_hessian(g.columns(0, 4), &a, &p, 0.1);
        assert!((-h).cholesky().is_some());
    }

    #[test]
    fn row_permutation_leaves_fit_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (g, a) = random_instance(&mut rng, 30, 3, 2);
        let perm: Vec<usize> = (0..30).rev().collect();
        let gp = g.select_rows(&perm);
        let ap = ScoreMatrix::new(a.as_matrix().select_rows(&perm));
        let cfg = RidgeConfig::default();
        let f1 = fit_variable(g.columns(0, 3), &a, &cfg, Baseline::Last).unwrap();
        let f2 = fit_variable(gp.columns(0, 3), &ap, &cfg, Baseline::Last).unwrap();
        for (x, y) in f1.to_flat().iter().zip(f2.to_flat()) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let g = one_hot(&[0, 1], 2);
        let a = ScoreMatrix::zeros(3, 1);
        assert!(matches!(
            fit_variable(g.columns(0, 2), &a, &RidgeConfig::default(), Baseline::Last),
            Err(FitError::DimensionMismatch(_))
        ));
    }
}
