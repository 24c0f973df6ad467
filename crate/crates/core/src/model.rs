//! The multinomial logistic latent-trait model.
//!
//! For variable `j` and a point `a` in the latent space, category `k` has
//! linear predictor `b_k0 + a'b_k`; one baseline category has its predictor
//! fixed at zero and probabilities are the softmax of the predictors.

use nalgebra::{DMatrix, DMatrixView};
use serde::{Deserialize, Serialize};

use crate::data::{IndicatorMatrix, ScoreMatrix};
use crate::mstep::RidgeConfig;

/// Smallest probability passed to `ln`.
pub const PROB_FLOOR: f64 = 1e-300;

/// Which category of each variable carries the zero restriction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    First,
    #[default]
    Last,
}

impl Baseline {
    /// Category index of the baseline for a variable with `k` levels.
    pub fn index(self, k: usize) -> usize {
        match self {
            Baseline::First => 0,
            Baseline::Last => k - 1,
        }
    }
}

/// Parameters of one variable: `K_j - 1` free rows of intercept and slopes.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableParams {
    intercepts: Vec<f64>,
    /// `(K_j - 1) x S`, row `r` belongs to the `r`-th non-baseline category.
    slopes: DMatrix<f64>,
    baseline: Baseline,
}

impl VariableParams {
    pub fn new(intercepts: Vec<f64>, slopes: DMatrix<f64>, baseline: Baseline) -> Self {
        assert_eq!(intercepts.len(), slopes.nrows(), "one intercept per free category");
        assert!(!intercepts.is_empty(), "a variable needs at least two categories");
        Self {
            intercepts,
            slopes,
            baseline,
        }
    }

    pub fn zeros(n_categories: usize, dims: usize, baseline: Baseline) -> Self {
        Self::new(
            vec![0.0; n_categories - 1],
            DMatrix::zeros(n_categories - 1, dims),
            baseline,
        )
    }

    /// Builds parameters from unrestricted rows for all `K_j` categories by
    /// subtracting the baseline row.
    pub fn from_full(intercepts: &[f64], slopes: &DMatrix<f64>, baseline: Baseline) -> Self {
        let k = intercepts.len();
        assert_eq!(slopes.nrows(), k);
        let base = baseline.index(k);
        let free: Vec<usize> = (0..k).filter(|&c| c != base).collect();
        let b0 = free.iter().map(|&c| intercepts[c] - intercepts[base]).collect();
        let b = DMatrix::from_fn(k - 1, slopes.ncols(), |r, s| {
            slopes[(free[r], s)] - slopes[(base, s)]
        });
        Self::new(b0, b, baseline)
    }

    /// Builds parameters from a flat vector laid out as `[b_r0, b_r1..b_rS]`
    /// for each free row `r`.
    pub fn from_flat(theta: &[f64], n_categories: usize, dims: usize, baseline: Baseline) -> Self {
        let width = dims + 1;
        assert_eq!(theta.len(), (n_categories - 1) * width);
        let intercepts = theta.chunks(width).map(|c| c[0]).collect();
        let slopes = DMatrix::from_fn(n_categories - 1, dims, |r, s| theta[r * width + 1 + s]);
        Self::new(intercepts, slopes, baseline)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.intercepts.len() * (self.dims() + 1));
        for r in 0..self.intercepts.len() {
            out.push(self.intercepts[r]);
            out.extend(self.slopes.row(r).iter());
        }
        out
    }

    pub fn n_categories(&self) -> usize {
        self.intercepts.len() + 1
    }

    pub fn dims(&self) -> usize {
        self.slopes.ncols()
    }

    pub fn baseline(&self) -> Baseline {
        self.baseline
    }

    pub fn baseline_index(&self) -> usize {
        self.baseline.index(self.n_categories())
    }

    pub fn intercepts(&self) -> &[f64] {
        &self.intercepts
    }

    pub fn slopes(&self) -> &DMatrix<f64> {
        &self.slopes
    }

    /// Category index of free row `r`.
    pub fn category_of_row(&self, r: usize) -> usize {
        match self.baseline {
            Baseline::First => r + 1,
            Baseline::Last => r,
        }
    }

    /// Free row of category `k`, `None` for the baseline.
    pub fn row_of_category(&self, k: usize) -> Option<usize> {
        match self.baseline {
            Baseline::First => k.checked_sub(1),
            Baseline::Last => (k + 1 < self.n_categories()).then_some(k),
        }
    }

    /// Intercept of category `k`, zero for the baseline.
    pub fn intercept(&self, k: usize) -> f64 {
        self.row_of_category(k).map_or(0.0, |r| self.intercepts[r])
    }

    /// Slope of category `k` on dimension `s`, zero for the baseline.
    pub fn slope(&self, k: usize, s: usize) -> f64 {
        self.row_of_category(k).map_or(0.0, |r| self.slopes[(r, s)])
    }

    /// Linear predictors of all `K_j` categories at `point`.
    pub fn linear_predictor(&self, point: &[f64]) -> Vec<f64> {
        debug_assert_eq!(point.len(), self.dims());
        let mut eta = vec![0.0; self.n_categories()];
        for r in 0..self.intercepts.len() {
            let mut v = self.intercepts[r];
            for (s, &x) in point.iter().enumerate() {
                v += self.slopes[(r, s)] * x;
            }
            eta[self.category_of_row(r)] = v;
        }
        eta
    }

    /// Squared Euclidean norm of all free parameters.
    pub fn squared_norm(&self) -> f64 {
        self.intercepts.iter().map(|b| b * b).sum::<f64>() + self.slopes.norm_squared()
    }

    pub fn is_finite(&self) -> bool {
        self.intercepts.iter().all(|b| b.is_finite()) && self.slopes.iter().all(|b| b.is_finite())
    }
}

/// Softmax with the maximum subtracted before exponentiation.
pub fn softmax(eta: &[f64]) -> Vec<f64> {
    let max = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = eta.iter().map(|&e| (e - max).exp()).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    p
}

/// Log-probabilities of each category, floored at `ln(PROB_FLOOR)`.
pub fn log_softmax(eta: &[f64]) -> Vec<f64> {
    let max = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + eta.iter().map(|&e| (e - max).exp()).sum::<f64>().ln();
    let floor = PROB_FLOOR.ln();
    eta.iter().map(|&e| (e - lse).max(floor)).collect()
}

/// Category probabilities of one variable at a latent point.
pub fn category_probabilities(params: &VariableParams, point: &[f64]) -> Vec<f64> {
    softmax(&params.linear_predictor(point))
}

/// A fitted nominal logistic biplot.
#[derive(Debug, Clone, PartialEq)]
pub struct BiplotModel {
    pub variables: Vec<VariableParams>,
    pub scores: ScoreMatrix,
    pub ridge: RidgeConfig,
    pub diagnostics: FitDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Final penalized marginal log-likelihood.
    pub penalized_loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Penalized marginal log-likelihood after every EM iteration.
    pub trace: Vec<f64>,
    pub message: Option<String>,
}

impl BiplotModel {
    pub fn dims(&self) -> usize {
        self.scores.dims()
    }

    /// Checks that every variable has as many slope columns as there are
    /// score dimensions.
    pub fn is_consistent(&self) -> bool {
        self.variables.iter().all(|v| v.dims() == self.scores.dims())
    }
}

/// Expected log-odds of every non-baseline category against its baseline,
/// `I x (L - J)`, variables in order.
#[derive(Debug, Clone, PartialEq)]
pub struct LogOddsMatrix {
    pub values: DMatrix<f64>,
}

/// Computes `O = 1 b0' + A B'`.
pub fn log_odds(model: &BiplotModel) -> LogOddsMatrix {
    let a = model.scores.as_matrix();
    let cols: usize = model.variables.iter().map(|v| v.n_categories() - 1).sum();
    let mut out = DMatrix::zeros(a.nrows(), cols);
    let mut off = 0;
    for v in &model.variables {
        let block = a * v.slopes().transpose();
        for r in 0..v.intercepts().len() {
            for i in 0..a.nrows() {
                out[(i, off + r)] = v.intercepts()[r] + block[(i, r)];
            }
        }
        off += v.intercepts().len();
    }
    LogOddsMatrix { values: out }
}

/// `L_j`: log-likelihood contribution of variable `j` given row scores.
pub fn variable_log_likelihood(
    g_j: DMatrixView<'_, f64>,
    scores: &ScoreMatrix,
    params: &VariableParams,
) -> f64 {
    let a = scores.as_matrix();
    let mut point = vec![0.0; a.ncols()];
    let mut total = 0.0;
    for i in 0..a.nrows() {
        point.iter_mut().zip(a.row(i).iter()).for_each(|(p, &x)| *p = x);
        let lp = log_softmax(&params.linear_predictor(&point));
        for (k, &l) in lp.iter().enumerate() {
            let g = g_j[(i, k)];
            if g != 0.0 {
                total += g * l;
            }
        }
    }
    total
}

/// `L_j - lambda (||b_j0||^2 + ||B_j||^2)`.
pub fn penalized_variable_log_likelihood(
    g_j: DMatrixView<'_, f64>,
    scores: &ScoreMatrix,
    params: &VariableParams,
    lambda: f64,
) -> f64 {
    variable_log_likelihood(g_j, scores, params) - lambda * params.squared_norm()
}

/// Joint log-likelihood of the indicator matrix at the model's own scores.
pub fn joint_log_likelihood(g: &IndicatorMatrix, model: &BiplotModel) -> f64 {
    model
        .variables
        .iter()
        .enumerate()
        .map(|(j, v)| variable_log_likelihood(g.block(j), &model.scores, v))
        .sum()
}
