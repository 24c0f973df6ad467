//! Marginal estimation of the biplot: Gauss-Hermite product quadrature,
//! expected a posteriori row scores and the EM loop that alternates them
//! with per-variable ridge regressions.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::data::{indicator_of, IndicatorMatrix, NominalDataset, ScoreMatrix};
use crate::error::FitError;
use crate::linalg::thin_svd;
use crate::model::{log_softmax, Baseline, BiplotModel, FitDiagnostics, VariableParams};
use crate::mstep::{fit_variable, RidgeConfig};

/// Product Gauss-Hermite rule for the standard `S`-variate normal.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    /// `Q^S x S`, row `q` is node `y_q`.
    nodes: DMatrix<f64>,
    weights: Vec<f64>,
    nodes_per_dim: usize,
}

impl QuadratureGrid {
    pub fn nodes(&self) -> &DMatrix<f64> {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.nodes.ncols()
    }

    pub fn nodes_per_dim(&self) -> usize {
        self.nodes_per_dim
    }

    pub fn node(&self, q: usize) -> Vec<f64> {
        self.nodes.row(q).iter().copied().collect()
    }
}

/// One-dimensional Gauss-Hermite nodes and weights for the standard normal
/// density.
///
/// Nodes start from the eigenvalues of the Jacobi matrix and are polished by
/// Newton steps on the orthonormal Hermite polynomial of degree `q`; weights
/// are the Christoffel numbers.
pub fn gauss_hermite_1d(q: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(q >= 1);
    let jacobi = DMatrix::from_fn(q, q, |r, c| {
        if r + 1 == c {
            (c as f64).sqrt()
        } else if c + 1 == r {
            (r as f64).sqrt()
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());

    // Orthonormal polynomials p_0..p_q at x.
    let eval = |x: f64| {
        let mut p = vec![0.0; q + 1];
        p[0] = 1.0;
        if q >= 1 {
            p[1] = x;
        }
        for n in 2..=q {
            p[n] = (x * p[n - 1] - ((n - 1) as f64).sqrt() * p[n - 2]) / (n as f64).sqrt();
        }
        p
    };
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let p = eval(*x);
            let deriv = (q as f64).sqrt() * p[q - 1];
            if deriv != 0.0 {
                *x -= p[q] / deriv;
            }
        }
    }
    // Enforce exact symmetry about zero.
    for i in 0..q / 2 {
        let m = 0.5 * (nodes[q - 1 - i] - nodes[i]);
        nodes[i] = -m;
        nodes[q - 1 - i] = m;
    }
    if q % 2 == 1 {
        nodes[q / 2] = 0.0;
    }
    let mut weights: Vec<f64> = nodes
        .iter()
        .map(|&x| 1.0 / eval(x)[..q].iter().map(|v| v * v).sum::<f64>())
        .collect();
    for i in 0..q / 2 {
        let w = 0.5 * (weights[i] + weights[q - 1 - i]);
        weights[i] = w;
        weights[q - 1 - i] = w;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    (nodes, weights)
}

/// Full Cartesian product of `dims` copies of the `nodes`-point rule; the
/// last dimension varies fastest.
pub fn gauss_hermite_grid(dims: usize, nodes: usize) -> Result<QuadratureGrid, FitError> {
    if dims < 1 || nodes < 2 {
        return Err(FitError::InvalidConfig(format!(
            "quadrature needs S >= 1 and Q >= 2, got S={dims}, Q={nodes}"
        )));
    }
    let (x, w) = gauss_hermite_1d(nodes);
    let total = nodes.pow(dims as u32);
    let mut grid = DMatrix::zeros(total, dims);
    let mut weights = vec![1.0; total];
    for q in 0..total {
        let mut rest = q;
        for s in (0..dims).rev() {
            let idx = rest % nodes;
            rest /= nodes;
            grid[(q, s)] = x[idx];
            weights[q] *= w[idx];
        }
    }
    let sum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|v| *v /= sum);
    Ok(QuadratureGrid {
        nodes: grid,
        weights,
        nodes_per_dim: nodes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub dims: usize,
    pub nodes: usize,
    pub max_em_iters: usize,
    pub loglik_tol: f64,
    pub ridge: RidgeConfig,
    pub baseline: Baseline,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            dims: 2,
            nodes: 15,
            max_em_iters: 100,
            loglik_tol: 1e-6,
            ridge: RidgeConfig::default(),
            baseline: Baseline::Last,
            seed: 0,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<(), FitError> {
        if self.dims < 1 {
            return Err(FitError::InvalidConfig("at least one latent dimension is required".into()));
        }
        if self.nodes < 2 {
            return Err(FitError::InvalidConfig("at least two quadrature nodes are required".into()));
        }
        if !(self.loglik_tol > 0.0) {
            return Err(FitError::InvalidConfig("EM tolerance must be positive".into()));
        }
        self.ridge.validate()
    }
}

/// `ln M_l(g_i | y)`: log-likelihood of one response row at a latent point.
pub fn pattern_log_likelihood(g_i: &[f64], block_sizes: &[usize], params: &[VariableParams], point: &[f64]) -> f64 {
    let mut off = 0;
    let mut total = 0.0;
    for (v, &k) in params.iter().zip(block_sizes) {
        let lp = log_softmax(&v.linear_predictor(point));
        for c in 0..k {
            let g = g_i[off + c];
            if g != 0.0 {
                total += g * lp[c];
            }
        }
        off += k;
    }
    total
}

/// `M_l(g_i | y)`, the likelihood of one response row at a latent point.
pub fn pattern_likelihood(g_i: &[f64], block_sizes: &[usize], params: &[VariableParams], point: &[f64]) -> f64 {
    pattern_log_likelihood(g_i, block_sizes, params, point).exp()
}

/// Distinct response rows of `G` and, for each row, the index of its pattern.
struct Patterns {
    rows: Vec<Vec<f64>>,
    row_pattern: Vec<usize>,
}

fn patterns(g: &IndicatorMatrix) -> Patterns {
    let mut index: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
    let mut rows = Vec::new();
    let mut row_pattern = Vec::with_capacity(g.n_rows());
    for i in 0..g.n_rows() {
        let row: Vec<f64> = g.values().row(i).iter().copied().collect();
        let key: Vec<u64> = row.iter().map(|x| x.to_bits()).collect();
        let idx = *index.entry(key).or_insert_with(|| {
            rows.push(row);
            rows.len() - 1
        });
        row_pattern.push(idx);
    }
    Patterns { rows, row_pattern }
}

/// `ln M_l(y_q)` for every distinct pattern and node.
fn pattern_node_loglik(g: &IndicatorMatrix, params: &[VariableParams], grid: &QuadratureGrid, pats: &Patterns) -> DMatrix<f64> {
    let n_nodes = grid.len();
    // log-probabilities of each category at each node, per variable
    let logp: Vec<Vec<Vec<f64>>> = params
        .iter()
        .map(|v| (0..n_nodes).map(|q| log_softmax(&v.linear_predictor(&grid.node(q)))).collect())
        .collect();
    let sizes = g.block_sizes();
    DMatrix::from_fn(pats.rows.len(), n_nodes, |p, q| {
        let row = &pats.rows[p];
        let mut off = 0;
        let mut total = 0.0;
        for (j, &k) in sizes.iter().enumerate() {
            for c in 0..k {
                let w = row[off + c];
                if w != 0.0 {
                    total += w * logp[j][q][c];
                }
            }
            off += k;
        }
        total
    })
}

fn check_dims(params: &[VariableParams], grid: &QuadratureGrid, g: &IndicatorMatrix) {
    assert_eq!(params.len(), g.n_vars(), "one parameter block per variable");
    assert!(params.iter().all(|v| v.dims() == grid.dims()), "parameters and grid disagree on S");
}

/// Quadrature approximation of the marginal log-likelihood
/// `sum_i ln sum_q w_q M_i(y_q)`.
pub fn marginal_log_likelihood(g: &IndicatorMatrix, params: &[VariableParams], grid: &QuadratureGrid) -> f64 {
    check_dims(params, grid, g);
    let pats = patterns(g);
    let ll = pattern_node_loglik(g, params, grid, &pats);
    let logw: Vec<f64> = grid.weights().iter().map(|w| w.ln()).collect();
    let per_pattern: Vec<f64> = (0..pats.rows.len())
        .map(|p| {
            let terms: Vec<f64> = (0..grid.len()).map(|q| ll[(p, q)] + logw[q]).collect();
            log_sum_exp(&terms)
        })
        .collect();
    pats.row_pattern.iter().map(|&p| per_pattern[p]).sum()
}

/// Marginal log-likelihood minus the ridge penalty of every variable.
pub fn penalized_marginal_log_likelihood(
    g: &IndicatorMatrix,
    params: &[VariableParams],
    grid: &QuadratureGrid,
    lambda: f64,
) -> f64 {
    marginal_log_likelihood(g, params, grid) - lambda * params.iter().map(VariableParams::squared_norm).sum::<f64>()
}

/// Expected a posteriori row scores under the standard normal prior.
pub fn eap_scores(g: &IndicatorMatrix, params: &[VariableParams], grid: &QuadratureGrid) -> ScoreMatrix {
    check_dims(params, grid, g);
    let pats = patterns(g);
    let ll = pattern_node_loglik(g, params, grid, &pats);
    let s = grid.dims();
    let logw: Vec<f64> = grid.weights().iter().map(|w| w.ln()).collect();
    let means: Vec<Vec<f64>> = (0..pats.rows.len())
        .map(|p| {
            let terms: Vec<f64> = (0..grid.len()).map(|q| ll[(p, q)] + logw[q]).collect();
            let lse = log_sum_exp(&terms);
            let mut m = vec![0.0; s];
            for (q, t) in terms.iter().enumerate() {
                let post = (t - lse).exp();
                for (d, md) in m.iter_mut().enumerate() {
                    *md += post * grid.nodes()[(q, d)];
                }
            }
            m
        })
        .collect();
    ScoreMatrix::new(DMatrix::from_fn(g.n_rows(), s, |i, d| means[pats.row_pattern[i]][d]))
}

/// EAP scores of `rows` placed on the standardized scale of `train`.
///
/// For `rows == train` this reproduces the scores returned by [`fit_em`].
pub fn eap_scores_on_training_scale(
    train: &IndicatorMatrix,
    rows: &IndicatorMatrix,
    params: &[VariableParams],
    grid: &QuadratureGrid,
) -> ScoreMatrix {
    assert_eq!(train.block_sizes(), rows.block_sizes(), "indicator layouts differ");
    let moments = eap_scores(train, params, grid).column_moments();
    let mut out = eap_scores(rows, params, grid);
    out.apply_standardization(&moments);
    out
}

/// First `dims` principal coordinates of the column-centered indicator
/// matrix, standardized.
pub fn principal_coordinate_scores(g: &IndicatorMatrix, dims: usize) -> Result<ScoreMatrix, FitError> {
    let values = g.values();
    let n = values.nrows();
    let means = values.row_mean();
    let centered = DMatrix::from_fn(n, values.ncols(), |i, c| values[(i, c)] - means[c]);
    let svd = thin_svd(&centered);
    let u = &svd.u;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let top = order.first().map_or(0.0, |&k| svd.singular_values[k]);
    let tol = top * 1e-10 * (n.max(values.ncols()) as f64);
    let available = order.iter().filter(|&&k| svd.singular_values[k] > tol).count();
    if top <= 0.0 || available < dims {
        return Err(FitError::RankDeficient {
            requested: dims,
            available,
        });
    }
    let mut scores = DMatrix::zeros(n, dims);
    for (d, &k) in order.iter().take(dims).enumerate() {
        let sigma = svd.singular_values[k];
        let col = u.column(k);
        // Sign convention: the largest-magnitude entry (first on ties) is positive.
        let pivot = (0..n).fold(0, |best, i| if col[i].abs() > col[best].abs() + 1e-12 { i } else { best });
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            scores[(i, d)] = sign * sigma * col[i];
        }
    }
    Ok(ScoreMatrix::new(scores).standardized())
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Fits every variable on fixed scores (the regression step).
pub fn fit_all_variables(
    g: &IndicatorMatrix,
    scores: &ScoreMatrix,
    ridge: &RidgeConfig,
    baseline: Baseline,
) -> Result<Vec<VariableParams>, FitError> {
    (0..g.n_vars())
        .map(|j| fit_variable(g.block(j), scores, ridge, baseline))
        .collect()
}

/// Step-halving limit when a regression step lowers the marginal objective.
const EM_STEP_HALVING: usize = 10;

fn blend(old: &[VariableParams], new: &[VariableParams], t: f64) -> Vec<VariableParams> {
    old.iter()
        .zip(new)
        .map(|(o, n)| {
            let a = o.to_flat();
            let b = n.to_flat();
            let mixed: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + t * (y - x)).collect();
            VariableParams::from_flat(&mixed, o.n_categories(), o.dims(), o.baseline())
        })
        .collect()
}

/// Estimates the full model.
///
/// Scores start at the principal coordinates of `G`. Each iteration computes
/// standardized EAP scores from the current parameters and refits every
/// variable on them. A refit that lowers the penalized marginal
/// log-likelihood is shortened by halving towards the previous parameters;
/// if no shortened step ascends, the iteration stops. The loop ends when the
/// objective gains less than `loglik_tol`.
///
/// A failing regression step after the first iteration ends the loop with
/// `converged = false` and the last good iterate.
pub fn fit_em(dataset: &NominalDataset, cfg: &EmConfig) -> Result<BiplotModel, FitError> {
    cfg.validate()?;
    let g = indicator_of(dataset);
    let grid = gauss_hermite_grid(cfg.dims, cfg.nodes)?;
    let lambda = cfg.ridge.lambda;
    let objective = |p: &[VariableParams]| penalized_marginal_log_likelihood(&g, p, &grid, lambda);

    let initial = principal_coordinate_scores(&g, cfg.dims)?;
    let mut params = fit_all_variables(&g, &initial, &cfg.ridge, cfg.baseline)?;
    let mut current = objective(&params);
    let mut trace = vec![current];
    let mut converged = false;
    let mut message = None;
    let mut iterations = 0;

    while iterations < cfg.max_em_iters {
        iterations += 1;
        let scores = eap_scores(&g, &params, &grid).standardized();
        let refit = match fit_all_variables(&g, &scores, &cfg.ridge, cfg.baseline) {
            Ok(p) => p,
            Err(e) => {
                message = Some(format!("regression step failed at iteration {iterations}: {e}"));
                break;
            }
        };
        let mut candidate = refit.clone();
        let mut value = objective(&candidate);
        let mut t = 1.0;
        let mut halvings = 0;
        while value < current && halvings < EM_STEP_HALVING {
            t *= 0.5;
            halvings += 1;
            candidate = blend(&params, &refit, t);
            value = objective(&candidate);
        }
        if value < current {
            converged = true;
            message = Some(format!("no ascent from the regression step at iteration {iterations}"));
            break;
        }
        let gain = value - current;
        params = candidate;
        current = value;
        trace.push(current);
        if gain < cfg.loglik_tol {
            converged = true;
            break;
        }
    }
    if !converged && message.is_none() {
        message = Some(format!("EM stopped after {} iterations without meeting the tolerance", cfg.max_em_iters));
    }

    let scores = eap_scores(&g, &params, &grid).standardized();
    Ok(BiplotModel {
        variables: params,
        scores,
        ridge: cfg.ridge,
        diagnostics: FitDiagnostics {
            penalized_loglik: current,
            iterations,
            converged,
            trace,
            message,
        },
    })
}
