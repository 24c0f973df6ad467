//! Recovery of Voronoi generators ("category points") from a prediction
//! tessellation.
//!
//! Adjacent regions `l` and `m` of a Voronoi diagram have generators that
//! are mirror images through their common edge: the segment joining them is
//! perpendicular to the edge (slope rows, `B x = 0`) and its midpoint lies
//! on the edge (distance rows, `A x = b`). The unknowns are
//! `x = [x_1, y_1, ..., x_n, y_n]` over the visible categories.
//!
//! The system has a null space whenever the generators are not pinned down
//! by the diagram (a three-region fan admits a one-parameter family). Every
//! solver returns the solution closest to a reference configuration made of
//! the region centroids, which keeps generators apart and on the correct
//! side of each edge.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::InversionError;
use crate::geometry::{Point, PredictionTessellation};
use crate::linalg::{right_singular_basis, thin_svd};

/// Condition estimate above which the solve is damped.
pub const CONDITION_LIMIT: f64 = 1e12;
/// Tikhonov damping, relative to the largest squared singular value.
pub const DAMPING: f64 = 1e-8;
/// Allowed residual of the constraint rows before they count as inconsistent.
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// Which least-squares formulation to solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Algorithm {
    /// Minimize `||[A; B] x - [b; 0]||^2`.
    #[default]
    Combined,
    /// Minimize `||B x||^2` subject to `A x = b`.
    SlopeGivenDistance,
    /// Minimize `||A x - b||^2` subject to `B x = 0`.
    DistanceGivenSlope,
}

impl Algorithm {
    pub fn number(self) -> u8 {
        match self {
            Algorithm::Combined => 1,
            Algorithm::SlopeGivenDistance => 2,
            Algorithm::DistanceGivenSlope => 3,
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(Algorithm::Combined),
            2 => Some(Algorithm::SlopeGivenDistance),
            3 => Some(Algorithm::DistanceGivenSlope),
            _ => None,
        }
    }

    pub const ALL: [Algorithm; 3] = [Algorithm::Combined, Algorithm::SlopeGivenDistance, Algorithm::DistanceGivenSlope];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeMeta {
    /// Regions on either side, as category indices.
    pub pair: (usize, usize),
    /// Unit-normal line coefficients `(alpha, beta, gamma)`.
    pub coeffs: [f64; 3],
    pub slope_intercept: Option<(f64, f64)>,
}

/// The slope and distance equations of a tessellation.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeDistanceSystem {
    pub variable: usize,
    /// Visible categories in unknown order.
    pub categories: Vec<usize>,
    /// `B`, one row per edge.
    pub slope_rows: DMatrix<f64>,
    /// `A`, one row per edge.
    pub distance_rows: DMatrix<f64>,
    /// `b`.
    pub distance_rhs: DVector<f64>,
    /// Reference configuration the minimum-norm solution is taken about.
    pub reference: DVector<f64>,
    pub edge_meta: Vec<EdgeMeta>,
}

impl SlopeDistanceSystem {
    pub fn n_edges(&self) -> usize {
        self.distance_rows.nrows()
    }

    pub fn n_unknowns(&self) -> usize {
        2 * self.categories.len()
    }

    /// `[A; B]` and `[b; 0]`.
    pub fn stacked(&self) -> (DMatrix<f64>, DVector<f64>) {
        let k = self.n_edges();
        let n = self.n_unknowns();
        let mut m = DMatrix::zeros(2 * k, n);
        m.rows_mut(0, k).copy_from(&self.distance_rows);
        m.rows_mut(k, k).copy_from(&self.slope_rows);
        let mut r = DVector::zeros(2 * k);
        r.rows_mut(0, k).copy_from(&self.distance_rhs);
        (m, r)
    }

    /// `||[A; B] x - [b; 0]||`.
    pub fn residual(&self, x: &DVector<f64>) -> f64 {
        let (m, r) = self.stacked();
        (m * x - r).norm()
    }
}

/// Builds the slope/distance system from the tessellation's inter-category
/// edges. Box-clipping sides carry no equations.
pub fn assemble_system(tess: &PredictionTessellation) -> Result<SlopeDistanceSystem, InversionError> {
    let categories = tess.visible();
    let index = |c: usize| categories.iter().position(|&v| v == c);
    let edges: Vec<_> = tess
        .edges
        .iter()
        .filter_map(|e| Some((e, index(e.pair.0)?, index(e.pair.1)?)))
        .collect();
    if categories.len() < 2 || edges.is_empty() {
        return Err(InversionError::NoInteriorEdges);
    }
    let k = edges.len();
    let n = 2 * categories.len();
    let mut slope = DMatrix::zeros(k, n);
    let mut dist = DMatrix::zeros(k, n);
    let mut rhs = DVector::zeros(k);
    let mut meta = Vec::with_capacity(k);
    for (row, (edge, l, m)) in edges.iter().enumerate() {
        let line = &tess.lines[edge.line];
        let [a0, b0, g0] = line.coeffs;
        let norm = a0.hypot(b0);
        let (a, b, g) = (a0 / norm, b0 / norm, g0 / norm);
        // perpendicular: b (x_l - x_m) - a (y_l - y_m) = 0
        slope[(row, 2 * l)] = b;
        slope[(row, 2 * m)] = -b;
        slope[(row, 2 * l + 1)] = -a;
        slope[(row, 2 * m + 1)] = a;
        // midpoint on the edge: a (x_l + x_m) + b (y_l + y_m) = 2 g
        dist[(row, 2 * l)] = a;
        dist[(row, 2 * m)] = a;
        dist[(row, 2 * l + 1)] = b;
        dist[(row, 2 * m + 1)] = b;
        rhs[row] = 2.0 * g;
        meta.push(EdgeMeta {
            pair: edge.pair,
            coeffs: [a, b, g],
            slope_intercept: line.slope_intercept,
        });
    }

    let mut reference = DVector::zeros(n);
    let fallback = tess.bbox.center();
    for (i, &c) in categories.iter().enumerate() {
        let p = tess
            .region(c)
            .and_then(|r| r.centroid())
            .or_else(|| {
                let pts: Vec<Point> = tess.real_vertices().filter(|v| v.contains(c)).map(|v| v.coords).collect();
                (!pts.is_empty()).then(|| {
                    let s = pts.iter().fold([0.0, 0.0], |acc, p| [acc[0] + p[0], acc[1] + p[1]]);
                    [s[0] / pts.len() as f64, s[1] / pts.len() as f64]
                })
            })
            .unwrap_or(fallback);
        reference[2 * i] = p[0];
        reference[2 * i + 1] = p[1];
    }

    Ok(SlopeDistanceSystem {
        variable: tess.variable,
        categories,
        slope_rows: slope,
        distance_rows: dist,
        distance_rhs: rhs,
        reference,
        edge_meta: meta,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InversionWarning {
    /// The least-squares matrix was ill conditioned and the solve damped.
    IllConditioned { condition: f64 },
}

/// Recovered generators of one variable's visible categories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryPoints {
    pub variable: usize,
    pub categories: Vec<usize>,
    pub points: Vec<Point>,
    pub algorithm: Algorithm,
    /// Grid agreement with the tessellation, once measured.
    pub fit_score: Option<f64>,
    /// `||[A; B] x - [b; 0]||` of the solution.
    pub residual: f64,
    pub rhs_norm: f64,
    pub warnings: Vec<InversionWarning>,
}

impl CategoryPoints {
    pub fn point(&self, category: usize) -> Option<Point> {
        self.categories.iter().position(|&c| c == category).map(|i| self.points[i])
    }
}

/// Minimum-norm least squares solution of `m z = r` through a thin SVD,
/// damped when the retained spectrum is ill conditioned.
struct LstsqOutcome {
    z: DVector<f64>,
    condition: f64,
    damped: bool,
}

fn min_norm_lstsq(m: &DMatrix<f64>, r: &DVector<f64>) -> LstsqOutcome {
    if m.ncols() == 0 {
        return LstsqOutcome {
            z: DVector::zeros(0),
            condition: 1.0,
            damped: false,
        };
    }
    let svd = thin_svd(m);
    let (u, v) = (&svd.u, &svd.v);
    let sig = &svd.singular_values;
    let smax = sig.iter().copied().fold(0.0, f64::max);
    let tol = smax * f64::EPSILON * (m.nrows().max(m.ncols()) as f64) * 4.0;
    let smin = sig.iter().copied().filter(|&s| s > tol).fold(f64::INFINITY, f64::min);
    let condition = if smin.is_finite() && smin > 0.0 { smax / smin } else { 1.0 };
    let damped = condition > CONDITION_LIMIT;
    let mu = DAMPING * smax * smax;
    let ut_r = u.transpose() * r;
    let mut coef = DVector::zeros(sig.len());
    for i in 0..sig.len() {
        let s = sig[i];
        coef[i] = if damped {
            s / (s * s + mu) * ut_r[i]
        } else if s > tol {
            ut_r[i] / s
        } else {
            0.0
        };
    }
    LstsqOutcome {
        z: v * coef,
        condition,
        damped,
    }
}

/// Orthonormal basis of the null space of `c` (columns).
fn null_space(c: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let n = c.ncols();
    let (sig, v) = right_singular_basis(c);
    let smax = sig.iter().copied().fold(0.0, f64::max);
    let tol = smax * f64::EPSILON * (c.nrows().max(n) as f64) * 4.0;
    let rank = sig.iter().filter(|&&s| s > tol).count();
    let basis = v.columns(rank, n - rank).into_owned();
    (basis, rank)
}

/// Solves the system with one of the three formulations.
pub fn solve_generators(sys: &SlopeDistanceSystem, algorithm: Algorithm) -> Result<CategoryPoints, InversionError> {
    let x0 = &sys.reference;
    let mut warnings = Vec::new();
    let mut note = |o: &LstsqOutcome| {
        if o.damped {
            warnings.push(InversionWarning::IllConditioned { condition: o.condition });
        }
    };
    let delta = match algorithm {
        Algorithm::Combined => {
            let (m, r) = sys.stacked();
            let out = min_norm_lstsq(&m, &(r - &m * x0));
            note(&out);
            out.z
        }
        Algorithm::SlopeGivenDistance | Algorithm::DistanceGivenSlope => {
            let zero = DVector::zeros(sys.n_edges());
            let (c, d, e, f) = if algorithm == Algorithm::SlopeGivenDistance {
                (&sys.distance_rows, &sys.distance_rhs, &sys.slope_rows, &zero)
            } else {
                (&sys.slope_rows, &zero, &sys.distance_rows, &sys.distance_rhs)
            };
            let d_dev = d - c * x0;
            let part = min_norm_lstsq(c, &d_dev);
            note(&part);
            let residual = (c * &part.z - &d_dev).norm();
            if residual > FEASIBILITY_TOL * d.norm().max(1.0) {
                return Err(InversionError::InfeasibleConstraints { residual });
            }
            let (basis, _) = null_space(c);
            if basis.ncols() == 0 {
                part.z
            } else {
                let f_dev = f - e * x0 - e * &part.z;
                let en = e * &basis;
                let out = min_norm_lstsq(&en, &f_dev);
                note(&out);
                &part.z + &basis * out.z
            }
        }
    };
    let x = x0 + delta;
    let points = (0..sys.categories.len()).map(|i| [x[2 * i], x[2 * i + 1]]).collect();
    Ok(CategoryPoints {
        variable: sys.variable,
        categories: sys.categories.clone(),
        points,
        algorithm,
        fit_score: None,
        residual: sys.residual(&x),
        rhs_norm: sys.distance_rhs.norm(),
        warnings,
    })
}

/// Nearest category point, lowest category index on ties.
pub fn voronoi_predict(pts: &CategoryPoints, point: Point) -> usize {
    let mut order: Vec<usize> = (0..pts.categories.len()).collect();
    order.sort_by_key(|&i| pts.categories[i]);
    let dist = |i: usize| {
        let p = pts.points[i];
        (p[0] - point[0]).powi(2) + (p[1] - point[1]).powi(2)
    };
    let mut best = order[0];
    for &i in &order[1..] {
        if dist(i) < dist(best) {
            best = i;
        }
    }
    pts.categories[best]
}

/// Fraction of `grid_n x grid_n` box points whose nearest category point is
/// the tessellation's most probable category. Points closer than
/// `1e-6 * diagonal` to a region boundary are skipped.
pub fn diagram_agreement(tess: &PredictionTessellation, pts: &CategoryPoints, grid_n: usize) -> f64 {
    let band = 1e-6 * tess.bbox.diagonal();
    let (mut hit, mut total) = (0usize, 0usize);
    for p in tess.bbox.grid(grid_n) {
        let (best, margin) = tess.predictor.argmax_with_margin(p);
        if margin < band {
            continue;
        }
        total += 1;
        if voronoi_predict(pts, p) == best {
            hit += 1;
        }
    }
    if total == 0 {
        return 0.0;
    }
    hit as f64 / total as f64
}

/// Assembles, solves and scores in one call.
pub fn invert_tessellation(
    tess: &PredictionTessellation,
    algorithm: Algorithm,
    grid_n: usize,
) -> Result<CategoryPoints, InversionError> {
    let sys = assemble_system(tess)?;
    let mut pts = solve_generators(&sys, algorithm)?;
    pts.fit_score = Some(diagram_agreement(tess, &pts, grid_n));
    Ok(pts)
}
