//! Prediction tessellations of a fitted variable on a two-dimensional
//! display plane.
//!
//! On the plane the linear predictor of category `k` is
//! `c_k + u_k a1 + v_k a2` (zero for the baseline). Categories `k` and `l`
//! are equally probable on the line `E_kl`, three such lines with a common
//! category meet at a candidate vertex `P_klm`, and a vertex is real when
//! one of its three categories is the most probable there. Edges of the
//! tessellation join real vertices along their shared line; a real vertex
//! paired with virtual ones emits a ray.

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;
use crate::model::{softmax, VariableParams};

pub type Point = [f64; 2];

/// Probability tie tolerance for real/virtual classification.
pub const TIE_TOLERANCE: f64 = 1e-9;
/// Below this `|beta|` an edge line is treated as vertical.
pub const VERTICAL_EPS: f64 = 1e-12;
/// Relative determinant below which two edge lines count as parallel.
pub const PARALLEL_EPS: f64 = 1e-12;

/// Axis-aligned display window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: Point,
    pub max: Point,
}

impl BoundingBox {
    pub fn new(min: Point, max: Point) -> Self {
        Self { min, max }
    }

    /// Extent of `points`, each half-width scaled by `1 + inflate`.
    pub fn around<'a>(points: impl IntoIterator<Item = &'a Point>, inflate: f64) -> Option<Self> {
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        for p in points {
            for d in 0..2 {
                min[d] = min[d].min(p[d]);
                max[d] = max[d].max(p[d]);
            }
        }
        if !(min[0].is_finite() && min[1].is_finite()) {
            return None;
        }
        let mut b = Self { min, max };
        for d in 0..2 {
            let c = 0.5 * (b.min[d] + b.max[d]);
            let half = (0.5 * (b.max[d] - b.min[d])).max(1e-6) * (1.0 + inflate);
            b.min[d] = c - half;
            b.max[d] = c + half;
        }
        Some(b)
    }

    pub fn is_valid(&self) -> bool {
        self.min.iter().chain(&self.max).all(|x| x.is_finite())
            && self.max[0] > self.min[0]
            && self.max[1] > self.min[1]
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> Point {
        [0.5 * (self.min[0] + self.max[0]), 0.5 * (self.min[1] + self.max[1])]
    }

    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.min[0] && p[0] <= self.max[0] && p[1] >= self.min[1] && p[1] <= self.max[1]
    }

    /// Corners counter-clockwise from the lower left.
    pub fn corners(&self) -> [Point; 4] {
        [
            [self.min[0], self.min[1]],
            [self.max[0], self.min[1]],
            [self.max[0], self.max[1]],
            [self.min[0], self.max[1]],
        ]
    }

    /// Corners followed by side midpoints.
    pub fn probe_points(&self) -> Vec<Point> {
        let c = self.corners();
        let mut out = c.to_vec();
        for i in 0..4 {
            let (a, b) = (c[i], c[(i + 1) % 4]);
            out.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
        }
        out
    }

    /// Centers of an `n x n` grid of equal cells.
    pub fn grid(&self, n: usize) -> impl Iterator<Item = Point> + '_ {
        let (w, h) = (self.width() / n as f64, self.height() / n as f64);
        (0..n).flat_map(move |r| (0..n).map(move |c| [self.min[0] + (c as f64 + 0.5) * w, self.min[1] + (r as f64 + 0.5) * h]))
    }

    /// Parameter interval of `origin + t * dir` inside the box (Liang-Barsky).
    fn clip_line(&self, origin: Point, dir: Point, mut t0: f64, mut t1: f64) -> Option<(f64, f64)> {
        for d in 0..2 {
            if dir[d].abs() < 1e-300 {
                if origin[d] < self.min[d] || origin[d] > self.max[d] {
                    return None;
                }
            } else {
                let a = (self.min[d] - origin[d]) / dir[d];
                let b = (self.max[d] - origin[d]) / dir[d];
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                t0 = t0.max(lo);
                t1 = t1.min(hi);
            }
        }
        (t1 > t0).then_some((t0, t1))
    }
}

/// Full linear predictor of every category restricted to a display plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarPredictor {
    /// `(c_k, u_k, v_k)` per category.
    pub rows: Vec<[f64; 3]>,
}

impl PlanarPredictor {
    /// Restricts `params` to latent dimensions `plane`; other dimensions are
    /// held at zero.
    pub fn from_params(params: &VariableParams, plane: (usize, usize)) -> Result<Self, GeometryError> {
        let s = params.dims();
        if plane.0 == plane.1 || plane.0 >= s || plane.1 >= s {
            return Err(GeometryError::BadPlane { plane, dims: s });
        }
        let rows = (0..params.n_categories())
            .map(|k| [params.intercept(k), params.slope(k, plane.0), params.slope(k, plane.1)])
            .collect();
        Ok(Self { rows })
    }

    pub fn n_categories(&self) -> usize {
        self.rows.len()
    }

    pub fn eta(&self, p: Point) -> Vec<f64> {
        self.rows.iter().map(|r| r[0] + r[1] * p[0] + r[2] * p[1]).collect()
    }

    pub fn probabilities(&self, p: Point) -> Vec<f64> {
        softmax(&self.eta(p))
    }

    /// Most probable category, lowest index on ties.
    pub fn argmax(&self, p: Point) -> usize {
        argmax_lowest(&self.eta(p))
    }

    /// Most probable category and the distance from `p` to the line on which
    /// it ties with the runner-up.
    pub fn argmax_with_margin(&self, p: Point) -> (usize, f64) {
        let eta = self.eta(p);
        let best = argmax_lowest(&eta);
        let mut margin = f64::INFINITY;
        for (l, &e) in eta.iter().enumerate() {
            if l == best {
                continue;
            }
            let (a, b) = (self.rows[best][1] - self.rows[l][1], self.rows[best][2] - self.rows[l][2]);
            let norm = a.hypot(b);
            let d = if norm > 0.0 { (eta[best] - e) / norm } else { f64::INFINITY };
            margin = margin.min(d);
        }
        (best, margin)
    }
}

pub(crate) fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = k;
        }
    }
    best
}

/// Most probable category of `params` at a latent point, lowest index on ties.
pub fn predict_category(params: &VariableParams, point: &[f64]) -> usize {
    argmax_lowest(&params.linear_predictor(point))
}

/// Equal-probability line `alpha a1 + beta a2 = gamma` of a category pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeLine {
    pub pair: (usize, usize),
    pub coeffs: [f64; 3],
    /// `(slope, intercept)` of `a2 = s a1 + b`, absent for vertical lines.
    pub slope_intercept: Option<(f64, f64)>,
}

impl EdgeLine {
    fn new(pair: (usize, usize), alpha: f64, beta: f64, gamma: f64) -> Self {
        let slope_intercept = (beta.abs() > VERTICAL_EPS).then(|| (-alpha / beta, gamma / beta));
        Self {
            pair,
            coeffs: [alpha, beta, gamma],
            slope_intercept,
        }
    }

    pub fn normal(&self) -> Point {
        [self.coeffs[0], self.coeffs[1]]
    }

    /// Unit direction along the line.
    pub fn direction(&self) -> Point {
        let n = self.coeffs[0].hypot(self.coeffs[1]);
        [-self.coeffs[1] / n, self.coeffs[0] / n]
    }

    /// Point of the line closest to `p`.
    pub fn project(&self, p: Point) -> Point {
        let [a, b, g] = self.coeffs;
        let n2 = a * a + b * b;
        let t = (a * p[0] + b * p[1] - g) / n2;
        [p[0] - t * a, p[1] - t * b]
    }

    /// Signed residual divided by the normal length (a distance).
    pub fn distance(&self, p: Point) -> f64 {
        let [a, b, g] = self.coeffs;
        (a * p[0] + b * p[1] - g) / a.hypot(b)
    }

    pub fn contains(&self, k: usize) -> bool {
        self.pair.0 == k || self.pair.1 == k
    }
}

/// Diagnostic notes for degenerate configurations that do not abort a build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeometryNote {
    /// The pair's slopes coincide on the plane, so one category dominates
    /// the other everywhere and no line exists.
    ParallelPair { pair: (usize, usize) },
    /// Two lines of the triple are (nearly) parallel; no vertex.
    NearParallel { triple: (usize, usize, usize) },
}

/// The `C(K, 2)` equal-probability lines of a variable.
pub fn equal_probability_lines(pred: &PlanarPredictor) -> Result<Vec<EdgeLine>, GeometryError> {
    Ok(lines_with_notes(pred)?.0)
}

fn lines_with_notes(pred: &PlanarPredictor) -> Result<(Vec<EdgeLine>, Vec<GeometryNote>), GeometryError> {
    let k = pred.n_categories();
    let scale = pred
        .rows
        .iter()
        .flat_map(|r| r.iter())
        .fold(1.0f64, |m, x| m.max(x.abs()));
    let mut lines = Vec::new();
    let mut notes = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            let (ra, rb) = (pred.rows[a], pred.rows[b]);
            let alpha = ra[1] - rb[1];
            let beta = ra[2] - rb[2];
            let gamma = rb[0] - ra[0];
            if alpha.abs() <= VERTICAL_EPS * scale && beta.abs() <= VERTICAL_EPS * scale {
                if gamma.abs() <= VERTICAL_EPS * scale {
                    return Err(GeometryError::DegeneratePair(a, b));
                }
                notes.push(GeometryNote::ParallelPair { pair: (a, b) });
                continue;
            }
            lines.push(EdgeLine::new((a, b), alpha, beta, gamma));
        }
    }
    Ok((lines, notes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VertexStatus {
    Real,
    Virtual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TessellationVertex {
    pub triple: (usize, usize, usize),
    pub coords: Point,
    pub status: Option<VertexStatus>,
}

impl TessellationVertex {
    pub fn contains(&self, k: usize) -> bool {
        self.triple.0 == k || self.triple.1 == k || self.triple.2 == k
    }

    pub fn is_real(&self) -> bool {
        self.status == Some(VertexStatus::Real)
    }
}

fn find_line(lines: &[EdgeLine], a: usize, b: usize) -> Option<&EdgeLine> {
    let pair = if a < b { (a, b) } else { (b, a) };
    lines.iter().find(|l| l.pair == pair)
}

/// Intersections `P_klm` of every category triple, status unset.
pub fn candidate_vertices(lines: &[EdgeLine]) -> Vec<TessellationVertex> {
    candidates_with_notes(lines).0
}

fn candidates_with_notes(lines: &[EdgeLine]) -> (Vec<TessellationVertex>, Vec<GeometryNote>) {
    let k = lines.iter().map(|l| l.pair.1 + 1).max().unwrap_or(0);
    let mut out = Vec::new();
    let mut notes = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            for c in b + 1..k {
                let (Some(l1), Some(l2)) = (find_line(lines, a, b), find_line(lines, a, c)) else {
                    if find_line(lines, a, b).is_some() || find_line(lines, a, c).is_some() || find_line(lines, b, c).is_some() {
                        notes.push(GeometryNote::NearParallel { triple: (a, b, c) });
                    }
                    continue;
                };
                let [a1, b1, g1] = l1.coeffs;
                let [a2, b2, g2] = l2.coeffs;
                let det = a1 * b2 - a2 * b1;
                if det.abs() <= PARALLEL_EPS * a1.hypot(b1) * a2.hypot(b2) {
                    notes.push(GeometryNote::NearParallel { triple: (a, b, c) });
                    continue;
                }
                let x = (g1 * b2 - g2 * b1) / det;
                let y = (a1 * g2 - a2 * g1) / det;
                out.push(TessellationVertex {
                    triple: (a, b, c),
                    coords: [x, y],
                    status: None,
                });
            }
        }
    }
    (out, notes)
}

/// Real iff no category outside the triple is more probable at the vertex.
pub fn classify_vertex(v: &TessellationVertex, pred: &PlanarPredictor) -> VertexStatus {
    let p = pred.probabilities(v.coords);
    let (a, b, c) = v.triple;
    let common = p[a].max(p[b]).max(p[c]);
    let dominated = p
        .iter()
        .enumerate()
        .any(|(t, &pt)| !v.contains(t) && pt > common + TIE_TOLERANCE);
    if dominated {
        VertexStatus::Virtual
    } else {
        VertexStatus::Real
    }
}

/// Geometric extent of a realized edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EdgeExtent {
    Segment { from: Point, to: Point },
    Ray { origin: Point, direction: Point },
    Line { point: Point, direction: Point },
}

/// An edge of the tessellation between the regions of `pair`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TessellationEdge {
    pub pair: (usize, usize),
    /// Index into the tessellation's `lines`.
    pub line: usize,
    pub extent: EdgeExtent,
    /// Part of the edge inside the bounding box, if any.
    pub clipped: Option<[Point; 2]>,
}

impl TessellationEdge {
    fn param_range(&self) -> (Point, Point, f64, f64) {
        match self.extent {
            EdgeExtent::Segment { from, to } => (from, [to[0] - from[0], to[1] - from[1]], 0.0, 1.0),
            EdgeExtent::Ray { origin, direction } => (origin, direction, 0.0, f64::INFINITY),
            EdgeExtent::Line { point, direction } => (point, direction, f64::NEG_INFINITY, f64::INFINITY),
        }
    }
}

/// Convex region of a visible category inside the bounding box
/// (counter-clockwise; empty when the region misses the box).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub category: usize,
    pub polygon: Vec<Point>,
}

impl Region {
    pub fn area(&self) -> f64 {
        polygon_area(&self.polygon)
    }

    pub fn centroid(&self) -> Option<Point> {
        polygon_centroid(&self.polygon)
    }

    /// Inclusive point-in-convex-polygon test.
    pub fn contains(&self, p: Point) -> bool {
        let n = self.polygon.len();
        if n < 3 {
            return false;
        }
        (0..n).all(|i| {
            let (a, b) = (self.polygon[i], self.polygon[(i + 1) % n]);
            (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= -1e-12
        })
    }
}

pub fn polygon_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
}

pub fn polygon_centroid(poly: &[Point]) -> Option<Point> {
    let area = polygon_area(poly);
    if area.abs() < 1e-300 {
        return None;
    }
    let n = poly.len();
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let cross = a[0] * b[1] - b[0] * a[1];
        cx += (a[0] + b[0]) * cross;
        cy += (a[1] + b[1]) * cross;
    }
    Some([cx / (6.0 * area), cy / (6.0 * area)])
}

/// Keeps the part of a convex polygon where `a x + b y + c >= 0`.
pub fn clip_half_plane(poly: &[Point], a: f64, b: f64, c: f64) -> Vec<Point> {
    let f = |p: Point| a * p[0] + b * p[1] + c;
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        let (fp, fq) = (f(p), f(q));
        if fp >= 0.0 {
            out.push(p);
        }
        if (fp >= 0.0) != (fq >= 0.0) {
            let t = fp / (fp - fq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out.dedup_by(|x, y| (x[0] - y[0]).abs() < 1e-15 && (x[1] - y[1]).abs() < 1e-15);
    if out.len() > 1 {
        let (f0, l) = (out[0], out[out.len() - 1]);
        if (f0[0] - l[0]).abs() < 1e-15 && (f0[1] - l[1]).abs() < 1e-15 {
            out.pop();
        }
    }
    if out.len() < 3 {
        out.clear();
    }
    out
}

/// The prediction tessellation of one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionTessellation {
    pub variable: usize,
    pub predictor: PlanarPredictor,
    pub lines: Vec<EdgeLine>,
    pub vertices: Vec<TessellationVertex>,
    pub edges: Vec<TessellationEdge>,
    pub hidden: Vec<usize>,
    pub regions: Vec<Region>,
    pub bbox: BoundingBox,
    pub notes: Vec<GeometryNote>,
}

impl PredictionTessellation {
    pub fn n_categories(&self) -> usize {
        self.predictor.n_categories()
    }

    pub fn is_hidden(&self, k: usize) -> bool {
        self.hidden.contains(&k)
    }

    pub fn visible(&self) -> Vec<usize> {
        (0..self.n_categories()).filter(|k| !self.is_hidden(*k)).collect()
    }

    pub fn real_vertices(&self) -> impl Iterator<Item = &TessellationVertex> {
        self.vertices.iter().filter(|v| v.is_real())
    }

    pub fn region(&self, k: usize) -> Option<&Region> {
        self.regions.iter().find(|r| r.category == k)
    }

    /// Category whose region polygon contains `p` (first match).
    pub fn region_at(&self, p: Point) -> Option<usize> {
        self.regions.iter().find(|r| r.contains(p)).map(|r| r.category)
    }

    pub fn argmax(&self, p: Point) -> usize {
        self.predictor.argmax(p)
    }
}

/// Builds the tessellation of a planar predictor inside `bbox`.
pub fn build_tessellation(
    pred: &PlanarPredictor,
    variable: usize,
    bbox: BoundingBox,
) -> Result<PredictionTessellation, GeometryError> {
    if !bbox.is_valid() {
        return Err(GeometryError::EmptyBox);
    }
    let (lines, mut notes) = lines_with_notes(pred)?;
    let (mut vertices, vnotes) = candidates_with_notes(&lines);
    notes.extend(vnotes);
    for v in vertices.iter_mut() {
        v.status = Some(classify_vertex(v, pred));
    }

    let k = pred.n_categories();
    let probes = bbox.probe_points();
    let hidden: Vec<usize> = (0..k)
        .filter(|&c| {
            let in_real = vertices.iter().any(|v| v.is_real() && v.contains(c));
            let at_probe = probes.iter().any(|&p| pred.argmax(p) == c);
            !in_real && !at_probe
        })
        .collect();

    let edges = join_edges(pred, &lines, &vertices, &bbox);

    let regions = (0..k)
        .filter(|c| !hidden.contains(c))
        .map(|c| {
            let mut poly = bbox.corners().to_vec();
            for l in 0..k {
                if l == c || poly.is_empty() {
                    continue;
                }
                let (rc, rl) = (pred.rows[c], pred.rows[l]);
                poly = clip_half_plane(&poly, rc[1] - rl[1], rc[2] - rl[2], rc[0] - rl[0]);
            }
            Region { category: c, polygon: poly }
        })
        .collect();

    Ok(PredictionTessellation {
        variable,
        predictor: pred.clone(),
        lines,
        vertices,
        edges,
        hidden,
        regions,
        bbox,
        notes,
    })
}

/// Realizes the edges of every line from the status of its vertices.
///
/// Two real vertices on a line are joined by a segment. A single real vertex
/// emits a ray in the direction where its pair stays the most probable,
/// which is away from the line's virtual vertices. A line without real
/// vertices is an edge only when its pair dominates everywhere on it.
fn join_edges(
    pred: &PlanarPredictor,
    lines: &[EdgeLine],
    vertices: &[TessellationVertex],
    bbox: &BoundingBox,
) -> Vec<TessellationEdge> {
    let mut edges = Vec::new();
    for (li, line) in lines.iter().enumerate() {
        let (k, l) = line.pair;
        let dir = line.direction();
        let on_line: Vec<&TessellationVertex> = vertices
            .iter()
            .filter(|v| v.contains(k) && v.contains(l))
            .collect();
        let mut real: Vec<&TessellationVertex> = on_line.iter().copied().filter(|v| v.is_real()).collect();
        let param = |p: Point| p[0] * dir[0] + p[1] * dir[1];
        real.sort_by(|a, b| param(a.coords).partial_cmp(&param(b.coords)).unwrap());

        let pair_dominates = |p: Point| {
            let eta = pred.eta(p);
            let top = eta[k].max(eta[l]);
            let scale = 1.0 + top.abs();
            eta.iter()
                .enumerate()
                .all(|(t, &e)| t == k || t == l || e <= top + 1e-12 * scale)
        };

        let extent = match real.len() {
            0 => {
                let p = line.project(bbox.center());
                pair_dominates(p).then_some(EdgeExtent::Line { point: p, direction: dir })
            }
            1 => {
                let origin = real[0].coords;
                let m = other_index(real[0].triple, k, l);
                // Along the ray the pair must beat the vertex's third category.
                let (rk, rm) = (pred.rows[k], pred.rows[m]);
                let rate = (rk[1] - rm[1]) * dir[0] + (rk[2] - rm[2]) * dir[1];
                let direction = if rate >= 0.0 { dir } else { [-dir[0], -dir[1]] };
                Some(EdgeExtent::Ray { origin, direction })
            }
            _ => {
                let (from, to) = (real[0].coords, real[real.len() - 1].coords);
                let mid = [0.5 * (from[0] + to[0]), 0.5 * (from[1] + to[1])];
                pair_dominates(mid).then_some(EdgeExtent::Segment { from, to })
            }
        };
        if let Some(extent) = extent {
            let mut edge = TessellationEdge {
                pair: (k, l),
                line: li,
                extent,
                clipped: None,
            };
            let (o, d, t0, t1) = edge.param_range();
            edge.clipped = bbox
                .clip_line(o, d, t0, t1)
                .map(|(a, b)| [[o[0] + a * d[0], o[1] + a * d[1]], [o[0] + b * d[0], o[1] + b * d[1]]]);
            edges.push(edge);
        }
    }
    edges
}

fn other_index(triple: (usize, usize, usize), k: usize, l: usize) -> usize {
    [triple.0, triple.1, triple.2]
        .into_iter()
        .find(|&c| c != k && c != l)
        .unwrap()
}

/// Convenience wrapper: restricts `params` to `plane` and builds the
/// tessellation.
pub fn tessellate(
    params: &VariableParams,
    plane: (usize, usize),
    variable: usize,
    bbox: BoundingBox,
) -> Result<PredictionTessellation, GeometryError> {
    build_tessellation(&PlanarPredictor::from_params(params, plane)?, variable, bbox)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn predictor(rows: &[[f64; 3]]) -> PlanarPredictor {
        PlanarPredictor { rows: rows.to_vec() }
    }

    fn unit_box() -> BoundingBox {
        BoundingBox::new([-1.0, -1.0], [1.0, 1.0])
    }

    #[test]
    fn binary_variable_splits_box_in_two() {
        let pred = predictor(&[[0.0, 1.0, 0.0], [0.0, 0.0, 0.0]]);
        let t = build_tessellation(&pred, 0, unit_box()).unwrap();
        assert_eq!(t.lines.len(), 1);
        assert!(t.vertices.is_empty());
        assert!(t.hidden.is_empty());
        assert_eq!(t.edges.len(), 1);
        assert!(matches!(t.edges[0].extent, EdgeExtent::Line { .. }));
        assert!((t.regions[0].area() - 2.0).abs() < 1e-12);
        assert!((t.regions[1].area() - 2.0).abs() < 1e-12);
        assert!(t.region(0).unwrap().contains([0.5, 0.0]));
    }

    #[test]
    fn symmetric_fan_has_vertex_at_origin() {
        let rows: Vec<[f64; 3]> = (0..3)
            .map(|k| {
                let ang = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
                [0.0, ang.cos(), ang.sin()]
            })
            .collect();
        let pred = predictor(&rows);
        let lines = equal_probability_lines(&pred).unwrap();
        let v = candidate_vertices(&lines);
        assert_eq!(v.len(), 1);
        assert!(v[0].coords[0].abs() < 1e-12 && v[0].coords[1].abs() < 1e-12);
        assert_eq!(classify_vertex(&v[0], &pred), VertexStatus::Real);
        let t = build_tessellation(&pred, 0, unit_box()).unwrap();
        assert_eq!(t.edges.len(), 3);
        for e in &t.edges {
            let EdgeExtent::Ray { direction, .. } = e.extent else { panic!("expected rays") };
            let probe = [0.5 * direction[0], 0.5 * direction[1]];
            let p = pred.probabilities(probe);
            let (a, b) = e.pair;
            assert!((p[a] - p[b]).abs() < 1e-12);
            let other = 3 - a - b;
            assert!(p[a] > p[other]);
        }
    }

    #[test]
    fn identical_categories_are_degenerate() {
        let pred = predictor(&[[1.0, 2.0, 3.0], [1.0, 2.0, 3.0], [0.0, 0.0, 0.0]]);
        assert_eq!(equal_probability_lines(&pred), Err(GeometryError::DegeneratePair(0, 1)));
    }

    #[test]
    fn parallel_pair_is_noted_not_fatal() {
        let pred = predictor(&[[1.0, 2.0, 3.0], [0.0, 2.0, 3.0], [0.0, 0.0, 0.0]]);
        let t = build_tessellation(&pred, 0, unit_box()).unwrap();
        assert_eq!(t.lines.len(), 2);
        assert!(t.notes.contains(&GeometryNote::ParallelPair { pair: (0, 1) }));
        // category 1 is always below category 0
        assert!(t.is_hidden(1));
    }

    #[test]
    fn vertical_lines_have_no_slope_form() {
        let pred = predictor(&[[0.0, 1.0, 0.0], [0.0, 0.0, 0.0]]);
        let lines = equal_probability_lines(&pred).unwrap();
        assert!(lines[0].slope_intercept.is_none());
        let pred = predictor(&[[1.0, 1.0, 2.0], [0.0, 0.0, 0.0]]);
        let lines = equal_probability_lines(&pred).unwrap();
        let (s, b) = lines[0].slope_intercept.unwrap();
        assert!((s + 0.5).abs() < 1e-15 && (b + 0.5).abs() < 1e-15);
    }

    #[test]
    fn degenerate_box_is_rejected() {
        let pred = predictor(&[[0.0, 1.0, 0.0], [0.0, 0.0, 0.0]]);
        let bad = BoundingBox::new([0.0, 0.0], [0.0, 1.0]);
        assert_eq!(build_tessellation(&pred, 0, bad).unwrap_err(), GeometryError::EmptyBox);
    }

    #[test]
    fn plane_selection_is_checked() {
        let v = VariableParams::zeros(3, 2, crate::model::Baseline::Last);
        assert!(PlanarPredictor::from_params(&v, (0, 0)).is_err());
        assert!(PlanarPredictor::from_params(&v, (0, 2)).is_err());
        let v3 = VariableParams::new(vec![1.0], DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 3.0]), crate::model::Baseline::Last);
        let p = PlanarPredictor::from_params(&v3, (2, 0)).unwrap();
        assert_eq!(p.rows[0], [1.0, 3.0, 1.0]);
    }

    #[test]
    fn zero_params_predict_first_category() {
        let v = VariableParams::zeros(4, 2, crate::model::Baseline::Last);
        assert_eq!(predict_category(&v, &[0.3, 0.7]), 0);
    }

    #[test]
    fn half_plane_clip_of_square() {
        let sq = unit_box().corners().to_vec();
        let half = clip_half_plane(&sq, 1.0, 0.0, 0.0);
        assert!((polygon_area(&half) - 2.0).abs() < 1e-12);
        assert!(clip_half_plane(&sq, 1.0, 0.0, -5.0).is_empty());
        let c = polygon_centroid(&half).unwrap();
        assert!((c[0] - 0.5).abs() < 1e-12 && c[1].abs() < 1e-12);
    }
}
