//! Deterministic SVG figures.
//!
//! Coordinates are printed with two decimals and elements are emitted in
//! index order, so identical inputs give byte-identical files.

use std::fmt::Write as _;

use nlbiplot::geometry::Point;
use nlbiplot::BoundingBox;

use crate::artifacts::{NamedTessellation, VariablePoints};

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 600.0;
const MARGIN: f64 = 40.0;
const PLOT_SIZE: f64 = HEIGHT - 2.0 * MARGIN;
const SIDEBAR_X: f64 = PLOT_SIZE + 2.0 * MARGIN;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

fn colour(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Row scores with their labels, projected on the display plane.
#[derive(Debug, Clone)]
pub struct RowMarkers<'a> {
    pub labels: &'a [String],
    pub points: &'a [Point],
}

/// Equal-aspect map from plane coordinates to the square plot area.
struct Frame {
    bbox: BoundingBox,
    scale: f64,
    offset: [f64; 2],
}

impl Frame {
    fn new(bbox: BoundingBox) -> Self {
        let scale = PLOT_SIZE / bbox.width().max(bbox.height());
        let offset = [
            MARGIN + 0.5 * (PLOT_SIZE - scale * bbox.width()),
            MARGIN + 0.5 * (PLOT_SIZE - scale * bbox.height()),
        ];
        Self { bbox, scale, offset }
    }

    fn map(&self, p: Point) -> (f64, f64) {
        (
            self.offset[0] + self.scale * (p[0] - self.bbox.min[0]),
            self.offset[1] + self.scale * (self.bbox.max[1] - p[1]),
        )
    }
}

struct Canvas {
    body: String,
    frame: Frame,
    sidebar_y: f64,
}

impl Canvas {
    fn new(bbox: BoundingBox, title: &str, axes: (usize, usize)) -> Self {
        let mut c = Self {
            body: String::new(),
            frame: Frame::new(bbox),
            sidebar_y: MARGIN,
        };
        let (x0, y0) = c.frame.map(bbox.min);
        let (x1, y1) = c.frame.map(bbox.max);
        let _ = writeln!(
            c.body,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#333333"/>"##,
            x0,
            y1,
            x1 - x0,
            y0 - y1
        );
        if bbox.min[1] < 0.0 && bbox.max[1] > 0.0 {
            let (ax, ay) = c.frame.map([bbox.min[0], 0.0]);
            let (bx, _) = c.frame.map([bbox.max[0], 0.0]);
            c.line((ax, ay), (bx, ay), "#cccccc", 0.8, Some("4 3"));
        }
        if bbox.min[0] < 0.0 && bbox.max[0] > 0.0 {
            let (ax, ay) = c.frame.map([0.0, bbox.min[1]]);
            let (_, by) = c.frame.map([0.0, bbox.max[1]]);
            c.line((ax, ay), (ax, by), "#cccccc", 0.8, Some("4 3"));
        }
        c.text((MARGIN, MARGIN - 14.0), title, 14.0, "#000000", "start");
        c.text(
            (0.5 * (x0 + x1), y0 + 24.0),
            &format!("Dimension {}", axes.0 + 1),
            11.0,
            "#333333",
            "middle",
        );
        let _ = writeln!(
            c.body,
            r##"<text x="{:.2}" y="{:.2}" font-size="11" fill="#333333" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">Dimension {}</text>"##,
            x0 - 16.0,
            0.5 * (y0 + y1),
            x0 - 16.0,
            0.5 * (y0 + y1),
            axes.1 + 1
        );
        c
    }

    fn line(&mut self, a: (f64, f64), b: (f64, f64), stroke: &str, width: f64, dash: Option<&str>) {
        let dash = dash.map(|d| format!(r#" stroke-dasharray="{d}""#)).unwrap_or_default();
        let _ = writeln!(
            self.body,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{stroke}" stroke-width="{width:.2}"{dash}/>"#,
            a.0, a.1, b.0, b.1
        );
    }

    fn polygon(&mut self, poly: &[Point], fill: &str, opacity: f64) {
        let pts: Vec<String> = poly
            .iter()
            .map(|&p| {
                let (x, y) = self.frame.map(p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            self.body,
            r#"<polygon points="{}" fill="{fill}" fill-opacity="{opacity:.2}" stroke="none"/>"#,
            pts.join(" ")
        );
    }

    fn text(&mut self, at: (f64, f64), text: &str, size: f64, fill: &str, anchor: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{:.2}" y="{:.2}" font-size="{size:.0}" fill="{fill}" text-anchor="{anchor}">{}</text>"#,
            at.0,
            at.1,
            escape(text)
        );
    }

    fn inside(&self, p: Point) -> bool {
        self.frame.bbox.contains(p)
    }

    fn row_markers(&mut self, rows: &RowMarkers<'_>) {
        for (label, &p) in rows.labels.iter().zip(rows.points) {
            let (x, y) = self.frame.map(p);
            let _ = writeln!(
                self.body,
                r##"<circle cx="{x:.2}" cy="{y:.2}" r="3.00" fill="#000000"/>"##
            );
            self.text((x + 4.0, y - 4.0), label, 9.0, "#000000", "start");
        }
    }

    fn category_marker(&mut self, p: Point, label: &str, fill: &str) {
        if !self.inside(p) {
            return;
        }
        let (x, y) = self.frame.map(p);
        let _ = writeln!(
            self.body,
            r##"<rect x="{:.2}" y="{:.2}" width="8.00" height="8.00" fill="{fill}" stroke="#000000" stroke-width="0.80"/>"##,
            x - 4.0,
            y - 4.0
        );
        self.text((x + 6.0, y + 12.0), label, 11.0, fill, "start");
    }

    fn sidebar_heading(&mut self, text: &str) {
        self.sidebar_y += 6.0;
        self.text((SIDEBAR_X, self.sidebar_y), text, 12.0, "#000000", "start");
        self.sidebar_y += 16.0;
    }

    fn sidebar_entry(&mut self, text: &str, swatch: Option<&str>) {
        if let Some(fill) = swatch {
            let _ = writeln!(
                self.body,
                r##"<rect x="{:.2}" y="{:.2}" width="10.00" height="10.00" fill="{fill}" stroke="#333333" stroke-width="0.50"/>"##,
                SIDEBAR_X,
                self.sidebar_y - 9.0
            );
        }
        let x = if swatch.is_some() { SIDEBAR_X + 16.0 } else { SIDEBAR_X };
        self.text((x, self.sidebar_y), text, 11.0, "#333333", "start");
        self.sidebar_y += 15.0;
    }

    fn finish(self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{HEIGHT:.0}" viewBox="0 0 {WIDTH:.0} {HEIGHT:.0}" font-family="sans-serif">"#
        );
        out.push_str(r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
        out.push('\n');
        out.push_str(&self.body);
        out.push_str("</svg>\n");
        out
    }
}

fn edges(c: &mut Canvas, named: &NamedTessellation, stroke: &str, width: f64) {
    for e in &named.tessellation.edges {
        if let Some([a, b]) = e.clipped {
            let (a, b) = (c.frame.map(a), c.frame.map(b));
            c.line(a, b, stroke, width, None);
        }
    }
}

fn hidden_note(c: &mut Canvas, named: &NamedTessellation, prefix: bool) {
    for h in &named.hidden {
        let text = if prefix { format!("{}: {h}", named.name) } else { h.clone() };
        c.sidebar_entry(&text, None);
    }
}

/// Prediction regions of one variable with row markers and, when given, its
/// category points.
pub fn region_plot(
    named: &NamedTessellation,
    rows: &RowMarkers<'_>,
    points: Option<&VariablePoints>,
    axes: (usize, usize),
) -> String {
    let t = &named.tessellation;
    let mut c = Canvas::new(t.bbox, &format!("Prediction regions: {}", named.name), axes);
    for r in &t.regions {
        if r.polygon.len() >= 3 {
            c.polygon(&r.polygon, colour(r.category), 0.35);
        }
    }
    edges(&mut c, named, "#222222", 1.2);
    c.row_markers(rows);
    if let Some(vp) = points {
        for p in &vp.points {
            let idx = named.categories.iter().position(|l| l == &p.category).unwrap_or(0);
            c.category_marker([p.x, p.y], &p.category, colour(idx));
        }
    }
    c.sidebar_heading(&named.name);
    for k in t.visible() {
        c.sidebar_entry(&named.categories[k], Some(colour(k)));
    }
    if !named.hidden.is_empty() {
        c.sidebar_heading("Hidden");
        hidden_note(&mut c, named, false);
    }
    c.finish()
}

/// Edges of every tessellation on one plot, one colour per variable.
pub fn superimposed_plot(all: &[NamedTessellation], rows: &RowMarkers<'_>, axes: (usize, usize)) -> Option<String> {
    let bbox = all.first()?.tessellation.bbox;
    let mut c = Canvas::new(bbox, "Superimposed tessellations", axes);
    for (j, named) in all.iter().enumerate() {
        edges(&mut c, named, colour(j), 1.4);
    }
    c.row_markers(rows);
    c.sidebar_heading("Variables");
    for (j, named) in all.iter().enumerate() {
        c.sidebar_entry(&named.name, Some(colour(j)));
    }
    c.finish().into()
}

/// Row markers and the category points of every variable.
pub fn biplot(
    all: &[NamedTessellation],
    points: &[VariablePoints],
    rows: &RowMarkers<'_>,
    axes: (usize, usize),
) -> Option<String> {
    let bbox = all.first()?.tessellation.bbox;
    let mut c = Canvas::new(bbox, "Nominal logistic biplot", axes);
    c.row_markers(rows);
    for (j, vp) in points.iter().enumerate() {
        for p in &vp.points {
            c.category_marker([p.x, p.y], &p.category, colour(j));
        }
    }
    c.sidebar_heading("Variables");
    for (j, named) in all.iter().enumerate() {
        c.sidebar_entry(&named.name, Some(colour(j)));
    }
    if all.iter().any(|n| !n.hidden.is_empty()) {
        c.sidebar_heading("Hidden");
        for named in all {
            hidden_note(&mut c, named, true);
        }
    }
    c.finish().into()
}
