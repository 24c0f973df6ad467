//! Subcommand bodies, independent of argument parsing.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nlbiplot::em::{eap_scores_on_training_scale, gauss_hermite_grid};
use nlbiplot::geometry::{tessellate, Point};
use nlbiplot::voronoi::invert_tessellation;
use nlbiplot::{
    fit_em, indicator_of, predict_category, Algorithm, BoundingBox, EmConfig, InversionError, NominalDataset,
    ScoreMatrix,
};

use crate::artifacts::{NamedTessellation, PointsFile, TessellationFile, VariablePoints, POINTS_SCHEMA_VERSION,
    TESSELLATION_SCHEMA_VERSION};
use crate::error::{CliError, Result};
use crate::input::{self, code_table, read_table};
use crate::model_file::{LoadedModel, ModelFile};
use crate::svg::{self, RowMarkers};

/// Grid resolution of the diagram agreement score.
pub const AGREEMENT_GRID: usize = 200;

/// Options shared by the geometry commands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryOptions {
    /// Zero-based dimensions of the display plane.
    pub plane: (usize, usize),
    /// Half-width multiplier of the score extent.
    pub bbox_inflate: f64,
}

impl Default for GeometryOptions {
    fn default() -> Self {
        Self {
            plane: (0, 1),
            bbox_inflate: 1.3,
        }
    }
}

// ---------------------------------------------------------------- fit

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub file: ModelFile,
    pub json: String,
}

impl FitOutcome {
    pub fn converged(&self) -> bool {
        self.file.diagnostics.converged
    }
}

pub fn fit(dataset: &NominalDataset, cfg: &EmConfig) -> Result<FitOutcome> {
    let model = fit_em(dataset, cfg)?;
    let file = ModelFile::new(dataset, cfg, &model);
    let json = file.to_json()?;
    Ok(FitOutcome { file, json })
}

/// Console summary of a fit: the objective trace and the stopping reason.
pub fn fit_report(outcome: &FitOutcome) -> String {
    let d = &outcome.file.diagnostics;
    let mut s = String::new();
    for (it, v) in d.trace.iter().enumerate() {
        let _ = writeln!(s, "iteration {it:>3}  penalized log-likelihood {v:.6}");
    }
    let _ = writeln!(
        s,
        "{} after {} EM iterations; penalized log-likelihood {:.6}",
        if d.converged { "converged" } else { "stopped" },
        d.iterations,
        d.penalized_loglik
    );
    if let Some(m) = &d.message {
        let _ = writeln!(s, "note: {m}");
    }
    s
}

pub fn load_model(path: &Path) -> Result<LoadedModel> {
    ModelFile::from_json(&input::read_to_string(path)?)?.resolve()
}

// ---------------------------------------------------------------- predict

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTable {
    pub row_ids: Vec<String>,
    pub var_names: Vec<String>,
    /// `[row][selected variable]` labels.
    pub truth: Vec<Vec<String>>,
    pub predicted: Vec<Vec<String>>,
    pub errors: Vec<usize>,
}

impl PredictionTable {
    pub fn total_errors(&self) -> usize {
        self.errors.iter().sum()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["id".to_string()];
        for v in &self.var_names {
            header.push(format!("{v}_true"));
            header.push(format!("{v}_predicted"));
        }
        w.write_record(&header)?;
        for (i, id) in self.row_ids.iter().enumerate() {
            let mut rec = vec![id.clone()];
            for v in 0..self.var_names.len() {
                rec.push(self.truth[i][v].clone());
                rec.push(self.predicted[i][v].clone());
            }
            w.write_record(&rec)?;
        }
        let mut rec = vec!["errors".to_string()];
        for e in &self.errors {
            rec.push(String::new());
            rec.push(e.to_string());
        }
        w.write_record(&rec)?;
        let bytes = w.into_inner().map_err(|e| CliError::invalid(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::invalid(e.to_string()))
    }

    /// Aligned text with `*` marking misclassified cells.
    pub fn render(&self) -> String {
        let mut cols: Vec<Vec<String>> = vec![std::iter::once("id".to_string())
            .chain(self.row_ids.iter().cloned())
            .chain(["errors".to_string()])
            .collect()];
        for v in 0..self.var_names.len() {
            let mut t = vec![format!("{} (T)", self.var_names[v])];
            let mut p = vec!["predicted".to_string()];
            for i in 0..self.row_ids.len() {
                t.push(self.truth[i][v].clone());
                let mark = if self.truth[i][v] != self.predicted[i][v] { "*" } else { "" };
                p.push(format!("{}{mark}", self.predicted[i][v]));
            }
            t.push(String::new());
            p.push(self.errors[v].to_string());
            cols.push(t);
            cols.push(p);
        }
        let widths: Vec<usize> = cols.iter().map(|c| c.iter().map(|s| s.chars().count()).max().unwrap_or(0)).collect();
        let mut s = String::new();
        for r in 0..cols[0].len() {
            let line: Vec<String> = cols
                .iter()
                .zip(&widths)
                .map(|(c, &w)| format!("{:<w$}", c[r]))
                .collect();
            let _ = writeln!(s, "{}", line.join("  ").trim_end());
        }
        let _ = writeln!(s, "total errors: {}", self.total_errors());
        s
    }
}

/// Reads `data` against the model's variables and levels.
pub fn load_data_for_model(loaded: &LoadedModel, path: &Path, id_col: Option<&str>) -> Result<NominalDataset> {
    let table = read_table(input::open(path)?, id_col)?;
    align_table(loaded, table)
}

pub fn align_table(loaded: &LoadedModel, table: input::LabelTable) -> Result<NominalDataset> {
    let names = loaded.dataset.var_names();
    let mut order = Vec::with_capacity(names.len());
    for n in names {
        let c = table
            .var_names
            .iter()
            .position(|v| v == n)
            .ok_or_else(|| CliError::invalid(format!("data has no column for model variable `{n}`")))?;
        order.push(c);
    }
    if let Some(extra) = table.var_names.iter().find(|v| !names.contains(v)) {
        return Err(CliError::invalid(format!("data column `{extra}` is not a model variable")));
    }
    let rows: Vec<Vec<String>> = table.rows.iter().map(|r| order.iter().map(|&c| r[c].clone()).collect()).collect();
    let levels: Vec<Option<Vec<String>>> = loaded.dataset.categories().iter().cloned().map(Some).collect();
    let aligned = input::LabelTable {
        row_ids: table.row_ids,
        var_names: names.to_vec(),
        rows,
    };
    code_table(&aligned, Some(&levels))
}

/// Row scores of `data`: the stored scores for the training table, EAP
/// scores on the training scale otherwise.
pub fn score_rows(loaded: &LoadedModel, data: &NominalDataset) -> Result<ScoreMatrix> {
    if data.codes() == loaded.dataset.codes() {
        return Ok(loaded.model.scores.clone());
    }
    let grid = gauss_hermite_grid(loaded.config.dims, loaded.config.nodes)?;
    Ok(eap_scores_on_training_scale(
        &indicator_of(&loaded.dataset),
        &indicator_of(data),
        &loaded.model.variables,
        &grid,
    ))
}

pub fn predict(loaded: &LoadedModel, data: &NominalDataset, vars: &[usize]) -> Result<PredictionTable> {
    let scores = score_rows(loaded, data)?;
    let cats = loaded.dataset.categories();
    let mut truth = vec![Vec::with_capacity(vars.len()); data.n_rows()];
    let mut predicted = vec![Vec::with_capacity(vars.len()); data.n_rows()];
    let mut errors = vec![0; vars.len()];
    for (i, (t, p)) in truth.iter_mut().zip(predicted.iter_mut()).enumerate() {
        let point = scores.row(i);
        for (v, &j) in vars.iter().enumerate() {
            let obs = data.code(i, j);
            let pred = predict_category(&loaded.model.variables[j], &point);
            if obs != pred {
                errors[v] += 1;
            }
            t.push(cats[j][obs].clone());
            p.push(cats[j][pred].clone());
        }
    }
    Ok(PredictionTable {
        row_ids: data.row_ids().to_vec(),
        var_names: vars.iter().map(|&j| loaded.dataset.var_names()[j].clone()).collect(),
        truth,
        predicted,
        errors,
    })
}

/// Resolves a variable selection; `None` selects all.
pub fn select_variables(loaded: &LoadedModel, names: Option<&[String]>) -> Result<Vec<usize>> {
    match names {
        None => Ok((0..loaded.dataset.n_vars()).collect()),
        Some(list) => list.iter().map(|n| loaded.variable_index(n)).collect(),
    }
}

// ---------------------------------------------------------------- geometry

fn check_plane(loaded: &LoadedModel, opts: &GeometryOptions) -> Result<()> {
    let dims = loaded.config.dims;
    if dims < 2 {
        return Err(CliError::invalid(
            "geometry needs a model with at least two latent dimensions (refit with --dims 2 or more)",
        ));
    }
    let (a, b) = opts.plane;
    if a == b || a >= dims || b >= dims {
        return Err(CliError::invalid(format!(
            "plane ({},{}) is not a pair of distinct dimensions in 1..={dims}",
            a + 1,
            b + 1
        )));
    }
    if !(opts.bbox_inflate > 0.0) || !opts.bbox_inflate.is_finite() {
        return Err(CliError::invalid("bounding-box inflation must be positive"));
    }
    Ok(())
}

/// Row scores projected on the display plane.
pub fn plane_points(scores: &ScoreMatrix, plane: (usize, usize)) -> Vec<Point> {
    (0..scores.n_rows())
        .map(|i| {
            let r = scores.row(i);
            [r[plane.0], r[plane.1]]
        })
        .collect()
}

pub fn display_box(loaded: &LoadedModel, opts: &GeometryOptions) -> Result<BoundingBox> {
    let pts = plane_points(&loaded.model.scores, opts.plane);
    BoundingBox::around(pts.iter(), opts.bbox_inflate).ok_or(CliError::Geometry(nlbiplot::GeometryError::EmptyBox))
}

pub fn tessellations(loaded: &LoadedModel, vars: &[usize], opts: &GeometryOptions) -> Result<TessellationFile> {
    check_plane(loaded, opts)?;
    let bbox = display_box(loaded, opts)?;
    let variables = vars
        .iter()
        .map(|&j| {
            let t = tessellate(&loaded.model.variables[j], opts.plane, j, bbox)?;
            Ok(NamedTessellation::new(
                &loaded.dataset.var_names()[j],
                &loaded.dataset.categories()[j],
                t,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TessellationFile {
        schema_version: TESSELLATION_SCHEMA_VERSION,
        plane: opts.plane,
        variables,
    })
}

/// Inverts one tessellation. Inconsistent constraints fall back to the
/// combined least-squares formulation.
pub fn invert_one(named: &NamedTessellation, algorithm: Algorithm) -> VariablePoints {
    match invert_tessellation(&named.tessellation, algorithm, AGREEMENT_GRID) {
        Ok(p) => VariablePoints::from_points(named, &p, Vec::new()),
        Err(InversionError::InfeasibleConstraints { residual }) if algorithm != Algorithm::Combined => {
            let note = format!(
                "algorithm {} constraints inconsistent (residual {residual:.3e}); fell back to algorithm 1",
                algorithm.number()
            );
            match invert_tessellation(&named.tessellation, Algorithm::Combined, AGREEMENT_GRID) {
                Ok(p) => VariablePoints::from_points(named, &p, vec![note]),
                Err(e) => VariablePoints::empty(named, algorithm, format!("{note}; {e}")),
            }
        }
        Err(e) => VariablePoints::empty(named, algorithm, e.to_string()),
    }
}

pub fn invert(file: &TessellationFile, algorithm: Algorithm) -> PointsFile {
    PointsFile {
        schema_version: POINTS_SCHEMA_VERSION,
        algorithm: algorithm.number(),
        variables: file.variables.iter().map(|n| invert_one(n, algorithm)).collect(),
    }
}

// ---------------------------------------------------------------- plot

/// File name and contents of every figure.
pub fn plots(loaded: &LoadedModel, opts: &GeometryOptions, algorithm: Algorithm) -> Result<Vec<(String, String)>> {
    let vars: Vec<usize> = (0..loaded.dataset.n_vars()).collect();
    let tess = tessellations(loaded, &vars, opts)?;
    let points = invert(&tess, algorithm);
    let pts = plane_points(&loaded.model.scores, opts.plane);
    let rows = RowMarkers {
        labels: loaded.dataset.row_ids(),
        points: &pts,
    };
    let mut out = Vec::new();
    for (named, vp) in tess.variables.iter().zip(&points.variables) {
        out.push((
            format!("regions_{}.svg", file_stem(&named.name)),
            svg::region_plot(named, &rows, Some(vp), opts.plane),
        ));
    }
    if let Some(s) = svg::superimposed_plot(&tess.variables, &rows, opts.plane) {
        out.push(("superimposed.svg".to_string(), s));
    }
    if let Some(s) = svg::biplot(&tess.variables, &points.variables, &rows, opts.plane) {
        out.push(("biplot.svg".to_string(), s));
    }
    Ok(out)
}

pub fn write_plots(dir: &Path, figures: &[(String, String)]) -> Result<Vec<PathBuf>> {
    figures
        .iter()
        .map(|(name, body)| {
            let path = dir.join(name);
            input::write(&path, body)?;
            Ok(path)
        })
        .collect()
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}
