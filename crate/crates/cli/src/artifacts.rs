//! JSON files produced by `tessellate` and `invert`.

use serde::{Deserialize, Serialize};

use nlbiplot::voronoi::InversionWarning;
use nlbiplot::{Algorithm, CategoryPoints, PredictionTessellation};

use crate::error::{CliError, Result};

pub const TESSELLATION_SCHEMA_VERSION: u32 = 1;
pub const POINTS_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TessellationFile {
    pub schema_version: u32,
    /// Zero-based latent dimensions shown on the horizontal and vertical axes.
    pub plane: (usize, usize),
    pub variables: Vec<NamedTessellation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTessellation {
    pub name: String,
    pub categories: Vec<String>,
    pub hidden: Vec<String>,
    pub tessellation: PredictionTessellation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointsFile {
    pub schema_version: u32,
    pub algorithm: u8,
    pub variables: Vec<VariablePoints>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariablePoints {
    pub name: String,
    /// Algorithm actually used; differs from the request after a fallback.
    pub algorithm: u8,
    pub points: Vec<LabelledPoint>,
    pub hidden: Vec<String>,
    pub fit_score: Option<f64>,
    pub residual: Option<f64>,
    pub rhs_norm: Option<f64>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelledPoint {
    pub category: String,
    pub x: f64,
    pub y: f64,
}

impl NamedTessellation {
    pub fn new(name: &str, categories: &[String], tessellation: PredictionTessellation) -> Self {
        Self {
            name: name.to_string(),
            categories: categories.to_vec(),
            hidden: tessellation.hidden.iter().map(|&c| categories[c].clone()).collect(),
            tessellation,
        }
    }
}

impl VariablePoints {
    pub fn from_points(named: &NamedTessellation, pts: &CategoryPoints, notes: Vec<String>) -> Self {
        let mut notes = notes;
        notes.extend(pts.warnings.iter().map(|w| match w {
            InversionWarning::IllConditioned { condition } => {
                format!("ill-conditioned system (condition {condition:.3e}); solution damped")
            }
        }));
        Self {
            name: named.name.clone(),
            algorithm: pts.algorithm.number(),
            points: pts
                .categories
                .iter()
                .zip(&pts.points)
                .map(|(&c, p)| LabelledPoint {
                    category: named.categories[c].clone(),
                    x: p[0],
                    y: p[1],
                })
                .collect(),
            hidden: named.hidden.clone(),
            fit_score: pts.fit_score,
            residual: Some(pts.residual),
            rhs_norm: Some(pts.rhs_norm),
            notes,
        }
    }

    /// Entry for a variable whose tessellation could not be inverted.
    pub fn empty(named: &NamedTessellation, algorithm: Algorithm, note: String) -> Self {
        Self {
            name: named.name.clone(),
            algorithm: algorithm.number(),
            points: Vec::new(),
            hidden: named.hidden.clone(),
            fit_score: None,
            residual: None,
            rhs_norm: None,
            notes: vec![note],
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

impl TessellationFile {
    pub fn to_json(&self) -> Result<String> {
        to_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: Self = serde_json::from_str(text)?;
        if file.schema_version != TESSELLATION_SCHEMA_VERSION {
            return Err(CliError::invalid(format!(
                "tessellation schema version {} is not supported",
                file.schema_version
            )));
        }
        Ok(file)
    }
}

impl PointsFile {
    pub fn to_json(&self) -> Result<String> {
        to_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: Self = serde_json::from_str(text)?;
        if file.schema_version != POINTS_SCHEMA_VERSION {
            return Err(CliError::invalid(format!(
                "category-point schema version {} is not supported",
                file.schema_version
            )));
        }
        Ok(file)
    }
}
