//! Versioned JSON model file.
//!
//! Floats are written in shortest round-trip form, so export, import and
//! re-export is byte-identical.

use serde::{Deserialize, Serialize};

use nlbiplot::model::FitDiagnostics;
use nlbiplot::{BiplotModel, EmConfig, NominalDataset, ScoreMatrix, VariableParams};

use crate::error::{CliError, Result};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub dataset: DatasetSection,
    pub config: EmConfig,
    pub variables: Vec<VariableSection>,
    pub scores: Vec<Vec<f64>>,
    pub diagnostics: FitDiagnostics,
}

/// Training table: variable schema plus zero-based codes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSection {
    pub row_ids: Vec<String>,
    pub variables: Vec<VariableSchema>,
    pub codes: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSchema {
    pub name: String,
    pub categories: Vec<String>,
}

/// Parameters of one variable; the baseline category has none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSection {
    pub name: String,
    pub baseline: String,
    pub categories: Vec<CategoryParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryParams {
    pub category: String,
    pub intercept: f64,
    pub slopes: Vec<f64>,
}

/// A model file resolved into library types.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub dataset: NominalDataset,
    pub config: EmConfig,
    pub model: BiplotModel,
}

impl ModelFile {
    pub fn new(dataset: &NominalDataset, config: &EmConfig, model: &BiplotModel) -> Self {
        let variables = model
            .variables
            .iter()
            .enumerate()
            .map(|(j, v)| {
                let labels = &dataset.categories()[j];
                VariableSection {
                    name: dataset.var_names()[j].clone(),
                    baseline: labels[v.baseline_index()].clone(),
                    categories: (0..v.n_categories() - 1)
                        .map(|r| {
                            let c = v.category_of_row(r);
                            CategoryParams {
                                category: labels[c].clone(),
                                intercept: v.intercept(c),
                                slopes: (0..v.dims()).map(|s| v.slope(c, s)).collect(),
                            }
                        })
                        .collect(),
                }
            })
            .collect();
        Self {
            schema_version: MODEL_SCHEMA_VERSION,
            dataset: DatasetSection {
                row_ids: dataset.row_ids().to_vec(),
                variables: dataset
                    .var_names()
                    .iter()
                    .zip(dataset.categories())
                    .map(|(n, c)| VariableSchema {
                        name: n.clone(),
                        categories: c.clone(),
                    })
                    .collect(),
                codes: dataset.codes().to_vec(),
            },
            config: config.clone(),
            variables,
            scores: (0..model.scores.n_rows()).map(|i| model.scores.row(i)).collect(),
            diagnostics: model.diagnostics.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: Self = serde_json::from_str(text)?;
        if file.schema_version != MODEL_SCHEMA_VERSION {
            return Err(CliError::invalid(format!(
                "model schema version {} is not supported (expected {MODEL_SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        Ok(file)
    }

    /// Validates the file and rebuilds the dataset and model.
    pub fn resolve(&self) -> Result<LoadedModel> {
        let ds = &self.dataset;
        let dataset = NominalDataset::new(
            ds.row_ids.clone(),
            ds.variables.iter().map(|v| v.name.clone()).collect(),
            ds.variables.iter().map(|v| v.categories.clone()).collect(),
            ds.codes.clone(),
        )?;
        let dims = self.config.dims;
        let baseline = self.config.baseline;
        if self.variables.len() != dataset.n_vars() {
            return Err(CliError::invalid("parameter blocks do not match the variable list"));
        }
        let mut variables = Vec::with_capacity(self.variables.len());
        for (j, section) in self.variables.iter().enumerate() {
            let labels = &dataset.categories()[j];
            let k = labels.len();
            let template = VariableParams::zeros(k, dims, baseline);
            if section.name != dataset.var_names()[j]
                || section.baseline != labels[template.baseline_index()]
                || section.categories.len() != k - 1
            {
                return Err(CliError::invalid(format!("parameter block {j} does not match the dataset schema")));
            }
            let mut flat = Vec::with_capacity((k - 1) * (dims + 1));
            for (r, cp) in section.categories.iter().enumerate() {
                if cp.category != labels[template.category_of_row(r)] || cp.slopes.len() != dims {
                    return Err(CliError::invalid(format!(
                        "variable `{}`: category block `{}` is out of place",
                        section.name, cp.category
                    )));
                }
                flat.push(cp.intercept);
                flat.extend_from_slice(&cp.slopes);
            }
            variables.push(VariableParams::from_flat(&flat, k, dims, baseline));
        }
        let scores = ScoreMatrix::from_rows(&self.scores, dims)
            .filter(|s| s.n_rows() == dataset.n_rows())
            .ok_or_else(|| CliError::invalid("score matrix does not match the dataset"))?;
        Ok(LoadedModel {
            dataset,
            config: self.config.clone(),
            model: BiplotModel {
                variables,
                scores,
                ridge: self.config.ridge,
                diagnostics: self.diagnostics.clone(),
            },
        })
    }
}

impl LoadedModel {
    pub fn variable_index(&self, name: &str) -> Result<usize> {
        self.dataset
            .var_index(name)
            .ok_or_else(|| CliError::invalid(format!("unknown variable `{name}`")))
    }
}
