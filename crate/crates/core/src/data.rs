//! Nominal data tables, their indicator expansion and row score matrices.
//!
//! Category codes are stored as zero-based level indices: `codes[i][j] == k`
//! means row `i` takes the `k`-th level of variable `j`.

use nalgebra::{DMatrix, DMatrixView};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::error::DataError;

/// An `I x J` table of nominal observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NominalDataset {
    row_ids: Vec<String>,
    var_names: Vec<String>,
    categories: Vec<Vec<String>>,
    codes: Vec<Vec<usize>>,
}

impl NominalDataset {
    /// Builds a dataset from already-coded rows, validating every invariant.
    pub fn new(
        row_ids: Vec<String>,
        var_names: Vec<String>,
        categories: Vec<Vec<String>>,
        codes: Vec<Vec<usize>>,
    ) -> Result<Self, DataError> {
        if codes.is_empty() {
            return Err(DataError::Empty);
        }
        if var_names.len() != categories.len() {
            return Err(DataError::Shape(format!(
                "{} variable names but {} category lists",
                var_names.len(),
                categories.len()
            )));
        }
        if row_ids.len() != codes.len() {
            return Err(DataError::Shape(format!(
                "{} row ids but {} rows",
                row_ids.len(),
                codes.len()
            )));
        }
        for (j, levels) in categories.iter().enumerate() {
            if levels.len() < 2 {
                return Err(DataError::TooFewLevels {
                    variable: var_names[j].clone(),
                    levels: levels.len(),
                });
            }
            for (a, la) in levels.iter().enumerate() {
                if levels[a + 1..].contains(la) {
                    return Err(DataError::DuplicateLevel {
                        variable: var_names[j].clone(),
                        level: la.clone(),
                    });
                }
            }
        }
        for (i, row) in codes.iter().enumerate() {
            if row.len() != var_names.len() {
                return Err(DataError::Shape(format!(
                    "row {} has {} cells, expected {}",
                    i + 1,
                    row.len(),
                    var_names.len()
                )));
            }
            for (j, &code) in row.iter().enumerate() {
                if code >= categories[j].len() {
                    return Err(DataError::CodeOutOfRange {
                        row: i + 1,
                        variable: var_names[j].clone(),
                        code,
                    });
                }
            }
        }
        Ok(Self {
            row_ids,
            var_names,
            categories,
            codes,
        })
    }

    /// Builds a dataset from raw labels.
    ///
    /// Levels are taken from `levels` when given for a variable, otherwise in
    /// order of first appearance. Blank cells are rejected.
    pub fn from_labels(
        row_ids: Option<Vec<String>>,
        var_names: Vec<String>,
        rows: &[Vec<String>],
        levels: Option<&[Option<Vec<String>>]>,
    ) -> Result<Self, DataError> {
        if rows.is_empty() {
            return Err(DataError::Empty);
        }
        let n_vars = var_names.len();
        let mut categories: Vec<Vec<String>> = (0..n_vars)
            .map(|j| {
                levels
                    .and_then(|l| l.get(j).cloned().flatten())
                    .unwrap_or_default()
            })
            .collect();
        let fixed: Vec<bool> = categories.iter().map(|c| !c.is_empty()).collect();
        let mut lookup: Vec<HashMap<String, usize>> = categories
            .iter()
            .map(|c| c.iter().cloned().enumerate().map(|(k, l)| (l, k)).collect())
            .collect();

        let mut codes = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_vars {
                return Err(DataError::Shape(format!(
                    "row {} has {} cells, expected {}",
                    i + 1,
                    row.len(),
                    n_vars
                )));
            }
            let mut coded = Vec::with_capacity(n_vars);
            for (j, cell) in row.iter().enumerate() {
                let label = cell.trim();
                if label.is_empty() {
                    return Err(DataError::MissingCell {
                        row: i + 1,
                        variable: var_names[j].clone(),
                    });
                }
                let code = match lookup[j].get(label) {
                    Some(&k) => k,
                    None if fixed[j] => {
                        return Err(DataError::UnknownLevel {
                            row: i + 1,
                            variable: var_names[j].clone(),
                            level: label.to_string(),
                        })
                    }
                    None => {
                        let k = categories[j].len();
                        categories[j].push(label.to_string());
                        lookup[j].insert(label.to_string(), k);
                        k
                    }
                };
                coded.push(code);
            }
            codes.push(coded);
        }
        let row_ids = row_ids.unwrap_or_else(|| (1..=rows.len()).map(|i| i.to_string()).collect());
        Self::new(row_ids, var_names, categories, codes)
    }

    pub fn n_rows(&self) -> usize {
        self.codes.len()
    }

    pub fn n_vars(&self) -> usize {
        self.var_names.len()
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn var_names(&self) -> &[String] {
        &self.var_names
    }

    pub fn categories(&self) -> &[Vec<String>] {
        &self.categories
    }

    /// Number of levels `K_j` of each variable.
    pub fn level_counts(&self) -> Vec<usize> {
        self.categories.iter().map(Vec::len).collect()
    }

    pub fn codes(&self) -> &[Vec<usize>] {
        &self.codes
    }

    pub fn code(&self, row: usize, var: usize) -> usize {
        self.codes[row][var]
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.var_names.iter().position(|v| v == name)
    }
}

/// Binary indicator expansion `G` of a nominal dataset, one block of `K_j`
/// columns per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorMatrix {
    values: DMatrix<f64>,
    block_offsets: Vec<usize>,
    block_sizes: Vec<usize>,
}

impl IndicatorMatrix {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_vars(&self) -> usize {
        self.block_sizes.len()
    }

    /// Total number of columns, `L = sum K_j`.
    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn block_offsets(&self) -> &[usize] {
        &self.block_offsets
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    /// The `I x K_j` block of variable `j`.
    pub fn block(&self, j: usize) -> DMatrixView<'_, f64> {
        self.values
            .columns(self.block_offsets[j], self.block_sizes[j])
    }

    /// Observed category of row `i` in variable `j` (the argmax of its block).
    pub fn observed(&self, i: usize, j: usize) -> usize {
        let off = self.block_offsets[j];
        (0..self.block_sizes[j])
            .max_by(|&a, &b| {
                self.values[(i, off + a)]
                    .partial_cmp(&self.values[(i, off + b)])
                    .unwrap()
                    .then(b.cmp(&a))
            })
            .unwrap()
    }
}

/// Expands category codes into the indicator matrix.
pub fn indicator_of(dataset: &NominalDataset) -> IndicatorMatrix {
    let sizes = dataset.level_counts();
    let mut offsets = Vec::with_capacity(sizes.len());
    let mut total = 0;
    for &k in &sizes {
        offsets.push(total);
        total += k;
    }
    let mut values = DMatrix::zeros(dataset.n_rows(), total);
    for (i, row) in dataset.codes().iter().enumerate() {
        for (j, &code) in row.iter().enumerate() {
            values[(i, offsets[j] + code)] = 1.0;
        }
    }
    IndicatorMatrix {
        values,
        block_offsets: offsets,
        block_sizes: sizes,
    }
}

/// Row scores `A`, one row per individual and one column per latent dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    scores: DMatrix<f64>,
}

impl ScoreMatrix {
    pub fn new(scores: DMatrix<f64>) -> Self {
        Self { scores }
    }

    pub fn zeros(rows: usize, dims: usize) -> Self {
        Self::new(DMatrix::zeros(rows, dims))
    }

    /// Builds from row vectors of `dims` entries each; `None` if ragged.
    pub fn from_rows(rows: &[Vec<f64>], dims: usize) -> Option<Self> {
        if rows.iter().any(|r| r.len() != dims) {
            return None;
        }
        Some(Self::new(DMatrix::from_fn(rows.len(), dims, |i, s| rows[i][s])))
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.scores
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.scores
    }

    pub fn n_rows(&self) -> usize {
        self.scores.nrows()
    }

    pub fn dims(&self) -> usize {
        self.scores.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.scores.row(i).iter().copied().collect()
    }

    /// Centers each column and scales it to unit (population) variance.
    ///
    /// Columns with zero spread are only centered.
    pub fn standardize(&mut self) {
        let moments = self.column_moments();
        self.apply_standardization(&moments);
    }

    /// Per-column `(mean, population standard deviation)`.
    pub fn column_moments(&self) -> Vec<(f64, f64)> {
        let n = self.scores.nrows() as f64;
        self.scores
            .column_iter()
            .map(|col| {
                let mean = col.sum() / n;
                let ss: f64 = col.iter().map(|x| (x - mean) * (x - mean)).sum();
                (mean, (ss / n).sqrt())
            })
            .collect()
    }

    /// Maps each column to `(x - mean) / sd`; a zero `sd` only centers.
    pub fn apply_standardization(&mut self, moments: &[(f64, f64)]) {
        assert_eq!(moments.len(), self.dims(), "one moment pair per column");
        for (mut col, &(mean, sd)) in self.scores.column_iter_mut().zip(moments) {
            col.add_scalar_mut(-mean);
            if sd > 0.0 {
                col /= sd;
            }
        }
    }

    pub fn standardized(mut self) -> Self {
        self.standardize();
        self
    }
}
