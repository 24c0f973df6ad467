//! CSV ingestion.
//!
//! UTF-8, comma separated, one header row. Every column except the optional
//! id column is read as a nominal variable.

use std::io::Read;
use std::path::Path;

use nlbiplot::NominalDataset;

use crate::error::{CliError, Result};

/// Raw table before coding.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelTable {
    pub row_ids: Option<Vec<String>>,
    pub var_names: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn read_table<R: Read>(reader: R, id_col: Option<&str>) -> Result<LabelTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let id_index = match id_col {
        Some(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| CliError::invalid(format!("id column `{name}` not in header")))?,
        ),
        None => None,
    };
    let var_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(c, _)| Some(c) != id_index)
        .map(|(_, h)| h.clone())
        .collect();
    if var_names.is_empty() {
        return Err(CliError::invalid("no variable columns"));
    }
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let mut row = Vec::with_capacity(var_names.len());
        for (c, field) in record.iter().enumerate() {
            if Some(c) == id_index {
                ids.push(field.trim().to_string());
            } else {
                row.push(field.trim().to_string());
            }
        }
        rows.push(row);
    }
    Ok(LabelTable {
        row_ids: id_index.map(|_| ids),
        var_names,
        rows,
    })
}

/// Codes a table with levels in order of first appearance, or with the
/// given per-variable level lists.
pub fn code_table(table: &LabelTable, levels: Option<&[Option<Vec<String>>]>) -> Result<NominalDataset> {
    Ok(NominalDataset::from_labels(
        table.row_ids.clone(),
        table.var_names.clone(),
        &table.rows,
        levels,
    )?)
}

pub fn load_csv(path: &Path, id_col: Option<&str>) -> Result<NominalDataset> {
    code_table(&read_table(open(path)?, id_col)?, None)
}

pub fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}
