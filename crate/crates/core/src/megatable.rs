//! Per-disease patient × variable tables with source links.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::canonical::MISSING;
use crate::corpus::DiseaseModule;
use crate::extract::VariableAssignment;
use crate::ingest::{Locator, SourceRef};
use crate::docstore::ObjectRef;

pub const ID_COLUMN: &str = "Anonymized ID";

#[derive(Debug, thiserror::Error)]
pub enum MegaTableError {
    #[error("missing assignment for patient {patient}, variable {variable_id}")]
    Incomplete { patient: String, variable_id: String },
    #[error("duplicate assignment for patient {patient}, variable {variable_id}")]
    Duplicate { patient: String, variable_id: String },
    #[error("assignment for patient {patient} names unknown variable {variable_id}")]
    UnknownVariable { patient: String, variable_id: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub variable_id: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub value: String,
    pub sources: Vec<SourceRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Row {
    pub patient: String,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MegaTable {
    pub disease_id: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Row>,
}

/// Provenance of one cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceLink {
    pub patient: String,
    pub variable_id: String,
    pub object: ObjectRef,
    pub locator: Locator,
}

/// Numeric suffix of a `P_<n>` id first, then the id text.
fn row_key(id: &str) -> (u64, String) {
    let n = id.rsplit('_').next().and_then(|s| s.parse().ok()).unwrap_or(u64::MAX);
    (n, id.to_string())
}

impl MegaTable {
    pub fn shape(&self) -> (usize, usize) {
        (self.rows.len(), self.columns.len())
    }

    pub fn cell(&self, patient: &str, variable_id: &str) -> Option<&Cell> {
        let col = self.columns.iter().position(|c| c.variable_id == variable_id)?;
        self.rows.iter().find(|r| r.patient == patient).map(|r| &r.cells[col])
    }

    pub fn source_links(&self) -> Vec<SourceLink> {
        self.rows
            .iter()
            .flat_map(|r| {
                r.cells.iter().zip(&self.columns).flat_map(move |(cell, col)| {
                    cell.sources.iter().map(move |s| SourceLink {
                        patient: r.patient.clone(),
                        variable_id: col.variable_id.clone(),
                        object: s.object.clone(),
                        locator: s.locator.clone(),
                    })
                })
            })
            .collect()
    }

    /// Same table with every cell's sources removed.
    pub fn without_sources(&self) -> MegaTable {
        let mut t = self.clone();
        for r in &mut t.rows {
            for c in &mut r.cells {
                c.sources.clear();
            }
        }
        t
    }
}

/// Rows ascend by pseudonym number, columns follow catalog order.
pub fn assemble_disease_table(
    assignments: &[VariableAssignment],
    module: &DiseaseModule,
) -> Result<MegaTable, MegaTableError> {
    let columns: Vec<Column> = module
        .variable_specs
        .iter()
        .map(|v| Column {
            variable_id: v.variable_id.clone(),
            name: v.name.clone(),
        })
        .collect();
    let known: BTreeSet<&str> = columns.iter().map(|c| c.variable_id.as_str()).collect();
    let mut by_patient: BTreeMap<&str, BTreeMap<&str, &VariableAssignment>> = BTreeMap::new();
    for a in assignments.iter().filter(|a| a.disease_id == module.disease_id) {
        if !known.contains(a.variable_id.as_str()) {
            return Err(MegaTableError::UnknownVariable {
                patient: a.patient.clone(),
                variable_id: a.variable_id.clone(),
            });
        }
        let row = by_patient.entry(&a.patient).or_default();
        if row.insert(&a.variable_id, a).is_some() {
            return Err(MegaTableError::Duplicate {
                patient: a.patient.clone(),
                variable_id: a.variable_id.clone(),
            });
        }
    }
    let mut patients: Vec<&str> = by_patient.keys().copied().collect();
    patients.sort_by_key(|p| row_key(p));
    let mut rows = Vec::with_capacity(patients.len());
    for p in patients {
        let got = &by_patient[p];
        let cells = columns
            .iter()
            .map(|c| {
                let a = got.get(c.variable_id.as_str()).ok_or_else(|| MegaTableError::Incomplete {
                    patient: p.to_string(),
                    variable_id: c.variable_id.clone(),
                })?;
                let value = if a.extracted_value.is_empty() { MISSING.to_string() } else { a.extracted_value.clone() };
                Ok(Cell {
                    value,
                    sources: a.evidence.clone(),
                })
            })
            .collect::<Result<Vec<_>, MegaTableError>>()?;
        rows.push(Row {
            patient: p.to_string(),
            cells,
        });
    }
    Ok(MegaTable {
        disease_id: module.disease_id.clone(),
        columns,
        rows,
    })
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> MegaTableError + '_ {
    move |source| MegaTableError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn format_err(path: &Path, message: impl ToString) -> MegaTableError {
    MegaTableError::Format {
        path: path.display().to_string(),
        message: message.to_string(),
    }
}

/// RFC 4180 CSV: `Anonymized ID` followed by one column per variable name.
pub fn export_csv(table: &MegaTable, path: &Path) -> Result<(), MegaTableError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_path(path)
        .map_err(|e| format_err(path, e))?;
    let header = std::iter::once(ID_COLUMN).chain(table.columns.iter().map(|c| c.name.as_str()));
    w.write_record(header).map_err(|e| format_err(path, e))?;
    for r in &table.rows {
        let record = std::iter::once(r.patient.as_str()).chain(r.cells.iter().map(|c| c.value.as_str()));
        w.write_record(record).map_err(|e| format_err(path, e))?;
    }
    w.flush().map_err(io(path))
}

/// Reads a CSV export back; cells carry no sources since CSV has no room for them.
pub fn import_csv(path: &Path, module: &DiseaseModule) -> Result<MegaTable, MegaTableError> {
    let mut r = csv::ReaderBuilder::new().from_path(path).map_err(|e| format_err(path, e))?;
    let header = r.headers().map_err(|e| format_err(path, e))?.clone();
    if header.get(0) != Some(ID_COLUMN) {
        return Err(format_err(path, format!("first column must be `{ID_COLUMN}`")));
    }
    let columns = header
        .iter()
        .skip(1)
        .map(|name| {
            module
                .variable_specs
                .iter()
                .find(|v| v.name == name)
                .map(|v| Column {
                    variable_id: v.variable_id.clone(),
                    name: v.name.clone(),
                })
                .ok_or_else(|| format_err(path, format!("unknown column `{name}`")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| format_err(path, e))?;
        rows.push(Row {
            patient: rec[0].to_string(),
            cells: rec
                .iter()
                .skip(1)
                .map(|v| Cell {
                    value: v.to_string(),
                    sources: Vec::new(),
                })
                .collect(),
        });
    }
    Ok(MegaTable {
        disease_id: module.disease_id.clone(),
        columns,
        rows,
    })
}

#[derive(Serialize, Deserialize)]
struct JsonRow {
    #[serde(rename = "Anonymized ID")]
    patient: String,
    values: serde_json::Map<String, serde_json::Value>,
    sources: BTreeMap<String, Vec<SourceRef>>,
}

#[derive(Serialize, Deserialize)]
struct JsonTable {
    disease_id: String,
    columns: Vec<Column>,
    rows: Vec<JsonRow>,
}

pub fn to_json(table: &MegaTable) -> String {
    let doc = JsonTable {
        disease_id: table.disease_id.clone(),
        columns: table.columns.clone(),
        rows: table
            .rows
            .iter()
            .map(|r| JsonRow {
                patient: r.patient.clone(),
                values: table
                    .columns
                    .iter()
                    .zip(&r.cells)
                    .map(|(c, cell)| (c.variable_id.clone(), serde_json::Value::String(cell.value.clone())))
                    .collect(),
                sources: table
                    .columns
                    .iter()
                    .zip(&r.cells)
                    .filter(|(_, cell)| !cell.sources.is_empty())
                    .map(|(c, cell)| (c.variable_id.clone(), cell.sources.clone()))
                    .collect(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("table serializes");
    s.push('\n');
    s
}

pub fn from_json(text: &str) -> Result<MegaTable, String> {
    let doc: JsonTable = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let mut rows = Vec::with_capacity(doc.rows.len());
    for r in doc.rows {
        let cells = doc
            .columns
            .iter()
            .map(|c| {
                let value = r
                    .values
                    .get(&c.variable_id)
                    .and_then(|v| v.as_str())
                    .ok_or_else(|| format!("row {} lacks `{}`", r.patient, c.variable_id))?;
                Ok(Cell {
                    value: value.to_string(),
                    sources: r.sources.get(&c.variable_id).cloned().unwrap_or_default(),
                })
            })
            .collect::<Result<Vec<_>, String>>()?;
        rows.push(Row {
            patient: r.patient,
            cells,
        });
    }
    Ok(MegaTable {
        disease_id: doc.disease_id,
        columns: doc.columns,
        rows,
    })
}

pub fn export_json(table: &MegaTable, path: &Path) -> Result<(), MegaTableError> {
    std::fs::write(path, to_json(table)).map_err(io(path))
}

pub fn import_json(path: &Path) -> Result<MegaTable, MegaTableError> {
    let text = std::fs::read_to_string(path).map_err(io(path))?;
    from_json(&text).map_err(|m| format_err(path, m))
}
