use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum LedgerError {
    #[error("ledger I/O on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("ledger {path} line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub patient_id: String,
    pub disease_id: String,
    pub variable_id: String,
    pub true_value: String,
    pub event_ids: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthLedger {
    pub entries: Vec<LedgerEntry>,
}

impl GroundTruthLedger {
    pub fn sort(&mut self) {
        self.entries.sort_by(|a, b| {
            (&a.disease_id, &a.patient_id, &a.variable_id).cmp(&(&b.disease_id, &b.patient_id, &b.variable_id))
        });
    }
}

/// One JSON object per line, sorted by (disease_id, patient_id, variable_id).
pub fn write_ground_truth_ledger(ledger: &GroundTruthLedger, path: &Path) -> Result<(), LedgerError> {
    let io = |source| LedgerError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut sorted = ledger.clone();
    sorted.sort();
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for e in &sorted.entries {
        let line = serde_json::to_string(e).expect("ledger entries serialize");
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_ground_truth_ledger(path: &Path) -> Result<GroundTruthLedger, LedgerError> {
    let io = |source| LedgerError::Io {
        path: path.to_path_buf(),
        source,
    };
    let r = BufReader::new(File::open(path).map_err(io)?);
    let mut entries = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line).map_err(|e| LedgerError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        entries.push(entry);
    }
    Ok(GroundTruthLedger { entries })
}
