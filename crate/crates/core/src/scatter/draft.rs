use chrono::NaiveDateTime;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ScatterError;
use crate::corpus::{ClinicalEvent, Demographics, PatientRecord};
use crate::seed::{rng_for, stable_hash64};
use crate::types::{Category, CodeSystem, EventValue, FormatKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DateStyle {
    Iso,
    Dotted,
}

/// One event as it will be written into a document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DraftEntry {
    pub event_id: String,
    pub timestamp: NaiveDateTime,
    pub category: Category,
    pub system: CodeSystem,
    pub code: String,
    pub display: String,
    pub value: EventValue,
    pub variable_id: Option<String>,
    pub date_style: DateStyle,
    /// Narrative sentence template selector.
    pub template: u8,
}

impl DraftEntry {
    pub fn from_event(e: &ClinicalEvent, template: u8) -> DraftEntry {
        DraftEntry {
            event_id: e.event_id.clone(),
            timestamp: e.timestamp,
            category: e.category,
            system: e.system,
            code: e.code.clone(),
            display: e.display.clone(),
            value: e.value.clone(),
            variable_id: e.variable_id.clone(),
            date_style: DateStyle::Iso,
            template,
        }
    }
}

/// Structured form of a document before serialization. Noise is applied
/// here so every channel (typos, swaps, conflicts) stays format-agnostic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocDraft {
    pub doc_id: String,
    pub patient_id: String,
    pub disease_id: String,
    pub format: FormatKind,
    pub demographics: Demographics,
    pub entries: Vec<DraftEntry>,
}

impl DocDraft {
    pub fn new(
        record: &PatientRecord,
        doc_id: &str,
        format: FormatKind,
        events: &[&ClinicalEvent],
        seed: u64,
    ) -> Result<DocDraft, ScatterError> {
        if events.is_empty() {
            return Err(ScatterError::NoEvents(doc_id.to_string()));
        }
        let mut rng = rng_for(seed, "draft", stable_hash64(&[doc_id.as_bytes()]));
        let mut entries = Vec::with_capacity(events.len());
        for e in events {
            if e.patient_id != record.patient_id {
                return Err(ScatterError::ForeignEvent(e.event_id.clone()));
            }
            if !format.supports(e.category) {
                return Err(ScatterError::Unsupported {
                    format,
                    category: e.category,
                });
            }
            entries.push(DraftEntry::from_event(e, rng.random_range(0..3)));
        }
        entries.sort_by(|a, b| (a.timestamp, &a.event_id).cmp(&(b.timestamp, &b.event_id)));
        Ok(DocDraft {
            doc_id: doc_id.to_string(),
            patient_id: record.patient_id.clone(),
            disease_id: record.disease_id.clone(),
            format,
            demographics: record.demographics.clone(),
            entries,
        })
    }

    pub fn created_at(&self) -> NaiveDateTime {
        self.entries
            .iter()
            .map(|e| e.timestamp)
            .max()
            .unwrap_or(NaiveDateTime::MIN)
    }
}
