//! Fragmentation of patient records into heterogeneous documents.

mod csv;
mod draft;
mod fhir;
mod hl7;
mod narrative;
mod noise;
mod plan;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::corpus::{ClinicalEvent, DiseaseModule, PatientRecord};
use crate::types::{Category, FormatKind};

pub use self::csv::{CSV_HEADER, UNIT_FREE};
pub use self::draft::{DateStyle, DocDraft, DraftEntry};
pub use self::fhir::{DEVICE_USE_EXTENSION, MRN_SYSTEM, OBSERVATION_CATEGORY_SYSTEM};
pub use self::hl7::{escape as hl7_escape, hl7_ts};
pub use self::narrative::sentence as narrative_sentence;
pub use self::noise::{apply_noise, NoiseError, NoiseProfile, NoiseTargets};
pub use self::plan::{plan_fragmentation, DocumentPlan, PlannedDoc, MAX_DOCS, MIN_DOCS};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScatterError {
    #[error("document {0} has no events")]
    NoEvents(String),
    #[error("{format} cannot carry {category} events")]
    Unsupported { format: FormatKind, category: Category },
    #[error("event {0} does not belong to the record")]
    ForeignEvent(String),
    #[error("plan references unknown event {0}")]
    UnknownEvent(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MedicalDocument {
    pub doc_id: String,
    pub patient_id: String,
    pub disease_id: String,
    pub format: FormatKind,
    pub body: String,
    pub created_at: NaiveDateTime,
    pub covered_event_ids: Vec<String>,
}

impl MedicalDocument {
    pub fn file_name(&self) -> String {
        format!("{}.{}", self.doc_id, self.format.extension())
    }
}

pub fn render_draft(draft: &DocDraft) -> MedicalDocument {
    let body = match draft.format {
        FormatKind::FhirJson => fhir::render(draft),
        FormatKind::Hl7V2 => hl7::render(draft),
        FormatKind::CsvExtract => csv::render(draft),
        FormatKind::Narrative => narrative::render(draft),
    };
    let mut covered: Vec<String> = draft.entries.iter().map(|e| e.event_id.clone()).collect();
    covered.sort();
    covered.dedup();
    MedicalDocument {
        doc_id: draft.doc_id.clone(),
        patient_id: draft.patient_id.clone(),
        disease_id: draft.disease_id.clone(),
        format: draft.format,
        body,
        created_at: draft.created_at(),
        covered_event_ids: covered,
    }
}

fn render_single(
    record: &PatientRecord,
    events: &[ClinicalEvent],
    format: FormatKind,
    seed: u64,
) -> Result<MedicalDocument, ScatterError> {
    let refs: Vec<&ClinicalEvent> = events.iter().collect();
    let doc_id = format!("{}-D00", record.patient_id);
    Ok(render_draft(&DocDraft::new(record, &doc_id, format, &refs, seed)?))
}

pub fn render_fhir_bundle(record: &PatientRecord, events: &[ClinicalEvent]) -> Result<MedicalDocument, ScatterError> {
    render_single(record, events, FormatKind::FhirJson, 0)
}

pub fn render_hl7_messages(record: &PatientRecord, events: &[ClinicalEvent]) -> Result<MedicalDocument, ScatterError> {
    render_single(record, events, FormatKind::Hl7V2, 0)
}

pub fn render_csv_extract(record: &PatientRecord, events: &[ClinicalEvent]) -> Result<MedicalDocument, ScatterError> {
    render_single(record, events, FormatKind::CsvExtract, 0)
}

pub fn render_narrative_note(
    record: &PatientRecord,
    events: &[ClinicalEvent],
    seed: u64,
) -> Result<MedicalDocument, ScatterError> {
    render_single(record, events, FormatKind::Narrative, seed)
}

/// Plan, draft, perturb and render every document of one patient.
pub fn scatter_patient(
    record: &PatientRecord,
    module: &DiseaseModule,
    profile: &NoiseProfile,
    seed: u64,
) -> Result<Vec<MedicalDocument>, ScatterError> {
    let plan = plan_fragmentation(record, profile, seed);
    let mut docs = Vec::with_capacity(plan.docs.len());
    for planned in &plan.docs {
        let events = planned
            .event_ids
            .iter()
            .map(|id| record.event(id).ok_or_else(|| ScatterError::UnknownEvent(id.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let draft = DocDraft::new(record, &planned.doc_id, planned.format, &events, seed)?;
        let noisy = apply_noise(&draft, module, profile, seed);
        if noisy.entries.is_empty() {
            continue;
        }
        docs.push(render_draft(&noisy));
    }
    Ok(docs)
}
