//! Synthetic patient corpus and its ground-truth ledger.

mod catalog;
mod generate;
mod ledger;

pub use catalog::{
    load_disease_catalog, Catalog, CatalogError, CodeBinding, DiseaseModule, Domain, EventTemplate, VariableSpec,
    MAX_VARIABLES, MIN_VARIABLES,
};
pub use generate::{
    generate_corpus, generate_patient, ledger_entries, raw_patient_id, truth_value, Address, ClinicalEvent,
    Demographics, PatientRecord, MAX_EVENTS, MIN_EVENTS,
};
pub(crate) use generate::draw_numeric;
pub use ledger::{read_ground_truth_ledger, write_ground_truth_ledger, GroundTruthLedger, LedgerEntry, LedgerError};
