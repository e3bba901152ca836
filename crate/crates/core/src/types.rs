use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

/// The ten clinical variable categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Immunizations,
    Codes,
    Names,
    Medications,
    Symptoms,
    Conditions,
    Observations,
    #[serde(rename = "Care-plans")]
    CarePlans,
    Procedures,
    Devices,
}

impl Category {
    pub const ALL: [Category; 10] = [
        Category::Immunizations,
        Category::Codes,
        Category::Names,
        Category::Medications,
        Category::Symptoms,
        Category::Conditions,
        Category::Observations,
        Category::CarePlans,
        Category::Procedures,
        Category::Devices,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Immunizations => "Immunizations",
            Category::Codes => "Codes",
            Category::Names => "Names",
            Category::Medications => "Medications",
            Category::Symptoms => "Symptoms",
            Category::Conditions => "Conditions",
            Category::Observations => "Observations",
            Category::CarePlans => "Care-plans",
            Category::Procedures => "Procedures",
            Category::Devices => "Devices",
        }
    }

    pub fn parse(s: &str) -> Option<Category> {
        let s = s.trim();
        Category::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CodeSystem {
    #[serde(rename = "LOINC")]
    Loinc,
    #[serde(rename = "SNOMED")]
    Snomed,
    #[serde(rename = "RxNorm")]
    RxNorm,
    #[serde(rename = "ICD-10")]
    Icd10,
}

impl CodeSystem {
    pub const ALL: [CodeSystem; 4] = [
        CodeSystem::Loinc,
        CodeSystem::Snomed,
        CodeSystem::RxNorm,
        CodeSystem::Icd10,
    ];

    pub fn uri(self) -> &'static str {
        match self {
            CodeSystem::Loinc => "http://loinc.org",
            CodeSystem::Snomed => "http://snomed.info/sct",
            CodeSystem::RxNorm => "http://www.nlm.nih.gov/research/umls/rxnorm",
            CodeSystem::Icd10 => "http://hl7.org/fhir/sid/icd-10",
        }
    }

    /// HL7 v2 coding-system abbreviation (CWE.3).
    pub fn hl7_abbrev(self) -> &'static str {
        match self {
            CodeSystem::Loinc => "LN",
            CodeSystem::Snomed => "SCT",
            CodeSystem::RxNorm => "RXN",
            CodeSystem::Icd10 => "I10",
        }
    }

    pub fn from_uri(uri: &str) -> Option<CodeSystem> {
        CodeSystem::ALL.into_iter().find(|s| s.uri() == uri)
    }

    pub fn from_hl7_abbrev(abbrev: &str) -> Option<CodeSystem> {
        CodeSystem::ALL
            .into_iter()
            .find(|s| s.hl7_abbrev().eq_ignore_ascii_case(abbrev))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Numeric,
    Coded,
    Date,
    FreeText,
    Boolean,
}

/// Typed value of a clinical event or parsed statement.
///
/// `Quantity` with `unit: None` is the explicit unit-free marker.
/// `Present` is used by categories whose events carry no value of their own
/// (a prescription, a diagnosis, an encounter).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventValue {
    Quantity { value: f64, unit: Option<String> },
    Text(String),
    Date(NaiveDate),
    Bool(bool),
    Present,
}

impl EventValue {
    /// Text serialization used in ledgers, tables and exact-match scoring.
    pub fn render(&self) -> String {
        match self {
            EventValue::Quantity { value, unit } => crate::canonical::render_quantity(*value, unit.as_deref()),
            EventValue::Text(t) => t.clone(),
            EventValue::Date(d) => d.format("%Y-%m-%d").to_string(),
            EventValue::Bool(true) | EventValue::Present => "Yes".to_string(),
            EventValue::Bool(false) => "No".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FormatKind {
    #[serde(rename = "FHIR_JSON")]
    FhirJson,
    #[serde(rename = "HL7_V2")]
    Hl7V2,
    #[serde(rename = "CSV_EXTRACT")]
    CsvExtract,
    #[serde(rename = "NARRATIVE")]
    Narrative,
}

impl FormatKind {
    pub const ALL: [FormatKind; 4] = [
        FormatKind::FhirJson,
        FormatKind::Hl7V2,
        FormatKind::CsvExtract,
        FormatKind::Narrative,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FormatKind::FhirJson => "FHIR_JSON",
            FormatKind::Hl7V2 => "HL7_V2",
            FormatKind::CsvExtract => "CSV_EXTRACT",
            FormatKind::Narrative => "NARRATIVE",
        }
    }

    pub fn parse(s: &str) -> Option<FormatKind> {
        FormatKind::ALL.into_iter().find(|f| f.as_str() == s)
    }

    pub fn extension(self) -> &'static str {
        match self {
            FormatKind::FhirJson => "fhir.json",
            FormatKind::Hl7V2 => "hl7",
            FormatKind::CsvExtract => "csv",
            FormatKind::Narrative => "txt",
        }
    }

    /// Whether an event of this category can be carried by the format.
    pub fn supports(self, category: Category) -> bool {
        match self {
            FormatKind::Hl7V2 => matches!(
                category,
                Category::Observations
                    | Category::Conditions
                    | Category::Immunizations
                    | Category::Medications
                    | Category::Procedures
            ),
            _ => true,
        }
    }
}

impl fmt::Display for FormatKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
