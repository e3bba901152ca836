//! Format detection, parsing and normalization into canonical statements.

mod csv;
mod detect;
mod fhir;
mod hl7;
mod narrative;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::docstore::ObjectRef;
use crate::extract::OntologyRegistry;
use crate::types::{Category, CodeSystem, EventValue, FormatKind};

pub use self::csv::parse_csv_extract;
pub use self::detect::detect_format;
pub use self::fhir::parse_fhir_bundle;
pub use self::hl7::{parse_hl7_message, parse_hl7_message_with, unescape as hl7_unescape};
pub use self::narrative::{parse_narrative_note, NarrativeMatcher};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IngestError {
    #[error("empty document")]
    Empty,
    #[error("document is not valid UTF-8")]
    NotUtf8,
    #[error("malformed HL7 message: {0}")]
    MalformedHl7(String),
    #[error("HL7 segment {index} (`{id}`): {message}")]
    Hl7Segment { index: usize, id: String, message: String },
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error("FHIR {path}: {message}")]
    Fhir { path: String, message: String },
    #[error("CSV line {line}: {message}")]
    Csv { line: u64, message: String },
}

/// Where inside the source document a statement came from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Locator {
    /// Zero-based segment index within the HL7 body.
    Segment { index: usize },
    JsonPath { path: String },
    /// One-based physical line of a CSV extract.
    Line { line: u64 },
    /// Byte span within a narrative body.
    Span { start: usize, end: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SourceRef {
    pub object: ObjectRef,
    pub locator: Locator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalStatement {
    /// Patient identifier found in the document (pseudonym after scrubbing).
    pub patient: String,
    pub category: Category,
    pub code_system: Option<CodeSystem>,
    pub code: Option<String>,
    pub display: String,
    pub value: EventValue,
    pub timestamp: Option<NaiveDateTime>,
    pub source: SourceRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedDocument {
    pub object: ObjectRef,
    pub format: FormatKind,
    pub patient: Option<String>,
    pub statements: Vec<CanonicalStatement>,
    pub warnings: Vec<String>,
}

impl ParsedDocument {
    fn finish(mut self) -> ParsedDocument {
        if let Some(p) = &self.patient {
            for s in &mut self.statements {
                if s.patient.is_empty() {
                    s.patient = p.clone();
                }
            }
        }
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseOptions {
    pub strict: bool,
}

fn text(bytes: &[u8]) -> Result<&str, IngestError> {
    std::str::from_utf8(bytes).map_err(|_| IngestError::NotUtf8)
}

/// Detects the format and routes to the matching parser.
pub fn parse_document(
    bytes: &[u8],
    matcher: &NarrativeMatcher,
    options: ParseOptions,
) -> Result<ParsedDocument, IngestError> {
    match detect_format(bytes)? {
        FormatKind::Hl7V2 => parse_hl7_message_with(bytes, options.strict),
        FormatKind::FhirJson => fhir::parse(bytes, options.strict),
        FormatKind::CsvExtract => parse_csv_extract(bytes),
        FormatKind::Narrative => matcher.parse(bytes),
    }
}

/// Convenience wrapper building a matcher for a single call.
pub fn parse_with_registry(
    bytes: &[u8],
    registry: &OntologyRegistry,
    options: ParseOptions,
) -> Result<ParsedDocument, IngestError> {
    parse_document(bytes, &NarrativeMatcher::new(registry), options)
}
