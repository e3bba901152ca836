use super::IngestError;
use crate::scatter::CSV_HEADER;
use crate::types::FormatKind;

/// Priority: `MSH|` prefix, then a JSON Bundle, then the CSV header line,
/// then narrative.
pub fn detect_format(bytes: &[u8]) -> Result<FormatKind, IngestError> {
    if bytes.iter().all(|b| b.is_ascii_whitespace()) {
        return Err(IngestError::Empty);
    }
    if bytes.starts_with(b"MSH|") {
        return Ok(FormatKind::Hl7V2);
    }
    let trimmed = bytes.trim_ascii_start();
    if trimmed.first() == Some(&b'{') {
        if let Ok(v) = serde_json::from_slice::<serde_json::Value>(bytes) {
            if v.get("resourceType").and_then(|r| r.as_str()) == Some("Bundle") {
                return Ok(FormatKind::FhirJson);
            }
        }
    }
    let first_line = bytes.split(|b| *b == b'\n').next().unwrap_or_default();
    let first_line = first_line.strip_suffix(b"\r").unwrap_or(first_line);
    if first_line == CSV_HEADER.join(",").as_bytes() {
        return Ok(FormatKind::CsvExtract);
    }
    Ok(FormatKind::Narrative)
}
