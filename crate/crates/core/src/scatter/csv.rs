use super::draft::{DateStyle, DocDraft, DraftEntry};
use crate::canonical::{format_date, format_dotted_date, format_number, format_timestamp};
use crate::types::EventValue;

pub const CSV_HEADER: [&str; 7] = ["event_id", "timestamp", "category", "code", "display", "value", "unit"];

/// Unit cell written for unit-free quantities.
pub const UNIT_FREE: &str = "1";

fn row(e: &DraftEntry) -> [String; 7] {
    let dotted = e.date_style == DateStyle::Dotted;
    let timestamp = if dotted {
        format!("{} {}", format_dotted_date(&e.timestamp.date()), e.timestamp.format("%H:%M"))
    } else {
        format_timestamp(&e.timestamp)
    };
    let (value, unit) = match &e.value {
        EventValue::Quantity { value, unit } => (
            format_number(*value),
            unit.clone().unwrap_or_else(|| UNIT_FREE.to_string()),
        ),
        EventValue::Text(t) => (t.clone(), String::new()),
        EventValue::Date(d) if dotted => (format_dotted_date(d), String::new()),
        EventValue::Date(d) => (format_date(d), String::new()),
        EventValue::Bool(b) => (b.to_string(), String::new()),
        EventValue::Present => (String::new(), String::new()),
    };
    [
        e.event_id.clone(),
        timestamp,
        e.category.as_str().to_string(),
        e.code.clone(),
        e.display.clone(),
        value,
        unit,
    ]
}

pub fn render(draft: &DocDraft) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for e in &draft.entries {
        w.write_record(row(e)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv of UTF-8 fields is UTF-8")
}
