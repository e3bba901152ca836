use super::{text, CanonicalStatement, IngestError, Locator, ParsedDocument, SourceRef};
use crate::canonical::{parse_date, parse_datetime};
use crate::docstore::ObjectRef;
use crate::scatter::{CSV_HEADER, UNIT_FREE};
use crate::types::{Category, EventValue, FormatKind};

fn typed_value(value: &str, unit: &str) -> Result<EventValue, String> {
    if !unit.is_empty() {
        let v: f64 = value.trim().parse().map_err(|_| format!("value `{value}` with unit `{unit}` is not numeric"))?;
        let unit = (unit != UNIT_FREE).then(|| unit.to_string());
        return Ok(EventValue::Quantity { value: v, unit });
    }
    Ok(match value {
        "" => EventValue::Present,
        "true" => EventValue::Bool(true),
        "false" => EventValue::Bool(false),
        _ => match parse_date(value) {
            Some(d) => EventValue::Date(d),
            None => EventValue::Text(value.to_string()),
        },
    })
}

/// One statement per data row; a row with the wrong number of fields is an
/// error naming its line.
pub fn parse_csv_extract(bytes: &[u8]) -> Result<ParsedDocument, IngestError> {
    text(bytes)?;
    let object = ObjectRef::of(bytes);
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(bytes);
    let line_at = |p: &csv::Position| {
        let start = p.byte() as usize;
        let skip = bytes[start..].iter().take_while(|b| matches!(b, b'\r' | b'\n')).count();
        bytes[..start + skip].iter().filter(|b| **b == b'\n').count() as u64 + 1
    };
    let csv_err = |e: csv::Error| {
        let line = e.position().map_or(0, line_at);
        IngestError::Csv {
            line,
            message: e.to_string(),
        }
    };
    let header = reader.headers().map_err(csv_err)?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(IngestError::Csv {
            line: 1,
            message: format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut doc = ParsedDocument {
        object: object.clone(),
        format: FormatKind::CsvExtract,
        patient: None,
        statements: Vec::new(),
        warnings: Vec::new(),
    };
    for row in reader.records() {
        let row = row.map_err(csv_err)?;
        let line = row.position().map_or(0, line_at);
        let bad = |message: String| IngestError::Csv { line, message };
        let (event_id, ts, cat, code, display, value, unit) =
            (&row[0], &row[1], &row[2], &row[3], &row[4], &row[5], &row[6]);
        let category = Category::parse(cat).ok_or_else(|| bad(format!("unknown category `{cat}`")))?;
        let value = typed_value(value, unit).map_err(bad)?;
        if doc.patient.is_none() {
            if let Some((p, _)) = event_id.rsplit_once("-E") {
                doc.patient = Some(p.to_string());
            }
        }
        doc.statements.push(CanonicalStatement {
            patient: String::new(),
            category,
            code_system: None,
            code: (!code.is_empty()).then(|| code.to_string()),
            display: display.to_string(),
            value,
            timestamp: parse_datetime(ts),
            source: SourceRef {
                object: object.clone(),
                locator: Locator::Line { line },
            },
        });
    }
    Ok(doc.finish())
}
