use super::{text, CanonicalStatement, IngestError, Locator, ParsedDocument, SourceRef};
use crate::canonical::{parse_date, parse_datetime};
use crate::docstore::ObjectRef;
use crate::types::{Category, CodeSystem, EventValue, FormatKind};

const KNOWN: [&str; 7] = ["MSH", "PID", "DG1", "OBX", "RXA", "RXE", "PR1"];

pub fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(start) = rest.find('\\') {
        out.push_str(&rest[..start]);
        let after = &rest[start + 1..];
        let Some(end) = after.find('\\') else {
            out.push_str(&rest[start..]);
            return out;
        };
        match &after[..end] {
            "F" => out.push('|'),
            "S" => out.push('^'),
            "R" => out.push('~'),
            "E" => out.push('\\'),
            "T" => out.push('&'),
            other => {
                out.push('\\');
                out.push_str(other);
                out.push('\\');
            }
        }
        rest = &after[end + 1..];
    }
    out.push_str(rest);
    out
}

struct Segment<'a> {
    id: &'a str,
    fields: Vec<&'a str>,
}

impl<'a> Segment<'a> {
    fn split(line: &'a str) -> Segment<'a> {
        let fields: Vec<&str> = line.split('|').collect();
        Segment { id: fields[0], fields }
    }

    /// Components of the first repetition of field `n` (1-based as in the standard).
    fn components(&self, n: usize) -> Vec<String> {
        let idx = if self.id == "MSH" { n - 1 } else { n };
        let raw = self.fields.get(idx).copied().unwrap_or("");
        let first = raw.split('~').next().unwrap_or("");
        first.split('^').map(unescape).collect()
    }

    fn component(&self, n: usize, c: usize) -> String {
        self.components(n).into_iter().nth(c - 1).unwrap_or_default()
    }
}

struct Coded {
    code: String,
    display: String,
    system: Option<CodeSystem>,
}

fn coded(seg: &Segment, n: usize) -> Option<Coded> {
    let comps = seg.components(n);
    let code = comps.first().cloned().unwrap_or_default();
    if code.is_empty() {
        return None;
    }
    let display = comps.get(1).cloned().filter(|d| !d.is_empty()).unwrap_or_else(|| code.clone());
    let system = comps.get(2).and_then(|s| CodeSystem::from_hl7_abbrev(s));
    Some(Coded { code, display, system })
}

fn observation_value(seg: &Segment) -> Result<EventValue, String> {
    let kind = seg.component(2, 1);
    let raw = seg.components(5).join("^");
    let unit = seg.component(6, 1);
    match kind.as_str() {
        "NM" => {
            let value: f64 = raw.trim().parse().map_err(|_| format!("non-numeric NM value `{raw}`"))?;
            Ok(EventValue::Quantity {
                value,
                unit: (!unit.is_empty()).then_some(unit),
            })
        }
        "DT" => parse_date(&raw).map(EventValue::Date).ok_or_else(|| format!("bad DT value `{raw}`")),
        "ID" => match raw.as_str() {
            "Y" => Ok(EventValue::Bool(true)),
            "N" => Ok(EventValue::Bool(false)),
            _ => Err(format!("bad ID value `{raw}`")),
        },
        _ if raw.is_empty() => Ok(EventValue::Present),
        _ => Ok(EventValue::Text(raw)),
    }
}

pub fn parse_hl7_message(bytes: &[u8]) -> Result<ParsedDocument, IngestError> {
    parse_hl7_message_with(bytes, false)
}

/// Parses one or more messages. Unknown segments are skipped with a
/// warning unless `strict`, in which case they are errors.
pub fn parse_hl7_message_with(bytes: &[u8], strict: bool) -> Result<ParsedDocument, IngestError> {
    let body = text(bytes)?;
    let object = ObjectRef::of(bytes);
    let lines: Vec<&str> = body.split(['\r', '\n']).filter(|l| !l.trim().is_empty()).collect();
    if lines.first().is_none_or(|l| !l.starts_with("MSH")) {
        return Err(IngestError::MalformedHl7("message does not start with an MSH segment".into()));
    }
    let mut doc = ParsedDocument {
        object: object.clone(),
        format: FormatKind::Hl7V2,
        patient: None,
        statements: Vec::new(),
        warnings: Vec::new(),
    };
    for (index, line) in lines.iter().enumerate() {
        let seg = Segment::split(line);
        let fail = |message: String| IngestError::Hl7Segment {
            index,
            id: seg.id.to_string(),
            message,
        };
        if !KNOWN.contains(&seg.id) {
            if strict {
                return Err(fail("unknown segment".into()));
            }
            doc.warnings.push(format!("segment {index}: unknown segment `{}` skipped", seg.id));
            continue;
        }
        let (category, coded, ts, value) = match seg.id {
            "MSH" => {
                if line.len() < 8 {
                    return Err(IngestError::MalformedHl7(format!("segment {index}: truncated MSH")));
                }
                continue;
            }
            "PID" => {
                let id = seg.component(3, 1);
                if !id.is_empty() {
                    doc.patient.get_or_insert(id);
                }
                continue;
            }
            "OBX" => match observation_value(&seg) {
                Ok(v) => (Category::Observations, coded(&seg, 3), seg.component(14, 1), v),
                Err(m) if strict => return Err(fail(m)),
                Err(m) => {
                    doc.warnings.push(format!("segment {index}: {m}"));
                    continue;
                }
            },
            "DG1" => (Category::Conditions, coded(&seg, 3), seg.component(5, 1), EventValue::Present),
            "RXA" => (Category::Immunizations, coded(&seg, 5), seg.component(3, 1), EventValue::Present),
            "RXE" => (Category::Medications, coded(&seg, 2), seg.component(1, 4), EventValue::Present),
            "PR1" => (Category::Procedures, coded(&seg, 3), seg.component(5, 1), EventValue::Present),
            _ => unreachable!("filtered by KNOWN"),
        };
        let Some(c) = coded else {
            if strict {
                return Err(fail("missing coded element".into()));
            }
            doc.warnings.push(format!("segment {index}: `{}` without code skipped", seg.id));
            continue;
        };
        let timestamp = parse_datetime(&ts);
        if timestamp.is_none() && !ts.is_empty() {
            doc.warnings.push(format!("segment {index}: unparseable timestamp `{ts}`"));
        }
        doc.statements.push(CanonicalStatement {
            patient: String::new(),
            category,
            code_system: c.system,
            code: Some(c.code),
            display: c.display,
            value,
            timestamp,
            source: SourceRef {
                object: object.clone(),
                locator: Locator::Segment { index },
            },
        });
    }
    Ok(doc.finish())
}
