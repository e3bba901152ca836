use serde_json::Value;

use super::{text, CanonicalStatement, IngestError, Locator, ParsedDocument, SourceRef};
use crate::canonical::{parse_date, parse_datetime};
use crate::docstore::ObjectRef;
use crate::scatter::DEVICE_USE_EXTENSION;
use crate::types::{Category, CodeSystem, EventValue, FormatKind};

pub fn parse_fhir_bundle(bytes: &[u8]) -> Result<ParsedDocument, IngestError> {
    parse(bytes, false)
}

struct Coding {
    system: Option<CodeSystem>,
    code: String,
    display: String,
}

fn coding(concept: &Value) -> Option<Coding> {
    let c = concept.get("coding")?.as_array()?.first()?;
    let code = c.get("code")?.as_str()?.to_string();
    let display = c
        .get("display")
        .or_else(|| concept.get("text"))
        .and_then(Value::as_str)
        .unwrap_or(&code)
        .to_string();
    let system = c.get("system").and_then(Value::as_str).and_then(CodeSystem::from_uri);
    Some(Coding { system, code, display })
}

fn str_at<'a>(v: &'a Value, pointer: &str) -> Option<&'a str> {
    v.pointer(pointer).and_then(Value::as_str)
}

fn observation_value(r: &Value) -> Result<EventValue, String> {
    if let Some(q) = r.get("valueQuantity") {
        let value = q.get("value").and_then(Value::as_f64).ok_or("valueQuantity without numeric value")?;
        let unit = q.get("unit").and_then(Value::as_str).map(str::to_string);
        return Ok(EventValue::Quantity { value, unit });
    }
    if let Some(s) = r.get("valueString") {
        return s.as_str().map(|s| EventValue::Text(s.to_string())).ok_or_else(|| "valueString is not text".into());
    }
    if let Some(d) = r.get("valueDateTime") {
        let raw = d.as_str().unwrap_or_default();
        return parse_date(raw.get(..10).unwrap_or(raw))
            .map(EventValue::Date)
            .ok_or_else(|| format!("bad valueDateTime `{raw}`"));
    }
    if let Some(b) = r.get("valueBoolean") {
        return b.as_bool().map(EventValue::Bool).ok_or_else(|| "valueBoolean is not boolean".into());
    }
    Ok(EventValue::Present)
}

/// Category, concept element and timestamp of a supported resource.
fn shape<'a>(r: &'a Value, rt: &str) -> Option<(Category, Option<&'a Value>, Option<String>)> {
    let s = |p: &str| str_at(r, p).map(str::to_string);
    Some(match rt {
        "Observation" => {
            let symptom = str_at(r, "/category/0/coding/0/code") == Some("symptom");
            let cat = if symptom { Category::Symptoms } else { Category::Observations };
            (cat, r.get("code"), s("/effectiveDateTime"))
        }
        "Condition" => (Category::Conditions, r.get("code"), s("/onsetDateTime")),
        "MedicationRequest" => (Category::Medications, r.get("medicationCodeableConcept"), s("/authoredOn")),
        "Immunization" => (Category::Immunizations, r.get("vaccineCode"), s("/occurrenceDateTime")),
        "Procedure" => (Category::Procedures, r.get("code"), s("/performedDateTime")),
        "CarePlan" => (Category::CarePlans, r.pointer("/category/0"), s("/period/start")),
        "Device" => {
            let ts = r
                .get("extension")
                .and_then(Value::as_array)
                .into_iter()
                .flatten()
                .find(|e| e.get("url").and_then(Value::as_str) == Some(DEVICE_USE_EXTENSION))
                .and_then(|e| e.get("valueDateTime"))
                .and_then(Value::as_str)
                .map(str::to_string);
            (Category::Devices, r.get("type"), ts)
        }
        "Encounter" => match r.pointer("/type/0") {
            Some(t) => (Category::Codes, Some(t), s("/period/start")),
            None => (Category::Names, r.get("serviceType"), s("/period/start")),
        },
        _ => return None,
    })
}

pub(super) fn parse(bytes: &[u8], strict: bool) -> Result<ParsedDocument, IngestError> {
    let body = text(bytes)?;
    let object = ObjectRef::of(bytes);
    let root: Value = serde_json::from_str(body).map_err(|e| IngestError::Json {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if root.get("resourceType").and_then(Value::as_str) != Some("Bundle") {
        return Err(IngestError::Fhir {
            path: "resourceType".into(),
            message: "not a Bundle".into(),
        });
    }
    let mut doc = ParsedDocument {
        object: object.clone(),
        format: FormatKind::FhirJson,
        patient: None,
        statements: Vec::new(),
        warnings: Vec::new(),
    };
    let entries = root.get("entry").and_then(Value::as_array).cloned().unwrap_or_default();
    for (i, entry) in entries.iter().enumerate() {
        let path = format!("entry[{i}].resource");
        let problem = |doc: &mut ParsedDocument, message: String| -> Result<(), IngestError> {
            if strict {
                return Err(IngestError::Fhir {
                    path: path.clone(),
                    message,
                });
            }
            doc.warnings.push(format!("{path}: {message}"));
            Ok(())
        };
        let Some(r) = entry.get("resource") else {
            problem(&mut doc, "entry without resource".into())?;
            continue;
        };
        let rt = r.get("resourceType").and_then(Value::as_str).unwrap_or("");
        if rt == "Patient" {
            if let Some(id) = str_at(r, "/identifier/0/value").or_else(|| str_at(r, "/id")) {
                doc.patient.get_or_insert_with(|| id.to_string());
            }
            continue;
        }
        let Some((category, concept, ts)) = shape(r, rt) else {
            problem(&mut doc, format!("unsupported resource type `{rt}`"))?;
            continue;
        };
        let Some(c) = concept.and_then(coding) else {
            problem(&mut doc, "resource without coding".into())?;
            continue;
        };
        let value = if rt == "Observation" {
            match observation_value(r) {
                Ok(v) => v,
                Err(m) => {
                    problem(&mut doc, m)?;
                    continue;
                }
            }
        } else {
            EventValue::Present
        };
        let timestamp = ts.as_deref().and_then(parse_datetime);
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
                locator: Locator::JsonPath { path: path.clone() },
            },
        });
    }
    Ok(doc.finish())
}
