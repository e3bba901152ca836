use serde_json::{json, Map, Value};

use super::draft::{DocDraft, DraftEntry};
use crate::canonical::{format_date, format_timestamp};
use crate::types::{Category, EventValue};

pub const OBSERVATION_CATEGORY_SYSTEM: &str = "http://terminology.hl7.org/CodeSystem/observation-category";
pub const MRN_SYSTEM: &str = "urn:oid:2.16.840.1.113883.4.1";
pub const DEVICE_USE_EXTENSION: &str = "http://hl7.org/fhir/StructureDefinition/device-use-date";

fn fhir_datetime(e: &DraftEntry) -> String {
    format!("{}:00", format_timestamp(&e.timestamp))
}

fn codeable(e: &DraftEntry) -> Value {
    json!({
        "coding": [{ "system": e.system.uri(), "code": e.code, "display": e.display }],
        "text": e.display,
    })
}

fn observation(e: &DraftEntry, patient_ref: &str) -> Value {
    let kind = if e.category == Category::Symptoms { "symptom" } else { "laboratory" };
    let mut r = Map::new();
    r.insert("resourceType".into(), json!("Observation"));
    r.insert("id".into(), json!(e.event_id));
    r.insert("status".into(), json!("final"));
    r.insert(
        "category".into(),
        json!([{ "coding": [{ "system": OBSERVATION_CATEGORY_SYSTEM, "code": kind }] }]),
    );
    r.insert("code".into(), codeable(e));
    r.insert("subject".into(), json!({ "reference": patient_ref }));
    r.insert("effectiveDateTime".into(), json!(fhir_datetime(e)));
    match &e.value {
        EventValue::Quantity { value, unit } => {
            let mut q = Map::new();
            q.insert("value".into(), json!(value));
            if let Some(u) = unit {
                q.insert("unit".into(), json!(u));
                q.insert("system".into(), json!("http://unitsofmeasure.org"));
                q.insert("code".into(), json!(u));
            }
            r.insert("valueQuantity".into(), Value::Object(q));
        }
        EventValue::Text(t) => {
            r.insert("valueString".into(), json!(t));
        }
        EventValue::Date(d) => {
            r.insert("valueDateTime".into(), json!(format_date(d)));
        }
        EventValue::Bool(b) => {
            r.insert("valueBoolean".into(), json!(b));
        }
        EventValue::Present => {}
    }
    Value::Object(r)
}

fn resource(e: &DraftEntry, patient_ref: &str) -> Value {
    let subject = json!({ "reference": patient_ref });
    let when = fhir_datetime(e);
    match e.category {
        Category::Observations | Category::Symptoms => observation(e, patient_ref),
        Category::Conditions => json!({
            "resourceType": "Condition", "id": e.event_id, "code": codeable(e),
            "subject": subject, "onsetDateTime": when,
        }),
        Category::Medications => json!({
            "resourceType": "MedicationRequest", "id": e.event_id, "status": "active", "intent": "order",
            "medicationCodeableConcept": codeable(e), "subject": subject, "authoredOn": when,
        }),
        Category::Immunizations => json!({
            "resourceType": "Immunization", "id": e.event_id, "status": "completed",
            "vaccineCode": codeable(e), "patient": subject, "occurrenceDateTime": when,
        }),
        Category::Procedures => json!({
            "resourceType": "Procedure", "id": e.event_id, "status": "completed", "code": codeable(e),
            "subject": subject, "performedDateTime": when,
        }),
        Category::CarePlans => json!({
            "resourceType": "CarePlan", "id": e.event_id, "status": "active", "intent": "plan",
            "category": [codeable(e)], "subject": subject, "period": { "start": when },
        }),
        Category::Devices => json!({
            "resourceType": "Device", "id": e.event_id, "type": codeable(e), "patient": subject,
            "extension": [{ "url": DEVICE_USE_EXTENSION, "valueDateTime": when }],
        }),
        Category::Codes => json!({
            "resourceType": "Encounter", "id": e.event_id, "status": "finished",
            "type": [codeable(e)], "subject": subject, "period": { "start": when },
        }),
        Category::Names => json!({
            "resourceType": "Encounter", "id": e.event_id, "status": "finished",
            "serviceType": codeable(e), "subject": subject, "period": { "start": when },
        }),
    }
}

pub fn render(draft: &DocDraft) -> String {
    let d = &draft.demographics;
    let patient_ref = format!("Patient/{}", draft.patient_id);
    let patient = json!({
        "resourceType": "Patient",
        "id": draft.patient_id,
        "identifier": [{ "system": MRN_SYSTEM, "value": draft.patient_id }],
        "name": [{ "text": d.full_name(), "family": d.family_name, "given": [d.given_name] }],
        "gender": d.sex,
        "birthDate": format_date(&d.birth_date),
        "address": [{ "line": [d.address.line], "city": d.address.city, "postalCode": d.address.postal_code }],
    });
    let mut entries = vec![json!({ "fullUrl": format!("urn:uuid:{}", draft.patient_id), "resource": patient })];
    for e in &draft.entries {
        entries.push(json!({ "resource": resource(e, &patient_ref) }));
    }
    let bundle = json!({
        "resourceType": "Bundle",
        "id": draft.doc_id,
        "type": "collection",
        "timestamp": format!("{}:00", format_timestamp(&draft.created_at())),
        "entry": entries,
    });
    let mut body = serde_json::to_string_pretty(&bundle).expect("bundle serializes");
    body.push('\n');
    body
}
