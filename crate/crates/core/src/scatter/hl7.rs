use chrono::NaiveDateTime;

use super::draft::{DocDraft, DraftEntry};
use crate::canonical::format_number;
use crate::types::{Category, EventValue};

/// Events per message before a new MSH/PID header is started.
const MESSAGE_CAPACITY: usize = 25;

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '|' => out.push_str("\\F\\"),
            '^' => out.push_str("\\S\\"),
            '~' => out.push_str("\\R\\"),
            '\\' => out.push_str("\\E\\"),
            '&' => out.push_str("\\T\\"),
            '\r' | '\n' => out.push(' '),
            _ => out.push(c),
        }
    }
    out
}

pub fn hl7_ts(ts: &NaiveDateTime) -> String {
    ts.format("%Y%m%d%H%M").to_string()
}

fn cwe(e: &DraftEntry) -> String {
    format!("{}^{}^{}", escape(&e.code), escape(&e.display), e.system.hl7_abbrev())
}

fn segment(e: &DraftEntry, set_id: usize) -> String {
    let ts = hl7_ts(&e.timestamp);
    match e.category {
        Category::Observations => {
            let (kind, value, unit) = match &e.value {
                EventValue::Quantity { value, unit } => ("NM", format_number(*value), unit.clone().unwrap_or_default()),
                EventValue::Text(t) => ("ST", t.clone(), String::new()),
                EventValue::Date(d) => ("DT", d.format("%Y%m%d").to_string(), String::new()),
                EventValue::Bool(b) => ("ID", if *b { "Y" } else { "N" }.to_string(), String::new()),
                EventValue::Present => ("ST", String::new(), String::new()),
            };
            format!(
                "OBX|{set_id}|{kind}|{}||{}|{}|||||F|||{ts}",
                cwe(e),
                escape(&value),
                escape(&unit)
            )
        }
        Category::Conditions => format!("DG1|{set_id}||{}||{ts}", cwe(e)),
        Category::Immunizations => format!("RXA|0|1|{ts}|{ts}|{}|1", cwe(e)),
        Category::Medications => format!("RXE|^^^{ts}|{}", cwe(e)),
        Category::Procedures => format!("PR1|{set_id}||{}||{ts}", cwe(e)),
        other => unreachable!("draft validated: {other} is not carried by HL7"),
    }
}

pub fn render(draft: &DocDraft) -> String {
    let d = &draft.demographics;
    let created = hl7_ts(&draft.created_at());
    let sex = if d.sex == "male" { "M" } else { "F" };
    let pid = format!(
        "PID|1||{}^^^MRN||{}^{}||{}|{sex}|||{}^^{}^^{}",
        escape(&draft.patient_id),
        escape(&d.family_name),
        escape(&d.given_name),
        d.birth_date.format("%Y%m%d"),
        escape(&d.address.line),
        escape(&d.address.city),
        escape(&d.address.postal_code),
    );
    let mut segments = Vec::new();
    for (m, chunk) in draft.entries.chunks(MESSAGE_CAPACITY).enumerate() {
        segments.push(format!(
            "MSH|^~\\&|CLINISTRUCT|SYNTH|INGEST|DESK|{created}||ORU^R01|{}-M{}|P|2.5",
            escape(&draft.doc_id),
            m + 1
        ));
        segments.push(pid.clone());
        for (i, e) in chunk.iter().enumerate() {
            segments.push(segment(e, i + 1));
        }
    }
    let mut body = segments.join("\r");
    body.push('\r');
    body
}
