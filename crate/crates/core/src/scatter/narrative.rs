use std::fmt::Write;

use super::draft::{DateStyle, DocDraft, DraftEntry};
use crate::canonical::{format_date, format_dotted_date, format_number};
use crate::seed::stable_hash64;
use crate::types::{Category, EventValue};

const TITLES: [&str; 4] = [
    "DISCHARGE SUMMARY",
    "PROGRESS NOTE",
    "CONSULTATION REPORT",
    "PRINTED REPORT (layout-preserving text rendition)",
];

/// Section order in the note; each heading is the category name.
const SECTIONS: [Category; 10] = [
    Category::Conditions,
    Category::Symptoms,
    Category::Observations,
    Category::Medications,
    Category::Immunizations,
    Category::Procedures,
    Category::CarePlans,
    Category::Devices,
    Category::Codes,
    Category::Names,
];

fn when(e: &DraftEntry) -> (String, String) {
    let date = match e.date_style {
        DateStyle::Iso => format_date(&e.timestamp.date()),
        DateStyle::Dotted => format_dotted_date(&e.timestamp.date()),
    };
    (date, e.timestamp.format("%H:%M").to_string())
}

fn value_text(e: &DraftEntry) -> Option<String> {
    match &e.value {
        EventValue::Quantity { value, unit } => Some(match unit {
            Some(u) => format!("{} {}", format_number(*value), u),
            None => format_number(*value),
        }),
        EventValue::Text(t) => Some(format!("\"{t}\"")),
        EventValue::Date(d) => Some(match e.date_style {
            DateStyle::Iso => format!("\"{}\"", format_date(d)),
            DateStyle::Dotted => format!("\"{}\"", format_dotted_date(d)),
        }),
        EventValue::Bool(b) => Some(if *b { "yes" } else { "no" }.to_string()),
        EventValue::Present => None,
    }
}

fn presence_templates(category: Category) -> [&'static str; 3] {
    match category {
        Category::Conditions => [
            "Diagnosed with {t} on {d} at {h}.",
            "{t} diagnosed ({d} {h}).",
            "On {d} at {h} a diagnosis of {t} was made.",
        ],
        Category::Medications => [
            "Prescribed {t} on {d} at {h}.",
            "{t} prescribed ({d} {h}).",
            "On {d} at {h} {t} was started.",
        ],
        Category::Immunizations => [
            "Received {t} on {d} at {h}.",
            "{t} administered ({d} {h}).",
            "On {d} at {h} {t} was given.",
        ],
        Category::Procedures => [
            "Underwent {t} on {d} at {h}.",
            "{t} performed ({d} {h}).",
            "On {d} at {h} {t} was carried out.",
        ],
        Category::Symptoms => [
            "Patient reports {t} on {d} at {h}.",
            "{t} noted ({d} {h}).",
            "On {d} at {h} the patient described {t}.",
        ],
        Category::CarePlans => [
            "Care plan started: {t} on {d} at {h}.",
            "{t} initiated ({d} {h}).",
            "On {d} at {h} {t} was agreed.",
        ],
        Category::Devices => [
            "Device in use: {t} since {d} at {h}.",
            "{t} in place ({d} {h}).",
            "On {d} at {h} {t} was fitted.",
        ],
        Category::Codes | Category::Names | Category::Observations => [
            "Encounter recorded: {t} on {d} at {h}.",
            "{t} documented ({d} {h}).",
            "On {d} at {h} visit type {t}.",
        ],
    }
}

fn value_templates(value: &EventValue) -> [&'static str; 3] {
    match value {
        EventValue::Quantity { .. } => [
            "{t} measured at {v} on {d} at {h}.",
            "{t}: {v} ({d} {h}).",
            "On {d} at {h} the {t} was {v}.",
        ],
        EventValue::Bool(_) => [
            "{t} reported: {v} on {d} at {h}.",
            "{t}: {v} ({d} {h}).",
            "On {d} at {h} {t} was assessed: {v}.",
        ],
        _ => [
            "{t} documented as {v} on {d} at {h}.",
            "{t}: {v} ({d} {h}).",
            "On {d} at {h} the {t} was {v}.",
        ],
    }
}

pub fn sentence(e: &DraftEntry) -> String {
    let (d, h) = when(e);
    let (template, v) = match value_text(e) {
        Some(v) => (value_templates(&e.value)[e.template as usize % 3], v),
        None => (presence_templates(e.category)[e.template as usize % 3], String::new()),
    };
    template
        .replace("{t}", &e.display)
        .replace("{v}", &v)
        .replace("{d}", &d)
        .replace("{h}", &h)
}

pub fn render(draft: &DocDraft) -> String {
    let demo = &draft.demographics;
    let title = TITLES[(stable_hash64(&[draft.doc_id.as_bytes()]) % TITLES.len() as u64) as usize];
    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "Name: {}", demo.full_name());
    let _ = writeln!(
        out,
        "Address: {}, {} {}",
        demo.address.line, demo.address.postal_code, demo.address.city
    );
    let _ = writeln!(out, "DOB: {}", format_date(&demo.birth_date));
    let _ = writeln!(out, "Patient ID: {}", draft.patient_id);
    let _ = writeln!(out, "Document: {}", draft.doc_id);
    for cat in SECTIONS {
        let lines: Vec<String> = draft.entries.iter().filter(|e| e.category == cat).map(sentence).collect();
        if lines.is_empty() {
            continue;
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "{cat}:");
        for l in lines {
            let _ = writeln!(out, "{l}");
        }
    }
    out
}
