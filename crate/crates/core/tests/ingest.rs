mod common;

use clinistruct::corpus::{generate_corpus, Catalog};
use clinistruct::extract::build_registry;
use clinistruct::ingest::{
    detect_format, hl7_unescape, parse_csv_extract, parse_fhir_bundle, parse_hl7_message, parse_hl7_message_with,
    parse_narrative_note, parse_with_registry, IngestError, Locator, NarrativeMatcher, ParseOptions,
};
use clinistruct::scatter::{hl7_escape, scatter_patient, NoiseProfile, CSV_HEADER};
use clinistruct::{Category, EventValue, FormatKind};
use proptest::prelude::*;

const MSH: &str = "MSH|^~\\&|A|B|C|D|20200516||ORU^R01|1|P|2.5";
const PID: &str = "PID|1||MRN-X-000001^^^MRN||Doe^Jane||19800101|F";

fn hl7(segments: &[&str]) -> String {
    segments.join("\r") + "\r"
}

#[test]
fn detects_each_format() {
    assert_eq!(detect_format(MSH.as_bytes()).unwrap(), FormatKind::Hl7V2);
    assert_eq!(detect_format(br#"{"resourceType":"Bundle","entry":[]}"#).unwrap(), FormatKind::FhirJson);
    assert_eq!(detect_format(CSV_HEADER.join(",").as_bytes()).unwrap(), FormatKind::CsvExtract);
    assert_eq!(detect_format(b"The patient felt fine today.").unwrap(), FormatKind::Narrative);
    assert_eq!(detect_format(br#"{"resourceType":"Patient"}"#).unwrap(), FormatKind::Narrative);
    assert!(matches!(detect_format(b""), Err(IngestError::Empty)));
}

#[test]
fn detection_has_no_confusion_on_clean_corpus() {
    let c = Catalog::bundled();
    let (records, _) = generate_corpus(&c, 3, 21);
    for r in &records {
        for doc in scatter_patient(r, c.disease(&r.disease_id).unwrap(), &NoiseProfile::zero(), 21).unwrap() {
            assert_eq!(detect_format(doc.body.as_bytes()).unwrap(), doc.format, "{}", doc.doc_id);
        }
    }
}

#[test]
fn obx_becomes_an_observation() {
    let body = hl7(&[MSH, PID, "OBX|1|NM|2857-1^PSA^LN||8.8|ng/mL|||||F"]);
    let d = parse_hl7_message(body.as_bytes()).unwrap();
    assert_eq!(d.patient.as_deref(), Some("MRN-X-000001"));
    assert_eq!(d.statements.len(), 1);
    let s = &d.statements[0];
    assert_eq!(s.category, Category::Observations);
    assert_eq!(s.code.as_deref(), Some("2857-1"));
    assert_eq!(s.display, "PSA");
    assert_eq!(s.value, EventValue::Quantity { value: 8.8, unit: Some("ng/mL".into()) });
    assert_eq!(s.source.locator, Locator::Segment { index: 2 });
}

#[test]
fn hl7_segment_kinds_map_to_categories() {
    let body = hl7(&[
        MSH,
        PID,
        "DG1|1||J20.9^Acute bronchitis^I10||202001010930",
        "RXA|0|1|202001010930|202001010930|86198006^Influenza vaccine^SCT|1",
        "RXE|^^^202001010930|1043400^Amoxicillin^RXNORM",
        "PR1|1||65575008^Biopsy of prostate^SCT||202001010930",
    ]);
    let d = parse_hl7_message(body.as_bytes()).unwrap();
    let cats: Vec<Category> = d.statements.iter().map(|s| s.category).collect();
    assert_eq!(
        cats,
        [Category::Conditions, Category::Immunizations, Category::Medications, Category::Procedures]
    );
    assert!(d.statements.iter().all(|s| s.timestamp.is_some()));
}

#[test]
fn header_only_message_is_empty_and_quiet() {
    let d = parse_hl7_message(hl7(&[MSH, PID]).as_bytes()).unwrap();
    assert!(d.statements.is_empty());
    assert!(d.warnings.is_empty());
}

#[test]
fn unknown_segments_warn_or_fail() {
    let body = hl7(&[MSH, PID, "ZZZ|1|x", "OBX|1|NM|2857-1^PSA^LN||8.8|ng/mL|||||F"]);
    let lenient = parse_hl7_message(body.as_bytes()).unwrap();
    assert_eq!(lenient.statements.len(), 1);
    assert_eq!(lenient.warnings.len(), 1);
    assert!(matches!(
        parse_hl7_message_with(body.as_bytes(), true),
        Err(IngestError::Hl7Segment { index: 2, .. })
    ));
}

#[test]
fn missing_msh_is_malformed() {
    assert!(matches!(parse_hl7_message(PID.as_bytes()), Err(IngestError::MalformedHl7(_))));
}

#[test]
fn hl7_escapes_decode() {
    assert_eq!(hl7_unescape(r"a\F\b\S\c\R\d\E\e\T\f"), r"a|b^c~d\e&f");
    let body = hl7(&[MSH, PID, r"OBX|1|ST|1234-5^Note\F\x^LN||left\S\right|||||F"]);
    let d = parse_hl7_message(body.as_bytes()).unwrap();
    assert_eq!(d.statements[0].display, "Note|x");
    assert_eq!(d.statements[0].value, EventValue::Text("left^right".into()));
}

proptest! {
    #[test]
    fn hl7_escape_round_trips(s in "[ -~]{0,40}") {
        prop_assert_eq!(hl7_unescape(&hl7_escape(&s)), s);
    }
}

#[test]
fn csv_header_only_has_no_statements() {
    let body = CSV_HEADER.join(",") + "\r\n";
    assert!(parse_csv_extract(body.as_bytes()).unwrap().statements.is_empty());
}

#[test]
fn ragged_csv_row_names_its_line() {
    let body = format!("{}\r\nE1,2020-01-01T10:00,Observations,2857-1,PSA,8.8\r\n", CSV_HEADER.join(","));
    match parse_csv_extract(body.as_bytes()) {
        Err(IngestError::Csv { line, .. }) => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }
}

#[test]
fn csv_rows_map_one_to_one_with_quoting() {
    let body = format!(
        "{}\r\nMRN-X-000001-E001,2020-01-01T10:00,Observations,2857-1,\"PSA, total\",8.8,ng/mL\r\nMRN-X-000001-E002,2020-01-02T11:00,Conditions,J20.9,\"Acute \"\"viral\"\" bronchitis\",,\r\n",
        CSV_HEADER.join(",")
    );
    let d = parse_csv_extract(body.as_bytes()).unwrap();
    assert_eq!(d.statements.len(), 2);
    assert_eq!(d.statements[0].display, "PSA, total");
    assert_eq!(d.statements[1].display, "Acute \"viral\" bronchitis");
    assert_eq!(d.statements[1].source.locator, Locator::Line { line: 3 });
}

#[test]
fn malformed_fhir_reports_position() {
    assert!(matches!(
        parse_fhir_bundle(b"{\"resourceType\": \"Bundle\",\n \"entry\": [ }"),
        Err(IngestError::Json { line: 2, .. })
    ));
}

#[test]
fn narrative_psa_sentence() {
    let c = Catalog::bundled();
    let reg = build_registry(&c).unwrap();
    let d = parse_narrative_note(b"Observations:\nPSA measured at 8.8 ng/mL on 2020-05-16.\n", &reg).unwrap();
    assert_eq!(d.format, FormatKind::Narrative);
    assert_eq!(d.statements.len(), 1);
    let s = &d.statements[0];
    assert_eq!(s.code.as_deref(), Some("2857-1"));
    assert_eq!(s.category, Category::Observations);
    assert_eq!(s.value, EventValue::Quantity { value: 8.8, unit: Some("ng/ml".into()) });
    assert_eq!(s.timestamp.unwrap().date().to_string(), "2020-05-16");
    let Locator::Span { start, end } = s.source.locator else { panic!("span locator") };
    assert_eq!(&"Observations:\nPSA measured at 8.8 ng/mL on 2020-05-16.\n"[start..end], "PSA");
}

#[test]
fn narrative_without_terms_is_empty() {
    let reg = build_registry(&Catalog::bundled()).unwrap();
    let d = parse_narrative_note(b"Patient attended and left in good spirits.", &reg).unwrap();
    assert!(d.statements.is_empty());
}

#[test]
fn narrative_synonym_carries_canonical_code() {
    let reg = build_registry(&Catalog::bundled()).unwrap();
    let d = parse_narrative_note(b"Conditions:\nDiagnosed with middle ear infection on 2021-03-04.", &reg).unwrap();
    assert_eq!(d.statements.len(), 1);
    assert_eq!(d.statements[0].category, Category::Conditions);
    assert_eq!(d.statements[0].code.as_deref(), Some("H66.90"));
}

#[test]
fn narrative_tolerates_one_typo_in_long_tokens_only() {
    let reg = build_registry(&Catalog::bundled()).unwrap();
    let m = NarrativeMatcher::new(&reg);
    let typo = m.parse(b"Conditions:\nDiagnosed with middle ear infecton on 2021-03-04.").unwrap();
    assert_eq!(typo.statements.len(), 1);
    assert_eq!(typo.statements[0].code.as_deref(), Some("H66.90"));
    let short = m.parse(b"Observations:\nPSB measured at 8.8 ng/mL on 2020-05-16.").unwrap();
    assert!(short.statements.is_empty());
}

#[test]
fn ambiguous_narrative_surface_stays_uncoded() {
    let reg = build_registry(&Catalog::bundled()).unwrap();
    let d = parse_narrative_note(b"Symptoms:\nReports cough since 2022-01-10.", &reg).unwrap();
    assert_eq!(d.statements.len(), 1);
    assert_eq!(d.statements[0].code, None);
    assert_eq!(d.statements[0].display.to_lowercase(), "cough");
}

fn tokens(s: &str) -> Vec<String> {
    s.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase).collect()
}

#[test]
fn locators_resolve_to_display_or_code() {
    let c = Catalog::bundled();
    let reg = build_registry(&c).unwrap();
    let matcher = NarrativeMatcher::new(&reg);
    let (records, _) = generate_corpus(&c, 2, 8);
    for r in &records {
        for doc in scatter_patient(r, c.disease(&r.disease_id).unwrap(), &NoiseProfile::zero(), 8).unwrap() {
            let d = clinistruct::ingest::parse_document(doc.body.as_bytes(), &matcher, ParseOptions::default()).unwrap();
            for s in &d.statements {
                let text = match &s.source.locator {
                    Locator::Segment { index } => doc.body.split('\r').nth(*index).unwrap().to_string(),
                    Locator::Line { line } => doc.body.lines().nth(*line as usize - 1).unwrap().to_string(),
                    Locator::Span { start, end } => doc.body[*start..*end].to_string(),
                    Locator::JsonPath { path } => {
                        let v: serde_json::Value = serde_json::from_str(&doc.body).unwrap();
                        let pointer = format!("/{}", path.replace('[', "/").replace(']', "").replace('.', "/"));
                        v.pointer(&pointer).unwrap_or_else(|| panic!("{path}")).to_string()
                    }
                };
                let code_hit = s.code.as_ref().is_some_and(|c| text.contains(c.as_str()));
                let display_hit = match s.source.locator {
                    Locator::Span { .. } => tokens(&text) == tokens(&s.display),
                    _ => text.to_lowercase().contains(&s.display.to_lowercase()),
                };
                assert!(code_hit || display_hit, "{:?} not in {text}", s.display);
            }
        }
    }
}

#[test]
fn parse_options_pass_through_strictness() {
    let reg = build_registry(&Catalog::bundled()).unwrap();
    let body = hl7(&[MSH, PID, "ZZZ|1"]);
    assert!(parse_with_registry(body.as_bytes(), &reg, ParseOptions { strict: false }).is_ok());
    assert!(parse_with_registry(body.as_bytes(), &reg, ParseOptions { strict: true }).is_err());
    assert!(matches!(
        parse_with_registry(&[0xff, 0xfe], &reg, ParseOptions::default()),
        Err(IngestError::NotUtf8)
    ));
}

#[test]
fn registry_closure_and_ambiguity() {
    let c = Catalog::bundled();
    let reg = build_registry(&c).unwrap();
    for d in &c.diseases {
        for v in &d.variable_specs {
            for s in &v.synonyms {
                let codes = reg.lookup(s).unwrap_or_else(|| panic!("{s} unresolvable"));
                assert!(v.code_bindings.iter().any(|b| codes.contains(&b.code)), "{s}");
            }
        }
    }
    assert!(reg.is_ambiguous("cough"));
    assert!(reg.ambiguous_forms()["cough"].contains("respiratory-cough"));
    let asthma: Vec<_> = reg.scoped_links("cough", "asthma").into_iter().map(|l| l.variable_id.clone()).collect();
    let bronchitis: Vec<_> =
        reg.scoped_links("cough", "bronchitis").into_iter().map(|l| l.variable_id.clone()).collect();
    assert!(!asthma.is_empty() && !bronchitis.is_empty());
    assert!(bronchitis.iter().all(|v| v.starts_with("bro.")));
}

#[test]
fn empty_catalog_gives_empty_registry() {
    let c = Catalog { catalog_version: 1, diseases: vec![] };
    assert!(build_registry(&c).unwrap().is_empty());
}
