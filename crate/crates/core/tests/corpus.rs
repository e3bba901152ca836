use std::collections::BTreeSet;

use clinistruct::canonical::{canonical_value, MISSING};
use clinistruct::corpus::{
    generate_corpus, generate_patient, load_disease_catalog, read_ground_truth_ledger, write_ground_truth_ledger,
    Catalog, CatalogError, Domain, GroundTruthLedger, LedgerEntry, MAX_EVENTS, MIN_EVENTS,
};
use clinistruct::{Category, EventValue};
use proptest::prelude::*;

const TABLE_ONE: [&str; 16] = [
    "Colorectal Cancer",
    "Prostate Cancer",
    "Contraceptives",
    "Female Reproduction",
    "Gout",
    "Attention Deficit Disorder (ADD)",
    "Epilepsy",
    "COPD",
    "Asthma",
    "Allergic Rhinitis",
    "Bronchitis",
    "Dermatitis",
    "Atopy",
    "Food Allergies",
    "Appendicitis",
    "Ear Infections",
];

#[test]
fn bundled_catalog_has_sixteen_named_modules() {
    let c = Catalog::bundled();
    let names: Vec<&str> = c.diseases.iter().map(|d| d.name.as_str()).collect();
    assert_eq!(names, TABLE_ONE);
    assert!(c.variable_count() >= 160);
    c.validate().unwrap();
}

#[test]
fn catalog_covers_every_category() {
    let c = Catalog::bundled();
    let cats: BTreeSet<Category> = c.diseases.iter().flat_map(|d| &d.variable_specs).map(|v| v.category).collect();
    assert_eq!(cats, Category::ALL.into_iter().collect());
}

#[test]
fn colorectal_is_richest_and_atopy_among_leanest() {
    let c = Catalog::bundled();
    let count = |id: &str| c.disease(id).unwrap().variable_specs.len();
    let max = c.diseases.iter().map(|d| d.variable_specs.len()).max().unwrap();
    let min = c.diseases.iter().map(|d| d.variable_specs.len()).min().unwrap();
    assert_eq!(count("colorectal_cancer"), max);
    assert_eq!(count("atopy"), min);
}

#[test]
fn empty_catalog_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.json");
    std::fs::write(&p, r#"{"catalog_version": 1, "diseases": []}"#).unwrap();
    let e = load_disease_catalog(&p).unwrap_err();
    assert!(matches!(e, CatalogError::Empty));
    assert_eq!(e.to_string(), "no diseases defined");
}

#[test]
fn duplicate_disease_is_a_conflict() {
    let mut c = Catalog::bundled();
    let first = c.diseases[0].clone();
    c.diseases.push(first);
    let text = serde_json::to_string(&c).unwrap();
    assert!(matches!(Catalog::from_json_str(&text), Err(CatalogError::DuplicateDisease(d)) if d == "colorectal_cancer"));
}

#[test]
fn malformed_catalog_reports_position() {
    let e = Catalog::from_json_str("{\n  \"diseases\": [ {\"disease_id\": 3} ]\n}").unwrap_err();
    assert!(matches!(e, CatalogError::Parse { line: 2, .. }), "{e}");
}

#[test]
fn missing_catalog_file_names_path() {
    let e = load_disease_catalog(std::path::Path::new("/nonexistent/catalog.json")).unwrap_err();
    assert!(e.to_string().contains("/nonexistent/catalog.json"));
}

#[test]
fn generation_is_deterministic_and_index_sensitive() {
    let c = Catalog::bundled();
    let m = c.disease("prostate_cancer").unwrap();
    let a = generate_patient(m, 0, 42);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&generate_patient(m, 0, 42)).unwrap());
    let b = generate_patient(m, 1, 42);
    assert_ne!(a.patient_id, b.patient_id);
    assert!(a.truth.iter().any(|(k, v)| b.truth.get(k) != Some(v)));
}

#[test]
fn table_three_values_are_legal_prostate_truths() {
    let c = Catalog::bundled();
    let m = c.disease("prostate_cancer").unwrap();
    let ipsa = m.variable("pca.ipsa").unwrap();
    let Some(Domain::Numeric { min, max, unit, .. }) = &ipsa.domain else { panic!("ipsa is numeric") };
    assert!(*min <= 44.0 && 44.0 <= *max);
    assert_eq!(canonical_value(&format!("44 {}", unit.as_deref().unwrap())), "44 ng/ml");
    let isup = m.variable("pca.isup").unwrap();
    let Some(Domain::Options { values }) = &isup.domain else { panic!("isup has options") };
    assert!(values.iter().any(|v| v == "8 (3+5)"));
    assert!(m.variable("pca.biopsy_date").is_some());
}

#[test]
fn corpus_counts_and_ledger_coverage() {
    let c = Catalog::bundled();
    let (records, ledger) = generate_corpus(&c, 50, 7);
    assert_eq!(records.len(), 800);
    let expected: usize = c.diseases.iter().map(|d| 50 * d.variable_specs.len()).sum();
    assert_eq!(ledger.entries.len(), expected);
    let keys: BTreeSet<(&str, &str)> =
        ledger.entries.iter().map(|e| (e.patient_id.as_str(), e.variable_id.as_str())).collect();
    assert_eq!(keys.len(), expected);
    for r in &records {
        assert!((MIN_EVENTS..=MAX_EVENTS).contains(&r.events.len()), "{} events", r.events.len());
        let m = c.disease(&r.disease_id).unwrap();
        assert_eq!(r.truth.len(), m.variable_specs.len());
    }
    for e in &ledger.entries {
        let r = records.iter().find(|r| r.patient_id == e.patient_id).unwrap();
        assert!(e.event_ids.iter().all(|id| r.event(id).is_some()));
        assert_eq!(e.event_ids.is_empty(), e.true_value == MISSING);
    }
}

#[test]
fn one_patient_per_disease() {
    let (records, _) = generate_corpus(&Catalog::bundled(), 1, 0);
    assert_eq!(records.len(), 16);
}

#[test]
fn corpus_is_byte_identical_across_runs() {
    let c = Catalog::bundled();
    let (r1, l1) = generate_corpus(&c, 5, 7);
    let (r2, l2) = generate_corpus(&c, 5, 7);
    assert_eq!(serde_json::to_string(&r1).unwrap(), serde_json::to_string(&r2).unwrap());
    assert_eq!(l1, l2);
}

#[test]
fn parallel_generation_matches_per_patient_calls() {
    let c = Catalog::bundled();
    let (records, _) = generate_corpus(&c, 3, 99);
    for r in &records {
        let idx: usize = r.patient_id.rsplit('-').next().unwrap().parse().unwrap();
        let solo = generate_patient(c.disease(&r.disease_id).unwrap(), idx, 99);
        assert_eq!(&solo, r);
    }
}

#[test]
fn ledger_io_round_trip_and_ordering() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    write_ground_truth_ledger(&GroundTruthLedger::default(), &empty).unwrap();
    assert_eq!(std::fs::read_to_string(&empty).unwrap(), "");

    let entry = |d: &str, p: &str, v: &str| LedgerEntry {
        patient_id: p.into(),
        disease_id: d.into(),
        variable_id: v.into(),
        true_value: "Yes".into(),
        event_ids: vec![],
    };
    let mut ledger = GroundTruthLedger {
        entries: vec![entry("gout", "p2", "a"), entry("asthma", "p9", "z"), entry("gout", "p1", "b")],
    };
    let path = dir.path().join("l.jsonl");
    write_ground_truth_ledger(&ledger, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 3);
    let back = read_ground_truth_ledger(&path).unwrap();
    ledger.sort();
    assert_eq!(back, ledger);
    let order: Vec<&str> = back.entries.iter().map(|e| e.patient_id.as_str()).collect();
    assert_eq!(order, ["p9", "p1", "p2"]);

    let (_, full) = generate_corpus(&Catalog::bundled(), 2, 3);
    let p = dir.path().join("full.jsonl");
    write_ground_truth_ledger(&full, &p).unwrap();
    assert_eq!(read_ground_truth_ledger(&p).unwrap(), full);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn numeric_truths_lie_in_declared_range(seed in any::<u64>(), idx in 0usize..1000, d in 0usize..16) {
        let c = Catalog::bundled();
        let m = &c.diseases[d];
        let r = generate_patient(m, idx, seed);
        prop_assert!((MIN_EVENTS..=MAX_EVENTS).contains(&r.events.len()));
        for e in &r.events {
            let Some(v) = e.variable_id.as_deref().and_then(|v| m.variable(v)) else { continue };
            if let (Some(Domain::Numeric { min, max, unit, .. }), EventValue::Quantity { value, unit: u }) = (&v.domain, &e.value) {
                prop_assert!(*min <= *value && *value <= *max, "{} = {}", v.variable_id, value);
                prop_assert_eq!(unit, u);
            }
            if let (Some(Domain::Options { values }), EventValue::Text(t)) = (&v.domain, &e.value) {
                prop_assert!(values.contains(t));
            }
        }
        for v in &m.variable_specs {
            prop_assert!(r.truth.contains_key(&v.variable_id));
        }
    }
}
