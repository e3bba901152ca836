#![allow(dead_code)]

use std::collections::BTreeSet;

use clinistruct::canonical::{canonical_value, format_timestamp};
use clinistruct::corpus::{generate_patient, Catalog, ClinicalEvent, PatientRecord};
use clinistruct::extract::{build_registry, OntologyRegistry};
use clinistruct::ingest::{parse_with_registry, CanonicalStatement, ParseOptions};
use clinistruct::scatter::{render_draft, DocDraft};
use clinistruct::seed::rng_for;
use clinistruct::{Category, FormatKind};
use rand::seq::IndexedRandom;
use rand::Rng;

pub type Key = (Category, String, String, String);

pub fn catalog() -> Catalog {
    Catalog::bundled()
}

pub fn registry(catalog: &Catalog) -> OntologyRegistry {
    build_registry(catalog).expect("bundled catalog builds a registry")
}

/// A patient drawn from a random disease plus a random non-empty subset of
/// its events that `format` can carry. `None` when no event fits.
pub fn random_event_set(
    catalog: &Catalog,
    format: FormatKind,
    seed: u64,
    case: u64,
) -> Option<(PatientRecord, Vec<ClinicalEvent>)> {
    let mut rng = rng_for(seed, "roundtrip", case);
    let module = catalog.diseases.choose(&mut rng)?;
    let record = generate_patient(module, rng.random_range(0..10_000), rng.random());
    let eligible: Vec<&ClinicalEvent> = record.events.iter().filter(|e| format.supports(e.category)).collect();
    if eligible.is_empty() {
        return None;
    }
    let take = rng.random_range(1..=eligible.len());
    let events: Vec<ClinicalEvent> = eligible.choose_multiple(&mut rng, take).map(|e| (*e).clone()).collect();
    Some((record, events))
}

pub fn event_key(e: &ClinicalEvent) -> Key {
    (
        e.category,
        e.code.clone(),
        canonical_value(&e.value.render()),
        format_timestamp(&e.timestamp),
    )
}

/// Uncoded statements resolve through the registry; ambiguous surfaces keep
/// every candidate code so the comparison can accept any of them.
pub fn statement_codes(s: &CanonicalStatement, registry: &OntologyRegistry) -> BTreeSet<String> {
    match &s.code {
        Some(c) => BTreeSet::from([c.clone()]),
        None => registry.lookup(&s.display).cloned().unwrap_or_default(),
    }
}

/// Canonical multiset equality between rendered events and parsed statements.
pub fn round_trip(
    record: &PatientRecord,
    events: &[ClinicalEvent],
    format: FormatKind,
    registry: &OntologyRegistry,
    seed: u64,
) -> Result<(), String> {
    let refs: Vec<&ClinicalEvent> = events.iter().collect();
    let draft = DocDraft::new(record, &format!("{}-D00", record.patient_id), format, &refs, seed)
        .map_err(|e| e.to_string())?;
    let doc = render_draft(&draft);
    let parsed = parse_with_registry(doc.body.as_bytes(), registry, ParseOptions { strict: true })
        .map_err(|e| format!("parse failed: {e}"))?;
    if parsed.format != format {
        return Err(format!("detected {:?}, rendered {:?}", parsed.format, format));
    }
    if let Some(s) = parsed.statements.iter().find(|s| s.patient != record.patient_id) {
        return Err(format!("statement attributed to {:?}", s.patient));
    }
    let mut expected: Vec<Key> = events.iter().map(event_key).collect();
    expected.sort();
    let mut remaining: Vec<(Key, BTreeSet<String>)> = parsed
        .statements
        .iter()
        .map(|s| {
            let key = (
                s.category,
                String::new(),
                canonical_value(&s.value.render()),
                s.timestamp.as_ref().map(format_timestamp).unwrap_or_default(),
            );
            (key, statement_codes(s, registry))
        })
        .collect();
    if remaining.len() != expected.len() {
        return Err(format!("{} events rendered, {} statements parsed", expected.len(), remaining.len()));
    }
    for k in &expected {
        let pos = remaining
            .iter()
            .position(|(s, codes)| s.0 == k.0 && s.2 == k.2 && s.3 == k.3 && codes.contains(&k.1))
            .ok_or_else(|| format!("no statement for event {k:?}; parsed {remaining:?}"))?;
        remaining.swap_remove(pos);
    }
    Ok(())
}

/// U of `a` counted pairwise (ties score one half).
pub fn pairwise_u(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .flat_map(|x| b.iter().map(move |y| (x, y)))
        .map(|(x, y)| if x > y { 1.0 } else if x == y { 0.5 } else { 0.0 })
        .sum()
}

/// Two-sided exact p by enumerating every split of the pooled sample.
pub fn enumerated_u_p(a: &[f64], b: &[f64]) -> (f64, f64) {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (n1, n) = (a.len(), pooled.len());
    let center = (a.len() * b.len()) as f64 / 2.0;
    let observed = pairwise_u(a, b);
    let (mut extreme, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        let (ga, gb): (Vec<f64>, Vec<f64>) = {
            let mut ga = Vec::new();
            let mut gb = Vec::new();
            for (i, v) in pooled.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    ga.push(*v);
                } else {
                    gb.push(*v);
                }
            }
            (ga, gb)
        };
        total += 1;
        if (pairwise_u(&ga, &gb) - center).abs() >= (observed - center).abs() - 1e-12 {
            extreme += 1;
        }
    }
    (observed, extreme as f64 / total as f64)
}

pub fn mean_of(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn var_of(xs: &[f64]) -> f64 {
    let m = mean_of(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn cohens_d_oracle(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = (((na - 1.0) * var_of(a) + (nb - 1.0) * var_of(b)) / (na + nb - 2.0)).sqrt();
    (mean_of(a) - mean_of(b)) / pooled
}

/// Every group-size pair with n1·n2 <= `limit`, each with tie-heavy and
/// tie-free samples drawn from `seed`.
pub fn u_test_cases(limit: usize, per_size: u64, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut out = Vec::new();
    for n1 in 1..=limit {
        for n2 in 1..=limit / n1 {
            for case in 0..per_size {
                let mut rng = rng_for(seed, "u-cases", (n1 * 1000 + n2) as u64 * 10_000 + case);
                let spread = if case % 2 == 0 { 4 } else { 1000 };
                let a = (0..n1).map(|_| rng.random_range(0..spread) as f64).collect();
                let b = (0..n2).map(|_| rng.random_range(0..spread) as f64).collect();
                out.push((a, b));
            }
        }
    }
    out
}
