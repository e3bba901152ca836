use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::noise::NoiseProfile;
use crate::corpus::PatientRecord;
use crate::seed::{rng_for, stable_hash64};
use crate::types::FormatKind;

pub const MIN_DOCS: usize = 2;
pub const MAX_DOCS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedDoc {
    pub doc_id: String,
    pub format: FormatKind,
    pub event_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentPlan {
    pub patient_id: String,
    pub docs: Vec<PlannedDoc>,
}

impl DocumentPlan {
    pub fn formats(&self) -> BTreeSet<FormatKind> {
        self.docs.iter().map(|d| d.format).collect()
    }
}

/// Partitions the record's events over 2..=20 documents of at least two
/// formats. Events a format cannot carry are routed elsewhere; documents
/// left empty receive a duplicate of a compatible event, and the profile's
/// duplicate rate copies further events into a second document.
pub fn plan_fragmentation(record: &PatientRecord, profile: &NoiseProfile, seed: u64) -> DocumentPlan {
    let mut rng = rng_for(seed, "plan", stable_hash64(&[record.patient_id.as_bytes()]));
    let events = &record.events;
    let wanted = events.len().div_ceil(5) + rng.random_range(0..=3);
    let n_docs = wanted.clamp(MIN_DOCS, MAX_DOCS);

    let hl7_usable = events.iter().any(|e| FormatKind::Hl7V2.supports(e.category));
    let pool: Vec<FormatKind> = FormatKind::ALL
        .into_iter()
        .filter(|f| hl7_usable || *f != FormatKind::Hl7V2)
        .collect();
    let mut formats: Vec<FormatKind> = (0..n_docs).map(|_| *pool.choose(&mut rng).unwrap()).collect();
    if formats.iter().all(|f| *f == formats[0]) {
        let others: Vec<FormatKind> = pool.iter().copied().filter(|f| *f != formats[0]).collect();
        formats[n_docs - 1] = *others.choose(&mut rng).unwrap();
    }

    let mut assigned: Vec<Vec<usize>> = vec![Vec::new(); n_docs];
    for (i, e) in events.iter().enumerate() {
        let fits: Vec<usize> = (0..n_docs).filter(|d| formats[*d].supports(e.category)).collect();
        assigned[*fits.choose(&mut rng).unwrap()].push(i);
    }
    if profile.duplicate_conflict_rate > 0.0 {
        for (i, e) in events.iter().enumerate() {
            if !rng.random_bool(profile.duplicate_conflict_rate) {
                continue;
            }
            let fits: Vec<usize> = (0..n_docs)
                .filter(|d| formats[*d].supports(e.category) && !assigned[*d].contains(&i))
                .collect();
            if let Some(d) = fits.choose(&mut rng) {
                assigned[*d].push(i);
            }
        }
    }
    for d in 0..n_docs {
        if assigned[d].is_empty() {
            let fits: Vec<usize> = (0..events.len())
                .filter(|i| formats[d].supports(events[*i].category))
                .collect();
            if let Some(i) = fits.choose(&mut rng) {
                assigned[d].push(*i);
            }
        }
    }

    let docs = assigned
        .into_iter()
        .zip(formats)
        .enumerate()
        .map(|(d, (mut idx, format))| {
            idx.sort_unstable();
            PlannedDoc {
                doc_id: format!("{}-D{:02}", record.patient_id, d + 1),
                format,
                event_ids: idx.into_iter().map(|i| events[i].event_id.clone()).collect(),
            }
        })
        .collect();
    DocumentPlan {
        patient_id: record.patient_id.clone(),
        docs,
    }
}
